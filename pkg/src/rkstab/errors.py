"""Exception hierarchy shared across the package.

Every failure mode that callers are expected to handle has its own class so it
can be caught precisely; all of them derive from :class:`RkstabError`.
Certification failures are *values*, not exceptions — see
:class:`rkstab.certify.CertFailure` — because a failed certificate is a
legitimate, reportable outcome of the pipeline rather than a programming error.
"""


class RkstabError(Exception):
    """Base class for all package-specific errors."""


class NotExplicit(RkstabError):
    """An operation that requires an explicit tableau received an implicit one."""


class ZeroParameter(RkstabError):
    """A one-parameter method family was evaluated at a degenerate parameter."""


class DimensionMismatch(RkstabError):
    """Array/state dimensions are inconsistent with the method or norm."""


class Inconsistent(RkstabError):
    """A stability polynomial does not satisfy P(0) = 1."""


class NoSignChange(RkstabError):
    """The bound polynomial has no positive root below 2**64.

    The estimate then imposes no time-step restriction; the method is
    unconditionally stable under this estimate.
    """


class InvalidDegree(RkstabError):
    """Polynomial degree outside the supported range (p >= 0)."""


class NoConvergence(RkstabError):
    """An iteration failed to converge within its iteration budget."""


class SingularSystem(RkstabError):
    """The implicit-Euler system matrix could not be factorized.

    For a semibounded operator and dt > 0 the system I - dt*L is always
    invertible, so this signals a non-semibounded operator or dt <= 0.
    """


class DegenerateDenominator(RkstabError):
    """Filter strength is undefined: energy must shrink but only the
    unfilterable constant modes carry any of it."""


class InfeasibleTarget(RkstabError):
    """A projection target below the constant-mode energy cannot be reached
    by scaling non-constant modes."""
