"""Exact-arithmetic strong-stability certificates for explicit RK methods.

For a method with stability polynomial P applied to ``du/dt = L u`` with a
semibounded operator (``<u, Lu> <= 0``), the one-step energy change is

    ||u+||^2 - ||u0||^2 = <(P(Z) - I) u, (P(Z) + I) u>,    Z = dt * L.

This module mechanizes the energy argument on that pair of operator
polynomials, entirely in rational arithmetic:

1. :func:`energy_pair` forms (P - 1, P + 1).
2. :func:`idea1_reduce` repeatedly splits the lower-order side S against the
   higher-order side T as ``S = c * (T/Z) + R``: the matched part contributes
   ``c * <v, Z v>`` with ``v = (T/Z) u``, which is non-positive by
   semiboundedness whenever ``c > 0`` and may be dropped. The remainder
   replaces S; the loop stops when both sides have equal lowest order.
   Non-positive ``c`` or an order gap other than one is a classified failure.
3. :func:`expand_cross` expands the remaining scalar product into a symmetric
   quadratic form ``sum c_ij <Z^i u, Z^j u>``.
4. :func:`drop_adjacent_positive` discards entries ``(i, i+1)`` with positive
   coefficients (each equals ``c <v, Z v> <= 0`` with ``v = Z^i u``).
5. :func:`cauchy_schwarz_bound` anchors the form at its smallest order k
   (requiring ``c_kk < 0``), bounds every other entry by
   ``|c| * ||Z||^(i+j-2k) * ||Z^k u||^2`` via Cauchy-Schwarz, and isolates the
   smallest positive root of the resulting polynomial in ``x = dt * ||L||`` by
   exact-sign bisection.

A successful :class:`CertBound` certifies: for every bounded semibounded L and
every dt with ``dt * ||L|| <= root.lo``, one step does not increase the norm.
A :class:`CertFailure` pinpoints which precondition of the reduction broke; it
reports that *this estimate* fails, not that the method is unstable.

In skew mode (for skew-symmetric L) all entries with odd ``i + j`` vanish
identically and are deleted first, which sharpens the bound.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Mapping, Union

from .errors import Inconsistent, NoSignChange
from .tableaux import StabilityPolynomial

__all__ = [
    "LPolynomial",
    "CrossForm",
    "ReductionStep",
    "ReductionTrace",
    "ReductionResult",
    "RootInterval",
    "CertBound",
    "CertFailure",
    "NON_POSITIVE_MATCH_COEFFICIENT",
    "ORDER_GAP_EXCEEDS_ONE",
    "NO_NEGATIVE_ANCHOR",
    "energy_pair",
    "idea1_reduce",
    "expand_cross",
    "drop_adjacent_positive",
    "cauchy_schwarz_bound",
    "isolate_positive_root",
    "certify",
    "compose_polynomial",
    "rk4_family_report",
]

#: Failure reasons (values appear verbatim in serialized reports).
NON_POSITIVE_MATCH_COEFFICIENT = "NonPositiveMatchCoefficient"
ORDER_GAP_EXCEEDS_ONE = "OrderGapExceedsOne"
NO_NEGATIVE_ANCHOR = "NoNegativeAnchor"

_ROOT_CEILING = Fraction(2) ** 64


class LPolynomial:
    """Sparse polynomial in the operator symbol, with exact coefficients.

    Immutable value type; zero coefficients are never stored.
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, Fraction | int]) -> None:
        cleaned = {}
        for power, value in coeffs.items():
            if power < 0:
                raise ValueError(f"negative power {power}")
            value = Fraction(value)
            if value != 0:
                cleaned[int(power)] = value
        self._coeffs = cleaned

    @classmethod
    def from_dense(cls, seq) -> "LPolynomial":
        """Build from a constant-first coefficient sequence."""
        return cls({k: Fraction(v) for k, v in enumerate(seq)})

    @property
    def is_zero(self) -> bool:
        return not self._coeffs

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    @property
    def ord(self) -> int:
        """Lowest power with a nonzero coefficient."""
        if not self._coeffs:
            raise ValueError("the zero polynomial has no order")
        return min(self._coeffs)

    @property
    def degree(self) -> int:
        if not self._coeffs:
            raise ValueError("the zero polynomial has no degree")
        return max(self._coeffs)

    def __getitem__(self, power: int) -> Fraction:
        return self._coeffs.get(power, Fraction(0))

    def terms(self) -> Iterator[tuple[int, Fraction]]:
        """(power, coefficient) pairs in increasing power order."""
        return iter(sorted(self._coeffs.items()))

    def __add__(self, other: "LPolynomial") -> "LPolynomial":
        merged = dict(self._coeffs)
        for power, value in other._coeffs.items():
            merged[power] = merged.get(power, Fraction(0)) + value
        return LPolynomial(merged)

    def __sub__(self, other: "LPolynomial") -> "LPolynomial":
        merged = dict(self._coeffs)
        for power, value in other._coeffs.items():
            merged[power] = merged.get(power, Fraction(0)) - value
        return LPolynomial(merged)

    def scale(self, factor: Fraction | int) -> "LPolynomial":
        factor = Fraction(factor)
        return LPolynomial({p: factor * v for p, v in self._coeffs.items()})

    def shift(self, offset: int) -> "LPolynomial":
        """Multiply by the symbol to the power ``offset`` (may be negative
        when every stored power stays non-negative)."""
        return LPolynomial({p + offset: v for p, v in self._coeffs.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LPolynomial):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return hash(frozenset(self._coeffs.items()))

    def __repr__(self) -> str:
        if not self._coeffs:
            return "LPolynomial(0)"
        parts = [
            f"{value}*Z^{power}" if power else str(value)
            for power, value in self.terms()
        ]
        return f"LPolynomial({' + '.join(parts)})"

    def to_jsonable(self) -> list[list]:
        """``[[power, "p/q"], ...]`` in increasing power order."""
        return [[power, str(value)] for power, value in self.terms()]


@dataclass(frozen=True)
class ReductionStep:
    """One drop of the reduction: ``side``'s polynomial S was split as
    ``S = matched_polynomial + remainder`` with
    ``matched_polynomial = dropped_factor * (T / Z)`` for the other side T,
    discarding the non-positive term ``dropped_factor * <v, Z v>``."""

    side: str  # "left" or "right"
    dropped_factor: Fraction
    matched_polynomial: LPolynomial
    remainder: LPolynomial


@dataclass(frozen=True)
class ReductionTrace:
    steps: tuple[ReductionStep, ...] = ()

    def to_jsonable(self) -> list[dict]:
        return [
            {
                "side": s.side,
                "dropped_factor": str(s.dropped_factor),
                "matched_polynomial": s.matched_polynomial.to_jsonable(),
                "remainder": s.remainder.to_jsonable(),
            }
            for s in self.steps
        ]


@dataclass(frozen=True)
class ReductionResult:
    """Reduced pair with equal lowest orders (or a zero side), plus its trace."""

    left: LPolynomial
    right: LPolynomial
    trace: ReductionTrace


@dataclass(frozen=True)
class CrossForm:
    """Symmetric quadratic form ``sum_{i<=j} c_ij <Z^i u, Z^j u>``.

    Entries are stored with ``i <= j`` only; the (i, j) coefficient already
    accumulates both orderings of a cross product.
    """

    entries: dict[tuple[int, int], Fraction]

    def __post_init__(self) -> None:
        for (i, j), value in self.entries.items():
            if i > j:
                raise ValueError(f"entry ({i}, {j}) violates i <= j storage")
            if value == 0:
                raise ValueError(f"stored zero coefficient at ({i}, {j})")

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def to_jsonable(self) -> list[list]:
        return [
            [i, j, str(c)] for (i, j), c in sorted(self.entries.items())
        ]


@dataclass(frozen=True)
class RootInterval:
    """Isolated smallest positive root, with exact rational endpoints.

    ``lo == hi`` when a bisection probe hit the root exactly; otherwise the
    bound polynomial is negative at ``lo`` and positive at ``hi``. The
    certified time-step bound is ``lo`` (always on the stable side).
    """

    lo: Fraction
    hi: Fraction

    @property
    def approx(self) -> float:
        return float((self.lo + self.hi) / 2)

    def to_jsonable(self) -> dict:
        return {"lo": str(self.lo), "hi": str(self.hi), "approx": self.approx}


@dataclass(frozen=True)
class CertBound:
    """A certified strong-stability bound.

    For every bounded operator with ``<u, Lu> <= 0`` (skew-symmetric L in skew
    mode) and every ``dt * ||L|| <= root.lo``, one step satisfies
    ``||u+|| <= ||u||``.

    Fields
    ------
    anchor_order : int
        Order k of the anchoring ``c_kk ||Z^k u||^2`` term (c_kk < 0).
    bound_poly : tuple of Fraction
        Constant-first coefficients of the bound polynomial in
        ``x = dt * ||L||``; the constant term is ``c_kk`` and is strictly
        negative, every other coefficient is non-negative.
    retained_negatives : dict int -> Fraction
        Off-anchor diagonal entries with negative coefficients — slack that
        was discarded rather than spent, recorded for reproducibility.
    root : RootInterval
    trace : ReductionTrace
    """

    anchor_order: int
    bound_poly: tuple[Fraction, ...]
    retained_negatives: dict[int, Fraction]
    root: RootInterval
    trace: ReductionTrace = ReductionTrace()
    method: str | None = None
    mode: str = "general"

    def to_jsonable(self) -> dict:
        return {
            "result": "certified",
            "method": self.method,
            "mode": self.mode,
            "anchor_order": self.anchor_order,
            "bound_poly": [str(c) for c in self.bound_poly],
            "retained_negatives": {
                str(order): str(c)
                for order, c in sorted(self.retained_negatives.items())
            },
            "root": self.root.to_jsonable(),
            "trace": self.trace.to_jsonable(),
        }


@dataclass(frozen=True)
class CertFailure:
    """A classified failure of the energy estimate (not an exception).

    ``reason`` is one of NON_POSITIVE_MATCH_COEFFICIENT, ORDER_GAP_EXCEEDS_ONE,
    NO_NEGATIVE_ANCHOR; ``state_at_failure`` is the polynomial pair at the
    moment the precondition broke (None only when a bare cross form was
    bounded without pair context). A failure means this estimate cannot
    certify the method — it is not a proof of instability.
    """

    reason: str
    state_at_failure: tuple[LPolynomial, LPolynomial] | None
    trace: ReductionTrace = ReductionTrace()
    method: str | None = None
    mode: str = "general"

    def to_jsonable(self) -> dict:
        state = None
        if self.state_at_failure is not None:
            state = [p.to_jsonable() for p in self.state_at_failure]
        return {
            "result": "failure",
            "method": self.method,
            "mode": self.mode,
            "reason": self.reason,
            "state_at_failure": state,
            "trace": self.trace.to_jsonable(),
        }


CertOutcome = Union[CertBound, CertFailure]


def energy_pair(P: StabilityPolynomial) -> tuple[LPolynomial, LPolynomial]:
    """The pair (P - 1, P + 1) whose scalar product is the energy change.

    Raises
    ------
    Inconsistent
        If P(0) != 1 (the method would not reproduce constants).
    """
    if not P.coeffs or P.coeffs[0] != 1:
        constant = P.coeffs[0] if P.coeffs else "nothing"
        raise Inconsistent(f"stability polynomial has P(0) = {constant}, expected 1")
    base = {k: c for k, c in enumerate(P.coeffs)}
    left = dict(base)
    left[0] = left[0] - 1
    right = dict(base)
    right[0] = right[0] + 1
    return LPolynomial(left), LPolynomial(right)


def idea1_reduce(
    left: LPolynomial, right: LPolynomial
) -> ReductionResult | CertFailure:
    """Reduce the pair by dropping matched non-positive terms.

    While the two sides have different lowest orders, split the lower-order
    side S (order l) against the higher-order side T (order h): require
    ``h - l == 1`` and a strictly positive match coefficient
    ``c = S[l] / T[h]``; then ``S = c*(T/Z) + R`` and the matched part's
    contribution ``c <(T/Z) u, T u> = c <v, Z v>`` is dropped. The remainder R
    (strictly higher order) replaces S. Stops when the orders agree or one
    side becomes zero.

    Returns a :class:`ReductionResult` on success, a :class:`CertFailure`
    (OrderGapExceedsOne or NonPositiveMatchCoefficient) otherwise.
    """
    steps: list[ReductionStep] = []
    max_steps = 0
    if left:
        max_steps += left.degree
    if right:
        max_steps += right.degree
    while left and right and left.ord != right.ord:
        if len(steps) > max_steps:  # pragma: no cover - guarded invariant
            raise RuntimeError("reduction failed to make progress")
        if left.ord < right.ord:
            side, low, high = "left", left, right
        else:
            side, low, high = "right", right, left
        l, h = low.ord, high.ord
        if h - l != 1:
            return CertFailure(
                reason=ORDER_GAP_EXCEEDS_ONE,
                state_at_failure=(left, right),
                trace=ReductionTrace(tuple(steps)),
            )
        c = low[l] / high[h]
        if c <= 0:
            return CertFailure(
                reason=NON_POSITIVE_MATCH_COEFFICIENT,
                state_at_failure=(left, right),
                trace=ReductionTrace(tuple(steps)),
            )
        matched = high.shift(-1).scale(c)
        remainder = low - matched
        if remainder and remainder.ord <= l:  # pragma: no cover
            raise RuntimeError("reduction failed to make progress")
        steps.append(
            ReductionStep(
                side=side,
                dropped_factor=c,
                matched_polynomial=matched,
                remainder=remainder,
            )
        )
        if side == "left":
            left = remainder
        else:
            right = remainder
    return ReductionResult(left=left, right=right, trace=ReductionTrace(tuple(steps)))


def expand_cross(left: LPolynomial, right: LPolynomial) -> CrossForm:
    """Expand ``<left(Z) u, right(Z) u>`` into a symmetric quadratic form."""
    entries: dict[tuple[int, int], Fraction] = {}
    for i, ci in left.terms():
        for j, cj in right.terms():
            key = (i, j) if i <= j else (j, i)
            entries[key] = entries.get(key, Fraction(0)) + ci * cj
    return CrossForm({k: v for k, v in entries.items() if v != 0})


def drop_adjacent_positive(f: CrossForm) -> CrossForm:
    """Remove entries (i, i+1) with positive coefficients.

    Each such term equals ``c <v, Z v>`` with ``v = Z^i u`` and c > 0, hence is
    non-positive by semiboundedness and can only help; every other entry is
    kept untouched.
    """
    return CrossForm(
        {
            (i, j): c
            for (i, j), c in f.entries.items()
            if not (j == i + 1 and c > 0)
        }
    )


def _evaluate(coeffs: tuple[Fraction, ...], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def isolate_positive_root(
    coeffs: tuple[Fraction, ...], tol: Fraction | float = Fraction(1, 10 ** 6)
) -> RootInterval:
    """Smallest positive root of a polynomial with negative constant term.

    All sign decisions use exact rational arithmetic. The initial bracket
    doubles from 1 until the polynomial turns positive; if that never happens
    below 2**64 the estimate imposes no restriction and :class:`NoSignChange`
    is raised. Bisection then narrows the bracket to width ``tol``; any probe
    that hits the root exactly collapses the interval to a point.

    For bound polynomials from :func:`cauchy_schwarz_bound` (non-negative
    non-constant coefficients) the value is increasing wherever positive, so
    the first sign change brackets the *smallest* positive root.
    """
    tol = Fraction(tol)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if _evaluate(coeffs, Fraction(0)) >= 0:
        raise ValueError("expected a strictly negative constant term")
    hi = Fraction(1)
    lo = Fraction(0)
    while True:
        value = _evaluate(coeffs, hi)
        if value == 0:
            return RootInterval(lo=hi, hi=hi)
        if value > 0:
            break
        lo = hi
        hi *= 2
        if hi > _ROOT_CEILING:
            raise NoSignChange(
                "no positive root below 2**64: "
                "unconditionally stable under this estimate"
            )
    while hi - lo > tol:
        mid = (lo + hi) / 2
        value = _evaluate(coeffs, mid)
        if value == 0:
            return RootInterval(lo=mid, hi=mid)
        if value < 0:
            lo = mid
        else:
            hi = mid
    return RootInterval(lo=lo, hi=hi)


def cauchy_schwarz_bound(
    f: CrossForm,
    mode: str = "general",
    tol: Fraction | float = Fraction(1, 10 ** 6),
    trace: ReductionTrace = ReductionTrace(),
    state: tuple[LPolynomial, LPolynomial] | None = None,
) -> CertOutcome:
    """Bound a cross form against its anchor term and isolate the CFL root.

    Let k be the smallest order in the form; ``c_kk`` must be negative (else
    :class:`CertFailure` with NoNegativeAnchor). In skew mode every entry with
    odd ``i + j`` is deleted first (those scalar products vanish identically
    for skew-symmetric operators). Off-anchor diagonal entries with negative
    coefficients are recorded as retained slack and discarded; every other
    entry contributes ``|c| * x^(i+j-2k)`` via Cauchy-Schwarz with
    ``||Z^i u|| <= ||L||^(i-k) ||Z^k u||``. The certificate root is the
    smallest positive root of the bound polynomial.

    Raises
    ------
    NoSignChange
        If the bound polynomial never turns positive below 2**64, or the form
        vanishes entirely (both mean: no restriction from this estimate).
    """
    if mode not in ("general", "skew"):
        raise ValueError(f"unknown mode {mode!r}")
    entries = dict(f.entries)
    if mode == "skew":
        entries = {key: c for key, c in entries.items() if (key[0] + key[1]) % 2 == 0}
    if not entries:
        raise NoSignChange(
            "energy difference vanishes identically; "
            "unconditionally stable under this estimate"
        )
    anchor = min(i for i, _ in entries)
    anchor_coeff = entries.get((anchor, anchor), Fraction(0))
    if anchor_coeff >= 0:
        return CertFailure(
            reason=NO_NEGATIVE_ANCHOR,
            state_at_failure=state,
            trace=trace,
            mode=mode,
        )
    retained: dict[int, Fraction] = {}
    poly: dict[int, Fraction] = {0: anchor_coeff}
    for (i, j), c in entries.items():
        if (i, j) == (anchor, anchor):
            continue
        if i == j and c < 0:
            retained[i] = c
            continue
        power = i + j - 2 * anchor
        poly[power] = poly.get(power, Fraction(0)) + abs(c)
    degree = max(poly)
    bound_poly = tuple(poly.get(k, Fraction(0)) for k in range(degree + 1))
    root = isolate_positive_root(bound_poly, tol)
    return CertBound(
        anchor_order=anchor,
        bound_poly=bound_poly,
        retained_negatives=retained,
        root=root,
        trace=trace,
        mode=mode,
    )


def certify(
    P: StabilityPolynomial,
    mode: str = "general",
    tol: Fraction | float = Fraction(1, 10 ** 6),
    method: str | None = None,
) -> CertOutcome:
    """Full pipeline: energy pair -> reduction -> cross form -> CFL root.

    On success: for every bounded semibounded L (skew-symmetric in skew mode)
    and ``dt * ||L|| <= root.lo``, one step ``u+ = P(dt L) u`` satisfies
    ``||u+|| <= ||u||``. On failure the returned :class:`CertFailure` carries
    the classified reason, the polynomial pair at failure, and the reduction
    trace up to that point.
    """
    left, right = energy_pair(P)
    reduced = idea1_reduce(left, right)
    if isinstance(reduced, CertFailure):
        return replace(reduced, method=method, mode=mode)
    form = drop_adjacent_positive(expand_cross(reduced.left, reduced.right))
    outcome = cauchy_schwarz_bound(
        form,
        mode=mode,
        tol=tol,
        trace=reduced.trace,
        state=(reduced.left, reduced.right),
    )
    return replace(outcome, method=method)


def compose_polynomial(P: StabilityPolynomial, n: int) -> StabilityPolynomial:
    """Exact n-th power of P — the stability polynomial of n composed steps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    result = [Fraction(1)]
    for _ in range(n):
        new = [Fraction(0)] * (len(result) + len(P.coeffs) - 1)
        for i, a in enumerate(result):
            if a == 0:
                continue
            for j, b in enumerate(P.coeffs):
                new[i + j] += a * b
        result = new
    return StabilityPolynomial(tuple(result))


def rk4_family_report(
    a5: Fraction | int | str,
    a6: Fraction | int | str,
    mode: str = "general",
    tol: Fraction | float = Fraction(1, 10 ** 6),
) -> CertOutcome:
    """Certify the six-coefficient fourth-order family
    ``1 + z + z^2/2 + z^3/6 + z^4/24 + a5 z^5 + a6 z^6``.

    With ``a5 = a6 = 0`` this is the classic four-stage polynomial, whose
    reduction fails (the critical remainder constant ``288 a5 - 2`` is
    negative, making the required match coefficient non-positive); suitable
    positive coefficients — e.g. the ten-stage method's 17/2160 and 7/6480 —
    certify with a positive root.
    """
    a5 = Fraction(a5)
    a6 = Fraction(a6)
    coeffs = [
        Fraction(1),
        Fraction(1),
        Fraction(1, 2),
        Fraction(1, 6),
        Fraction(1, 24),
        a5,
        a6,
    ]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    P = StabilityPolynomial(tuple(coeffs))
    return certify(P, mode=mode, tol=tol, method=f"rk4family:{a5},{a6}")
