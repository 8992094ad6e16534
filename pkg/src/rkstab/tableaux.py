"""Exact-rational Butcher tableaux and their linear-stability algebra.

Everything in this module is exact: tableau entries, stability-polynomial
coefficients, and the quadratic-invariant defect matrix are
:class:`fractions.Fraction` values, so downstream certification can work in
rational arithmetic with no rounding anywhere.

The defect matrix E with entries ``E_ij = b_i b_j - b_i a_ij - b_j a_ji``
measures how far a method is from conserving quadratic invariants: one step
applied to ``du/dt = L u`` changes the squared norm by

    ||u+||^2 - ||u0||^2 = 2*dt * sum_i b_i <u_i, k_i>  +  dt^2 * sum_ij E_ij <k_i, k_j>

with stage values ``u_i`` and stage slopes ``k_i``. The first term is
non-positive for semibounded L; the second ("defect") term has no fixed sign
for explicit methods and is what adaptive filtering must absorb.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .errors import DimensionMismatch, NotExplicit, ZeroParameter

__all__ = [
    "ButcherTableau",
    "StabilityPolynomial",
    "DefectMatrix",
    "BUILTIN_TABLEAUX",
    "builtin_tableau",
    "stability_polynomial",
    "linear_order",
    "defect_matrix",
    "explicit_error_term",
    "rk2_family",
    "rk2_mean_objective",
    "rk2_minimax_objective",
    "optimize_rk2_mean",
    "optimize_rk2_minimax",
    "tableau_to_json",
    "tableau_from_json",
]

RationalLike = Fraction | int | str


def _frac(x: RationalLike) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class ButcherTableau:
    """An s-stage Runge-Kutta method with exact rational coefficients.

    Parameters
    ----------
    name : str
        Human-readable label, also used by the CLI.
    A : tuple of tuple of Fraction
        The s-by-s stage coefficient matrix.
    b : tuple of Fraction
        Quadrature weights.
    c : tuple of Fraction
        Abscissae; ``c_i = sum_j a_ij`` is checked on construction.
    """

    name: str
    A: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        s = len(self.b)
        if len(self.A) != s or any(len(row) != s for row in self.A):
            raise DimensionMismatch(
                f"tableau {self.name!r}: A must be {s}x{s} to match b"
            )
        if len(self.c) != s:
            raise DimensionMismatch(
                f"tableau {self.name!r}: c has length {len(self.c)}, expected {s}"
            )
        for i, row in enumerate(self.A):
            if sum(row, Fraction(0)) != self.c[i]:
                raise ValueError(
                    f"tableau {self.name!r}: row {i} of A sums to {sum(row)}, "
                    f"but c[{i}] = {self.c[i]}"
                )

    @property
    def s(self) -> int:
        """Stage count."""
        return len(self.b)

    @property
    def is_explicit(self) -> bool:
        """True iff ``a_ij = 0`` for all ``j >= i`` (strictly lower-triangular A)."""
        return all(
            self.A[i][j] == 0 for i in range(self.s) for j in range(i, self.s)
        )


@dataclass(frozen=True)
class StabilityPolynomial:
    """P(z) with exact rational coefficients, ``coeffs[k]`` the z^k coefficient."""

    coeffs: tuple[Fraction, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z: complex | float | Fraction) -> complex | float | Fraction:
        """Evaluate P(z) by Horner's rule (exact when z is a Fraction)."""
        acc: complex | float | Fraction = self.coeffs[-1] if self.coeffs else 0
        for ck in reversed(self.coeffs[:-1]):
            acc = acc * z + ck
        return acc


@dataclass(frozen=True)
class DefectMatrix:
    """Symmetric matrix ``E_ij = b_i b_j - b_i a_ij - b_j a_ji`` (exact)."""

    E: tuple[tuple[Fraction, ...], ...]


def _tableau(name: str, A, b, c) -> ButcherTableau:
    to_row = lambda row: tuple(_frac(x) for x in row)
    return ButcherTableau(
        name=name,
        A=tuple(to_row(row) for row in A),
        b=to_row(b),
        c=to_row(c),
    )


def _ssprk104_matrix() -> list[list[Fraction]]:
    # Rows 1..4 accumulate 1/6 steps; rows 5..9 start from five 1/15 entries
    # and continue with 1/6 (the low-storage five-stage block structure).
    A = [[Fraction(0)] * 10 for _ in range(10)]
    for i in range(1, 5):
        for j in range(i):
            A[i][j] = Fraction(1, 6)
    for i in range(5, 10):
        for j in range(i):
            A[i][j] = Fraction(1, 15) if j < 5 else Fraction(1, 6)
    return A


_F = Fraction

BUILTIN_TABLEAUX: dict[str, ButcherTableau] = {
    "explicit_euler": _tableau("explicit_euler", [[0]], [1], [0]),
    "implicit_euler": _tableau("implicit_euler", [[1]], [1], [1]),
    "ssprk22": _tableau(
        "ssprk22", [[0, 0], [1, 0]], [_F(1, 2), _F(1, 2)], [0, 1]
    ),
    "ssprk33": _tableau(
        "ssprk33",
        [[0, 0, 0], [1, 0, 0], [_F(1, 4), _F(1, 4), 0]],
        [_F(1, 6), _F(1, 6), _F(2, 3)],
        [0, 1, _F(1, 2)],
    ),
    "ssprk104": _tableau(
        "ssprk104",
        _ssprk104_matrix(),
        [_F(1, 10)] * 10,
        [
            0, _F(1, 6), _F(1, 3), _F(1, 2), _F(2, 3),
            _F(1, 3), _F(1, 2), _F(2, 3), _F(5, 6), 1,
        ],
    ),
    "rk44_classic": _tableau(
        "rk44_classic",
        [
            [0, 0, 0, 0],
            [_F(1, 2), 0, 0, 0],
            [0, _F(1, 2), 0, 0],
            [0, 0, 1, 0],
        ],
        [_F(1, 6), _F(1, 3), _F(1, 3), _F(1, 6)],
        [0, _F(1, 2), _F(1, 2), 1],
    ),
    "gauss_midpoint": _tableau("gauss_midpoint", [[_F(1, 2)]], [1], [_F(1, 2)]),
}


def builtin_tableau(name: str) -> ButcherTableau:
    """Return a shipped tableau by name.

    Available: explicit_euler, implicit_euler, ssprk22, ssprk33, ssprk104,
    rk44_classic, gauss_midpoint.
    """
    try:
        return BUILTIN_TABLEAUX[name]
    except KeyError:
        raise ValueError(
            f"unknown tableau {name!r}; available: {sorted(BUILTIN_TABLEAUX)}"
        ) from None


def stability_polynomial(t: ButcherTableau) -> StabilityPolynomial:
    """Exact stability polynomial of an explicit method.

    For explicit methods one step on ``du/dt = L u`` is ``u+ = P(dt*L) u`` with
    ``P(z) = 1 + sum_k (b^T A^(k-1) 1) z^k``. Implicit methods have rational
    (non-polynomial) stability functions and are rejected.

    Raises
    ------
    NotExplicit
        If the tableau has any nonzero entry on or above the diagonal of A.
    """
    if not t.is_explicit:
        raise NotExplicit(
            f"tableau {t.name!r} is implicit; stability polynomials are defined "
            "here for explicit methods only"
        )
    s = t.s
    coeffs = [Fraction(1)]
    # v starts as the all-ones vector; after k-1 multiplications by A it holds
    # A^(k-1) 1, so b . v is the z^k coefficient.
    v = [Fraction(1)] * s
    for _ in range(s):
        coeffs.append(sum((bi * vi for bi, vi in zip(t.b, v)), Fraction(0)))
        v = [
            sum((t.A[i][j] * v[j] for j in range(s)), Fraction(0))
            for i in range(s)
        ]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return StabilityPolynomial(tuple(coeffs))


def linear_order(p: StabilityPolynomial) -> int:
    """Largest q such that ``coeffs[k] = 1/k!`` for every k <= q.

    Coefficients beyond the polynomial degree count as zero, so the order of
    ``1 + z`` is 1. Returns -1 if even the constant term differs from 1
    (an inconsistent polynomial).
    """
    if not p.coeffs:
        raise ValueError("empty stability polynomial")
    order = -1
    factorial = Fraction(1)
    k = 0
    while True:
        ck = p.coeffs[k] if k <= p.degree else Fraction(0)
        if ck != 1 / factorial:
            return order
        order = k
        k += 1
        factorial *= k


def defect_matrix(t: ButcherTableau) -> DefectMatrix:
    """Exact quadratic-invariant defect ``E_ij = b_i b_j - b_i a_ij - b_j a_ji``.

    E vanishes identically exactly for methods that conserve quadratic
    invariants (e.g. the implicit Gauss methods).
    """
    s = t.s
    E = tuple(
        tuple(
            t.b[i] * t.b[j] - t.b[i] * t.A[i][j] - t.b[j] * t.A[j][i]
            for j in range(s)
        )
        for i in range(s)
    )
    return DefectMatrix(E)


def explicit_error_term(
    t: ButcherTableau,
    slopes: Sequence,
    ip: Callable,
) -> float | Fraction:
    """The dt^2 energy defect of an explicit step (without the dt^2 factor).

    Evaluates ``sum_i b_i^2 ||k_i||^2 + 2 sum_{i>j} b_i (b_j - a_ij) <k_i, k_j>``
    for the given stage slopes under the inner product ``ip``. This is the
    explicit-method specialization of the full defect quadratic form
    ``sum_ij E_ij <k_i, k_j>`` and agrees with it exactly.

    The arithmetic is generic: exact inputs (Fraction slopes with an exact
    ``ip``) give an exact result; float inputs give floats.

    Raises
    ------
    NotExplicit
        If the tableau is not explicit.
    DimensionMismatch
        If the number of slopes differs from the stage count.
    """
    if not t.is_explicit:
        raise NotExplicit(f"tableau {t.name!r} is implicit")
    if len(slopes) != t.s:
        raise DimensionMismatch(
            f"expected {t.s} stage slopes, got {len(slopes)}"
        )
    total = sum(
        (t.b[i] * t.b[i] * ip(slopes[i], slopes[i]) for i in range(t.s)),
        start=Fraction(0),
    )
    for i in range(t.s):
        for j in range(i):
            total = total + 2 * t.b[i] * (t.b[j] - t.A[i][j]) * ip(
                slopes[i], slopes[j]
            )
    return total


def rk2_family(b2: RationalLike) -> ButcherTableau:
    """The one-parameter family of two-stage second-order explicit methods.

    ``b = (1 - b2, b2)`` and ``a21 = 1/(2 b2)``; every member has stability
    polynomial ``1 + z + z^2/2``.

    Raises
    ------
    ZeroParameter
        If b2 = 0 (a21 is undefined there).
    """
    b2 = _frac(b2)
    if b2 == 0:
        raise ZeroParameter("rk2_family requires b2 != 0")
    a21 = 1 / (2 * b2)
    return _tableau(
        f"rk2_family(b2={b2})",
        [[0, 0], [a21, 0]],
        [1 - b2, b2],
        [0, a21],
    )


def rk2_mean_objective(b2: RationalLike) -> Fraction:
    """Mean-square error-term objective ``(1 - b2)^2 + b2^2`` (exact)."""
    b2 = _frac(b2)
    return (1 - b2) ** 2 + b2 ** 2


def rk2_minimax_objective(b2: RationalLike) -> Fraction:
    """Worst-case error-term objective, evaluated by corner enumeration.

    For slopes normalized to the box (x, y) in [-1, 1]^2 the defect form is
    ``q(x, y) = b1^2 x^2 + b2^2 y^2 + 2 b2 (b1 - a21) x y``. Both diagonal
    coefficients are squares, so q is convex in each variable separately and
    its maximum over the box is attained at a corner; enumerating the four
    corners is therefore an exact oracle for the inner maximization.
    """
    b2 = _frac(b2)
    if b2 == 0:
        raise ZeroParameter("rk2 minimax objective requires b2 != 0")
    b1 = 1 - b2
    a21 = 1 / (2 * b2)
    corners = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    return max(
        b1 * b1 * x * x + b2 * b2 * y * y + 2 * b2 * (b1 - a21) * x * y
        for x, y in corners
    )


_SCAN_LO = Fraction(1, 10)
_SCAN_HI = Fraction(2)
_SCAN_STEP = Fraction(1, 1000)


def _scan_minimum(objective: Callable[[Fraction], Fraction]) -> Fraction:
    """Exact grid scan of ``objective`` over b2 in [1/10, 2], step 1/1000."""
    best_b2 = _SCAN_LO
    best_val = objective(_SCAN_LO)
    b2 = _SCAN_LO + _SCAN_STEP
    while b2 <= _SCAN_HI:
        val = objective(b2)
        if val < best_val:
            best_b2, best_val = b2, val
        b2 += _SCAN_STEP
    return best_b2


def optimize_rk2_mean() -> Fraction:
    """Argmin of the mean objective; closed form confirmed by the grid scan.

    The objective ``(1 - b2)^2 + b2^2 = 2 (b2 - 1/2)^2 + 1/2`` has the unique
    minimizer 1/2. A grid scan over [1/10, 2] at step 1/1000 must agree.
    """
    closed_form = Fraction(1, 2)
    scanned = _scan_minimum(rk2_mean_objective)
    if scanned != closed_form:
        raise AssertionError(
            f"grid scan found {scanned}, closed form says {closed_form}"
        )
    return closed_form


def optimize_rk2_minimax() -> Fraction:
    """Argmin of the worst-case objective; corner oracle + grid scan.

    From the corner values ((1,1) and (-1,-1) give ``(b1 + b2)^2 - 1 = 0``
    since ``2 b2 a21 = 1``; the mixed corners give ``(b1 - b2)^2 + 1``), the
    inner max equals ``(1 - 2 b2)^2 + 1``, minimized at b2 = 1/2 — the same
    optimum as the mean objective.
    """
    closed_form = Fraction(1, 2)
    scanned = _scan_minimum(rk2_minimax_objective)
    if scanned != closed_form:
        raise AssertionError(
            f"grid scan found {scanned}, closed form says {closed_form}"
        )
    return closed_form


def tableau_to_json(t: ButcherTableau) -> str:
    """Serialize a tableau to JSON with exact "p/q" strings."""
    doc = {
        "name": t.name,
        "s": t.s,
        "A": [[str(x) for x in row] for row in t.A],
        "b": [str(x) for x in t.b],
        "c": [str(x) for x in t.c],
    }
    return json.dumps(doc, indent=2)


def tableau_from_json(text: str) -> ButcherTableau:
    """Inverse of :func:`tableau_to_json` (exact round trip)."""
    doc = json.loads(text)
    return _tableau(doc["name"], doc["A"], doc["b"], doc["c"])
