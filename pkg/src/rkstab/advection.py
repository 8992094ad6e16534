"""Modal discontinuous-Galerkin semidiscretization of 1D periodic advection.

The spatial operator built here is the workhorse behind every PDE experiment
in the package: ``du/dt = L u`` with ``u`` stored as Legendre modal
coefficients, one row per element.  The scheme is nodal DG on
Legendre-Gauss-Lobatto points in strong form with an upwind numerical flux,
then converted to modal form, which makes the mass matrix exactly diagonal:

    ||phi_n||^2 = (dx/2) * 2/(2n+1)   per element.

Two structural facts carry all later stability results and are enforced by
the test suite rather than assumed:

* conservation -- interface fluxes telescope around the periodic mesh, so the
  domain integral of ``rhs(u)`` vanishes;
* semiboundedness -- upwind coupling is dissipative, ``<u, L u>_M <= 0``.

The hot evaluation path is delegated to :mod:`rkstab.kernels`, which selects
a compiled extension when available and a NumPy fallback otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict

import numpy as np
from numpy.polynomial import legendre as npleg

from . import kernels
from .errors import DimensionMismatch, InvalidDegree, NoConvergence

__all__ = [
    "Mesh1D",
    "MassNorm",
    "Semidiscretization",
    "build_semidiscretization",
    "lobatto_nodes",
    "modal_differentiation_matrix",
    "project_initial",
    "m_inner",
    "m_norm",
    "evaluate_state",
    "sample_uniform",
    "operator_norm",
    "modal_csv",
    "sampled_csv",
    "INITIAL_CONDITIONS",
]


@dataclass(frozen=True)
class Mesh1D:
    """Uniform periodic mesh on ``[x_left, x_right]`` with ``n_elements`` cells."""

    x_left: float
    x_right: float
    n_elements: int

    def __post_init__(self) -> None:
        if self.n_elements < 1:
            raise ValueError("mesh needs at least one element")
        if not self.x_right > self.x_left:
            raise ValueError("x_right must exceed x_left")

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_elements

    def element_left(self, e: int) -> float:
        return self.x_left + (e % self.n_elements) * self.dx


@dataclass(frozen=True)
class MassNorm:
    """Diagonal modal mass weights ||phi_n||^2 = dx/(2n+1), shared by all elements."""

    weights: np.ndarray

    @staticmethod
    def for_degree(p: int, dx: float) -> "MassNorm":
        n = np.arange(p + 1)
        return MassNorm((dx / 2.0) * 2.0 / (2.0 * n + 1.0))


def lobatto_nodes(p: int) -> np.ndarray:
    """Legendre-Gauss-Lobatto points, ``p + 1`` of them on ``[-1, 1]``.

    The interior points are the roots of P_p'; the degenerate ``p = 0`` case
    uses the single midpoint.
    """
    if p < 0:
        raise InvalidDegree(f"polynomial degree must be >= 0, got {p}")
    if p == 0:
        return np.array([0.0])
    coeffs = np.zeros(p + 1)
    coeffs[p] = 1.0
    interior = npleg.legroots(npleg.legder(coeffs))
    return np.concatenate(([-1.0], np.sort(np.real(interior)), [1.0]))


def _gradient_vandermonde(nodes: np.ndarray, p: int) -> np.ndarray:
    grad = np.zeros((nodes.size, p + 1))
    for n in range(1, p + 1):
        coeffs = np.zeros(n + 1)
        coeffs[n] = 1.0
        grad[:, n] = npleg.legval(nodes, npleg.legder(coeffs))
    return grad


def modal_differentiation_matrix(p: int) -> np.ndarray:
    """Map modal coefficients of u to modal coefficients of du/dxi.

    Built from the Lobatto nodal differentiation matrix sandwiched between
    Vandermonde transforms; because the derivative of a degree-p polynomial
    is again in the space, the result is exact up to rounding.
    """
    nodes = lobatto_nodes(p)
    vander = npleg.legvander(nodes, p)
    return np.linalg.solve(vander, _gradient_vandermonde(nodes, p))


class Semidiscretization:
    """Upwind DG advection operator on a periodic mesh.

    Exposes the right-hand side as a fast function of the modal state, the
    dense matrix representation acting on flattened coefficients, and the
    modal mass weights that define the discrete norm.
    """

    def __init__(self, mesh: Mesh1D, p: int, velocity: float = 1.0):
        if p < 0:
            raise InvalidDegree(f"polynomial degree must be >= 0, got {p}")
        self.mesh = mesh
        self.degree = p
        self.velocity = float(velocity)
        self.mass = MassNorm.for_degree(p, mesh.dx)
        self.nodes = lobatto_nodes(p)

        n = np.arange(p + 1)
        speed = abs(self.velocity)
        diff = modal_differentiation_matrix(p)
        # Volume term: d/dt u_n += -v * (2/dx) * (D u)_n, laid out for
        # row-per-element states as U @ G.
        self._gmat = np.ascontiguousarray(-speed * (2.0 / mesh.dx) * diff.T)
        # Edge traces: P_n(-1) = (-1)^n and P_n(1) = 1.
        self._trace_left = np.ascontiguousarray((-1.0) ** n)
        self._trace_right = np.ones(p + 1)
        # Upwind lift of the left-face jump back onto the modes.
        self._lift = np.ascontiguousarray(
            speed * (2.0 * n + 1.0) / mesh.dx * (-1.0) ** n
        )

    def _mirror(self, u: np.ndarray) -> np.ndarray:
        # x -> -x on a periodic uniform mesh: reverse elements, flip odd modes.
        return u[::-1, :] * self._trace_left[np.newaxis, :]

    def rhs(self, u: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Time derivative of the modal state under upwind DG advection."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.mesh.n_elements, self.degree + 1):
            raise DimensionMismatch(
                f"state shape {u.shape} does not match mesh/degree "
                f"({self.mesh.n_elements}, {self.degree + 1})"
            )
        if self.velocity < 0:
            # Advection to the left is the mirror image of advection to the
            # right, and the mirror map is an isometry of the modal norm.
            result = self._mirror(
                kernels.advection_rhs(
                    np.ascontiguousarray(self._mirror(u)),
                    self._gmat,
                    self._trace_left,
                    self._trace_right,
                    self._lift,
                )
            )
            if out is not None:
                out[...] = result
                return out
            return result
        return kernels.advection_rhs(
            np.ascontiguousarray(u),
            self._gmat,
            self._trace_left,
            self._trace_right,
            self._lift,
            out=out,
        )

    @cached_property
    def operator_matrix(self) -> np.ndarray:
        """Dense matrix acting on flattened states, assembled column by column."""
        size = self.mesh.n_elements * (self.degree + 1)
        matrix = np.empty((size, size))
        unit = np.zeros(size)
        for col in range(size):
            unit[col] = 1.0
            matrix[:, col] = self.rhs(
                unit.reshape(self.mesh.n_elements, self.degree + 1)
            ).ravel()
            unit[col] = 0.0
        return matrix

    @property
    def flat_weights(self) -> np.ndarray:
        """Mass weights tiled over elements, matching the flattened layout."""
        return np.tile(self.mass.weights, self.mesh.n_elements)


def build_semidiscretization(
    mesh: Mesh1D, p: int, velocity: float = 1.0
) -> Semidiscretization:
    """Construct the upwind DG advection operator for the given mesh and degree."""
    return Semidiscretization(mesh, p, velocity)


def project_initial(
    f: Callable[[np.ndarray], np.ndarray], mesh: Mesh1D, p: int
) -> np.ndarray:
    """Element-wise L2 projection of ``f`` onto the modal basis.

    Uses Gauss-Legendre quadrature with ``p + 6`` points per element, exact
    for the polynomial factor and comfortably accurate for the smooth initial
    profiles used in the experiments:

        u_n = (2n+1)/2 * integral of f(x(xi)) P_n(xi) dxi.
    """
    if p < 0:
        raise InvalidDegree(f"polynomial degree must be >= 0, got {p}")
    points, weights = npleg.leggauss(p + 6)
    basis = npleg.legvander(points, p)
    scale = (2.0 * np.arange(p + 1) + 1.0) / 2.0
    coeffs = np.empty((mesh.n_elements, p + 1))
    half = mesh.dx / 2.0
    for e in range(mesh.n_elements):
        x = mesh.element_left(e) + half * (points + 1.0)
        fvals = np.asarray(f(x), dtype=float)
        coeffs[e] = scale * ((weights * fvals) @ basis)
    return coeffs


def m_inner(u: np.ndarray, v: np.ndarray, mass: MassNorm) -> float:
    """Discrete inner product <u, v>_M = sum over elements and modes of u v ||phi_n||^2."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"state shapes differ: {u.shape} vs {v.shape}")
    if u.ndim != 2 or u.shape[1] != mass.weights.size:
        raise DimensionMismatch(
            f"state shape {u.shape} does not match {mass.weights.size} modal weights"
        )
    return float(np.einsum("en,en,n->", u, v, mass.weights))


def m_norm(u: np.ndarray, mass: MassNorm) -> float:
    """Discrete norm ||u||_M."""
    return float(np.sqrt(max(m_inner(u, u, mass), 0.0)))


def evaluate_state(u: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate the modal expansion at reference points, one row per element."""
    u = np.asarray(u, dtype=float)
    basis = npleg.legvander(np.asarray(xi, dtype=float), u.shape[1] - 1)
    return u @ basis.T


def sample_uniform(
    u: np.ndarray, mesh: Mesh1D, points_per_element: int = 20
) -> tuple[np.ndarray, np.ndarray]:
    """Sample the reconstruction at uniform points inside every element.

    Returns flat arrays of physical coordinates and solution values, ordered
    element by element.
    """
    xi = np.linspace(-1.0, 1.0, points_per_element)
    values = evaluate_state(u, xi)
    half = mesh.dx / 2.0
    lefts = mesh.x_left + np.arange(mesh.n_elements) * mesh.dx
    x = lefts[:, np.newaxis] + half * (xi[np.newaxis, :] + 1.0)
    return x.ravel(), values.ravel()


def operator_norm(
    matrix: np.ndarray,
    weights: np.ndarray | MassNorm | None = None,
    rtol: float = 1e-10,
    max_iterations: int = 10**5,
    seed: int = 0,
) -> float:
    """Operator norm in the weighted norm via power iteration.

    For a diagonal mass matrix M = diag(w) the norm equals the largest
    singular value of S = M^{1/2} A M^{-1/2}; the iteration runs on the
    symmetrized product S^T S and stops when successive Rayleigh quotients
    agree to ``rtol`` relative accuracy.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"operator matrix must be square, got {matrix.shape}")
    size = matrix.shape[0]
    if weights is None:
        w = np.ones(size)
    elif isinstance(weights, MassNorm):
        if size % weights.weights.size:
            raise DimensionMismatch(
                f"matrix size {size} is not a multiple of {weights.weights.size} weights"
            )
        w = np.tile(weights.weights, size // weights.weights.size)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (size,):
            raise DimensionMismatch(
                f"weight vector shape {w.shape} does not match matrix size {size}"
            )
    if np.any(w <= 0):
        raise ValueError("mass weights must be strictly positive")

    root = np.sqrt(w)
    symmetrized = matrix * root[:, np.newaxis] / root[np.newaxis, :]
    gram = symmetrized.T @ symmetrized

    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(size)
    vec /= np.linalg.norm(vec)
    previous = None
    for _ in range(max_iterations):
        image = gram @ vec
        rayleigh = float(vec @ image)
        magnitude = np.linalg.norm(image)
        if magnitude == 0.0:
            return 0.0
        vec = image / magnitude
        if previous is not None and abs(rayleigh - previous) <= rtol * abs(rayleigh):
            return float(np.sqrt(max(rayleigh, 0.0)))
        previous = rayleigh
    raise NoConvergence(
        f"power iteration did not converge within {max_iterations} iterations"
    )


# ---------------------------------------------------------------------------
# Initial profiles used by the experiments


def gaussian_profile(x: np.ndarray) -> np.ndarray:
    """Smooth bump exp(-20 x^2)."""
    return np.exp(-20.0 * np.asarray(x, dtype=float) ** 2)


def box_profile(x: np.ndarray) -> np.ndarray:
    """Indicator of [-1/4, 1/4]."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= 0.25, 1.0, 0.0)


def sine_profile(x: np.ndarray) -> np.ndarray:
    """sin(pi x), periodic on [-1, 1]."""
    return np.sin(np.pi * np.asarray(x, dtype=float))


INITIAL_CONDITIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "gaussian": gaussian_profile,
    "box": box_profile,
    "sine": sine_profile,
}


# ---------------------------------------------------------------------------
# CSV export


def modal_csv(u: np.ndarray) -> str:
    """Modal coefficients as CSV rows (element, mode, coefficient)."""
    lines = ["element,mode,coefficient"]
    u = np.asarray(u, dtype=float)
    for e in range(u.shape[0]):
        for n in range(u.shape[1]):
            lines.append(f"{e},{n},{float(u[e, n])!r}")
    return "\n".join(lines) + "\n"


def sampled_csv(u: np.ndarray, mesh: Mesh1D, points_per_element: int = 20) -> str:
    """Reconstructed solution as CSV rows (x, u), 20 points per element."""
    x, values = sample_uniform(u, mesh, points_per_element)
    lines = ["x,u"]
    for xi, ui in zip(x, values):
        lines.append(f"{float(xi)!r},{float(ui)!r}")
    return "\n".join(lines) + "\n"
