"""rkstab: energy-stable explicit Runge-Kutta time stepping.

The package has four layers:

- :mod:`rkstab.tableaux` — exact-rational Butcher tableaux, stability
  polynomials, and the quadratic-invariant defect algebra;
- :mod:`rkstab.certify` — an exact-arithmetic pipeline that turns a stability
  polynomial into a certified strong-stability time-step bound (or a precisely
  classified failure);
- :mod:`rkstab.advection` — a 1D modal-Legendre spectral-element
  semidiscretization of periodic linear advection with upwind coupling, the
  semibounded operator used by all PDE experiments;
- :mod:`rkstab.timeloop` — stepping with per-step energy accounting, the
  adaptive modal filter, its implicit-Euler-mimicking double application, a
  simple energy projection, implicit Euler, and matrix-exponential references.

:mod:`rkstab.cli` exposes all of it as the ``rkstab`` command.
"""

from .advection import (
    MassNorm,
    Mesh1D,
    Semidiscretization,
    build_semidiscretization,
    m_inner,
    m_norm,
    operator_norm,
    project_initial,
)
from .certify import (
    CertBound,
    CertFailure,
    certify,
    compose_polynomial,
    rk4_family_report,
)
from .tableaux import (
    BUILTIN_TABLEAUX,
    ButcherTableau,
    StabilityPolynomial,
    builtin_tableau,
    defect_matrix,
    linear_order,
    stability_polynomial,
)
from .timeloop import (
    SimulationConfig,
    apply_filter,
    erk_step,
    filter_strength,
    implicit_euler_step,
    matrix_exponential_reference,
    mimic_implicit_filter,
    run_simulation,
    simple_projection,
    step_budget,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_TABLEAUX",
    "ButcherTableau",
    "CertBound",
    "CertFailure",
    "MassNorm",
    "Mesh1D",
    "Semidiscretization",
    "SimulationConfig",
    "StabilityPolynomial",
    "apply_filter",
    "build_semidiscretization",
    "builtin_tableau",
    "certify",
    "compose_polynomial",
    "defect_matrix",
    "erk_step",
    "filter_strength",
    "implicit_euler_step",
    "linear_order",
    "m_inner",
    "m_norm",
    "matrix_exponential_reference",
    "mimic_implicit_filter",
    "operator_norm",
    "project_initial",
    "rk4_family_report",
    "run_simulation",
    "simple_projection",
    "stability_polynomial",
    "step_budget",
    "__version__",
]
