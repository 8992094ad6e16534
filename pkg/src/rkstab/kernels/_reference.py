"""Pure-numpy implementations of the hot per-step kernels.

This module is the always-available backend; :mod:`rkstab.kernels` re-exports
either these functions or their compiled equivalents from ``_speedups``. Both
backends implement exactly the same contracts and are tested against each
other.
"""

import numpy as np

BACKEND_NAME = "reference"


def advection_rhs(u, gmat, v_left, v_right, lift, out=None):
    """Right-hand side of the semidiscrete advection system, du/dt = L u.

    Parameters
    ----------
    u : (N, m) float64 array
        Modal coefficients, one row per element, m = degree + 1 modes.
    gmat : (m, m) float64 array
        Precomputed volume-term matrix; the volume contribution is ``u @ gmat``
        (all mesh/velocity constants already folded in).
    v_left, v_right : (m,) float64 arrays
        Basis traces at the element's left/right endpoint, so ``u @ v_left``
        and ``u @ v_right`` are the boundary values of each element.
    lift : (m,) float64 array
        Modal lift of the upwind interface correction (constants folded in).
    out : (N, m) float64 array, optional
        Preallocated output buffer.

    Returns
    -------
    (N, m) array: ``u @ gmat + jump[:, None] * lift`` where
    ``jump[e] = (u @ v_right)[e-1] - (u @ v_left)[e]`` with periodic wraparound.
    """
    boundary_left = u @ v_left
    boundary_right = u @ v_right
    jump = np.roll(boundary_right, 1) - boundary_left
    result = u @ gmat
    result += jump[:, None] * lift[None, :]
    if out is None:
        return result
    out[...] = result
    return out
