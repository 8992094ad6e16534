# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-step kernels.

Same contracts as ``rkstab.kernels._reference``; the loops are fused so one
right-hand-side evaluation costs a single C call instead of several numpy
dispatches — the arrays here are small (tens of modes), so dispatch overhead
dominates the pure-numpy path across the hundreds of thousands of evaluations
in a long run.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def advection_rhs(
    cnp.ndarray[cnp.float64_t, ndim=2] u not None,
    cnp.ndarray[cnp.float64_t, ndim=2] gmat not None,
    cnp.ndarray[cnp.float64_t, ndim=1] v_left not None,
    cnp.ndarray[cnp.float64_t, ndim=1] v_right not None,
    cnp.ndarray[cnp.float64_t, ndim=1] lift not None,
    out=None,
):
    """Fused element loop computing ``u @ gmat + jump[:, None] * lift``.

    ``jump[e] = (u @ v_right)[e-1] - (u @ v_left)[e]``, indices periodic.
    See the reference backend for the full parameter description.
    """
    cdef Py_ssize_t n_elements = u.shape[0]
    cdef Py_ssize_t m = u.shape[1]
    if out is None:
        out = np.empty_like(u)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] res = out
    cdef double[:, ::1] uv = np.ascontiguousarray(u)
    cdef double[:, ::1] gv = np.ascontiguousarray(gmat)
    cdef double[::1] vl = np.ascontiguousarray(v_left)
    cdef double[::1] vr = np.ascontiguousarray(v_right)
    cdef double[::1] lf = np.ascontiguousarray(lift)
    cdef double[:, ::1] rv = res

    cdef Py_ssize_t e, n, k, prev
    cdef double jump, acc

    for e in range(n_elements):
        prev = e - 1 if e > 0 else n_elements - 1
        jump = 0.0
        for k in range(m):
            jump += uv[prev, k] * vr[k] - uv[e, k] * vl[k]
        for n in range(m):
            acc = 0.0
            for k in range(m):
                acc += uv[e, k] * gv[k, n]
            rv[e, n] = acc + jump * lf[n]
    return res
