# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled tomography cost kernel (same contract as _mle_np.make_cost).

The cost is evaluated thousands of times per reconstruction inside a
derivative-free simplex search, and the Monte-Carlo fidelity studies run
hundreds of reconstructions, so this inner loop dominates total runtime.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

# must match _mle_np.LOWER_INDICES
cdef int LOWER_I[6]
cdef int LOWER_J[6]
LOWER_I[0] = 1; LOWER_J[0] = 0
LOWER_I[1] = 2; LOWER_J[1] = 0
LOWER_I[2] = 2; LOWER_J[2] = 1
LOWER_I[3] = 3; LOWER_J[3] = 0
LOWER_I[4] = 3; LOWER_J[4] = 1
LOWER_I[5] = 3; LOWER_J[5] = 2


cdef double _cost_eval(const double complex[:, :, ::1] proj,
                       const double[::1] counts,
                       double n_ref, double eps,
                       const double[::1] t) noexcept nogil:
    cdef double complex T[4][4]
    cdef double complex rho[4][4]
    cdef double complex acc
    cdef double tr, p, pred, denom, total
    cdef int i, j, k, nu

    for i in range(4):
        for j in range(4):
            T[i][j] = 0.0
    for i in range(4):
        T[i][i] = t[i]
    for k in range(6):
        T[LOWER_I[k]][LOWER_J[k]] = t[4 + 2 * k] + 1j * t[5 + 2 * k]

    # rho = T^dag T (before trace normalization)
    tr = 0.0
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc = acc + T[k][i].conjugate() * T[k][j]
            rho[i][j] = acc
        tr += rho[i][i].real

    total = 0.0
    for nu in range(proj.shape[0]):
        # p = Re Tr(Pi_nu rho) / tr
        p = 0.0
        for i in range(4):
            for j in range(4):
                p += (proj[nu, i, j] * rho[j][i]).real
        p /= tr
        pred = n_ref * p
        denom = pred if pred > eps else eps
        total += (pred - counts[nu]) * (pred - counts[nu]) / (2.0 * denom)
    return total


cdef class _CostFn:
    cdef double complex[:, :, ::1] proj
    cdef double[::1] counts
    cdef double n_ref
    cdef double eps

    def __init__(self, proj, counts, double n_ref, double eps):
        self.proj = proj
        self.counts = counts
        self.n_ref = n_ref
        self.eps = eps

    def __call__(self, t):
        cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
        if tv.shape[0] != 16:
            raise ValueError("parameter vector must have 16 entries")
        return _cost_eval(self.proj, self.counts, self.n_ref, self.eps, tv)


def make_cost(projectors, counts, n_ref, eps):
    """Compiled counterpart of the numpy cost factory."""
    proj = np.ascontiguousarray(projectors, dtype=np.complex128)
    n = np.ascontiguousarray(counts, dtype=np.float64)
    if proj.ndim != 3 or proj.shape[1:] != (4, 4):
        raise ValueError("projectors must be (n, 4, 4)")
    if n.shape[0] != proj.shape[0]:
        raise ValueError("counts length must match projector count")
    return _CostFn(proj, n, float(n_ref), float(eps))
