"""Pure-numpy implementation of the tomography cost kernel."""

import numpy as np

# storage order of the 6 sub-diagonal complex entries of the 4x4 factor
LOWER_INDICES = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))


def factor_from_params(t):
    """Lower-triangular 4x4 complex factor from 16 real parameters.

    The first 4 parameters are the real diagonal; the remaining 12 are
    (re, im) pairs for the sub-diagonal entries in LOWER_INDICES order.
    """
    t = np.asarray(t, dtype=float)
    m = np.zeros((4, 4), dtype=complex)
    m[np.arange(4), np.arange(4)] = t[:4]
    for k, (i, j) in enumerate(LOWER_INDICES):
        m[i, j] = t[4 + 2 * k] + 1j * t[5 + 2 * k]
    return m


def density_from_params(t):
    """rho(t) = T^dag T / Tr(T^dag T); Hermitian, PSD, unit trace for t != 0."""
    m = factor_from_params(t)
    rho = m.conj().T @ m
    tr = np.trace(rho).real
    if tr <= 0.0:
        raise ValueError("zero parameter vector has no associated state")
    return rho / tr


def params_from_factor(m):
    """Inverse of factor_from_params (imaginary diagonal parts are dropped)."""
    t = np.zeros(16)
    t[:4] = np.diag(m).real
    for k, (i, j) in enumerate(LOWER_INDICES):
        t[4 + 2 * k] = m[i, j].real
        t[5 + 2 * k] = m[i, j].imag
    return t


def make_cost(projectors, counts, n_ref, eps):
    """Gaussian-approximated Poisson cost as a function of the 16 parameters.

    C(t) = sum_nu (n_ref * p_nu(t) - n_nu)^2 / (2 * max(n_ref * p_nu(t), eps))
    with p_nu(t) = Tr(Pi_nu rho(t)).
    """
    proj = np.ascontiguousarray(projectors, dtype=complex)
    n = np.ascontiguousarray(counts, dtype=float)
    n_ref = float(n_ref)
    eps = float(eps)

    def cost(t):
        rho = density_from_params(t)
        p = np.einsum("nij,ji->n", proj, rho).real
        pred = n_ref * p
        return float(np.sum((pred - n) ** 2 / (2.0 * np.maximum(pred, eps))))

    return cost
