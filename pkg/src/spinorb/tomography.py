"""Density-matrix reconstruction from the 16 projection counts.

Two routes are provided: direct linear inversion of the Born-rule system
(fast, but can land outside the physical cone at low counts) and a
maximum-likelihood fit over a Cholesky-style parametrization that is
Hermitian, PSD, and unit-trace by construction. Linear inversion doubles as
an independent cross-check of the likelihood fit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import _kernels, states
from .experiment import projection_ket_on, standard_measurement_set
from .states import BLOCK_LABELS, DensityMatrix

#: predicted-count floor guarding empty bins in the likelihood cost
COST_EPS = 0.5

#: eigenvalue threshold below which a linear-inversion result is flagged
NONPHYSICAL_EIG = -1e-6

#: central-difference gradient norm below which an iterate counts as
#: stationary (count units; observed stationary points sit near 1e-7)
GRAD_TOL = 1e-4


@dataclass
class TomographyResult:
    rho: DensityMatrix
    method: str
    converged: bool
    physical: bool
    fidelity_vs_target: Optional[float] = None
    nll: Optional[float] = None
    iterations: Optional[int] = None

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "converged": self.converged,
            "physical": self.physical,
            "iterations": self.iterations,
            "nll": self.nll,
            "fidelity_vs_target": self.fidelity_vs_target,
            "rho": json.loads(self.rho.to_json()),
        }
        return json.dumps(payload)


def block_projectors():
    """The 16 rank-1 projector matrices on the standard 4-dim block."""
    settings = standard_measurement_set()
    mats = []
    for s in settings[1:]:
        ket = projection_ket_on(s, BLOCK_LABELS)
        mats.append(np.outer(ket, ket.conj()))
    return np.array(mats)


def _hermitian_basis(dim=4):
    """A real-spanning basis of Hermitian dim x dim matrices."""
    mats = []
    for i in range(dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[i, i] = 1.0
        mats.append(m)
    for i in range(dim):
        for j in range(i + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = m[j, i] = 1.0
            mats.append(m)
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = -1.0j
            m[j, i] = 1.0j
            mats.append(m)
    return mats


def _ordered_counts(counts, n_ref):
    records = sorted(counts, key=lambda r: r.setting_id)
    ids = [r.setting_id for r in records]
    if ids != list(range(1, 17)):
        raise ValueError(f"need settings 1..16 exactly once, got ids {ids}")
    if n_ref.setting_id != 0:
        raise ValueError("n_ref must be the id-0 intensity record")
    if n_ref.counts <= 0:
        raise ValueError("reference intensity must be positive")
    return np.array([float(r.counts) for r in records]), float(n_ref.counts)


def linear_inversion(counts, n_ref, target: Optional[str] = None) -> TomographyResult:
    """Solve the 16x16 Born-rule system for a Hermitian (trace-rescaled) matrix.

    The result can carry small negative eigenvalues at finite counts; it is
    flagged non-physical below the NONPHYSICAL_EIG threshold, and any
    requested fidelity is computed on the PSD-clamped matrix.
    """
    n, ref = _ordered_counts(counts, n_ref)
    freqs = n / ref
    proj = block_projectors()
    basis = _hermitian_basis()
    a = np.array([[np.trace(p @ b).real for b in basis] for p in proj])
    x = np.linalg.solve(a, freqs)
    rho = sum(c * b for c, b in zip(x, basis))
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise ValueError("linear inversion produced a traceless matrix")
    rho = rho / tr
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    result = TomographyResult(
        rho=DensityMatrix(rho, BLOCK_LABELS, validate=False),
        method="linear",
        converged=True,
        physical=min_eig >= NONPHYSICAL_EIG,
    )
    if target is not None:
        fidelity_report(result, target)
    return result


def _lower_factor(rho0):
    """Lower-triangular T with T^dag T = rho0 (reverse Cholesky via flips)."""
    p = np.fliplr(np.eye(rho0.shape[0]))
    l = np.linalg.cholesky(p @ rho0 @ p)
    return (p @ l @ p).conj().T


def _seed_params(counts, n_ref, init: str) -> np.ndarray:
    if init == "identity":
        return _kernels.params_from_factor(_lower_factor(np.eye(4) / 4.0))
    if init != "linear":
        raise ValueError("init must be 'linear' or 'identity'")
    rho = linear_inversion(counts, n_ref).rho.entries
    w, v = np.linalg.eigh(rho)
    # Cholesky needs strict positivity; floor tiny/negative eigenvalues
    w = np.clip(w, 1e-9, None)
    rho0 = (v * w) @ v.conj().T
    rho0 = 0.5 * (rho0 + rho0.conj().T)
    rho0 = rho0 / np.trace(rho0).real
    return _kernels.params_from_factor(_lower_factor(rho0))


def mle_reconstruct(
    counts,
    n_ref,
    init: str = "linear",
    target: Optional[str] = None,
    max_fev: int = 100_000,
    backend: Optional[str] = None,
) -> TomographyResult:
    """Maximum-likelihood reconstruction over the PSD cone.

    Minimizes the Gaussian approximation of the Poisson likelihood,

        C(t) = sum_nu (N p_nu(t) - n_nu)^2 / (2 max(N p_nu(t), eps)),

    over the 16 real parameters of rho(t) = T^dag T / Tr(T^dag T) using
    Nelder-Mead simplex descent restarted once from its own best point (the
    fresh simplex un-sticks the crawl the method develops in the flat
    directions that open up at the PSD boundary). Deterministic for fixed
    inputs and ``init``.

    ``converged`` means the simplex met its tolerances or, failing that,
    the final iterate is numerically stationary (central-difference
    gradient norm below GRAD_TOL); non-convergence returns the best
    iterate with ``converged=False``.
    """
    n, ref = _ordered_counts(counts, n_ref)
    proj = block_projectors()
    cost = _kernels.make_mle_cost(proj, n, ref, COST_EPS, backend=backend)
    t0 = _seed_params(counts, n_ref, init)
    initial_cost = cost(t0)

    best = t0
    converged = True
    nfev = 0
    for _ in range(2):
        res = minimize(
            cost,
            best,
            method="Nelder-Mead",
            options={
                "maxfev": max_fev // 2,
                "xatol": 1e-8,
                "fatol": 1e-10,
                "adaptive": True,
                "initial_simplex": _initial_simplex(best),
            },
        )
        nfev += res.nfev
        best = res.x
        converged = bool(res.success)

    if not converged:
        gnorm, extra = _gradient_norm(cost, best)
        nfev += extra
        converged = gnorm < GRAD_TOL

    final_cost = float(cost(best))
    if final_cost > initial_cost:
        # the optimizer never accepts a worse best vertex, so this is defensive
        best, final_cost = t0, float(initial_cost)
    rho = _kernels.density_from_params(best)
    result = TomographyResult(
        rho=DensityMatrix(rho, BLOCK_LABELS),
        method="mle",
        converged=converged,
        physical=True,
        nll=final_cost,
        iterations=nfev,
    )
    if target is not None:
        fidelity_report(result, target)
    return result


def _initial_simplex(t0, scale=0.05):
    """Vertex spans 0.05 * (|t| + 0.05) per coordinate.

    scipy's default simplex gives near-zero coordinates near-degenerate
    spans, which roughly doubles the evaluation count on the sparse
    parameter vectors Bell-like states produce.
    """
    sim = np.tile(t0, (len(t0) + 1, 1))
    for i in range(len(t0)):
        sim[i + 1, i] += scale * (abs(t0[i]) + scale)
    return sim


def _gradient_norm(cost, t, h=1e-6):
    """Central-difference gradient norm and the evaluations it spent."""
    g = np.zeros(len(t))
    for i in range(len(t)):
        step = np.zeros(len(t))
        step[i] = h
        g[i] = (cost(t + step) - cost(t - step)) / (2.0 * h)
    return float(np.linalg.norm(g)), 2 * len(t)


def bell_target_density(target: str) -> DensityMatrix:
    """Closed-form 4x4 density matrix of a Bell state on the standard block."""
    return states.block_density(states.bell_state(target))


def fidelity_report(result: TomographyResult, target: str) -> float:
    """Fidelity of the reconstruction against a closed-form Bell target.

    Linear-inversion results with negative eigenvalues are PSD-clamped
    first; negativity beyond the NONPHYSICAL_EIG threshold is visible
    through ``result.physical``, never silent.
    """
    rho = result.rho
    if np.linalg.eigvalsh(rho.entries)[0] < 0.0:
        rho = rho.clamped()
    f = states.fidelity(bell_target_density(target), rho)
    result.fidelity_vs_target = f
    return f


def split_records(records):
    """Separate a 17-record list into (16 projection records, intensity record)."""
    by_id = {r.setting_id: r for r in records}
    if 0 not in by_id:
        raise ValueError("records are missing setting 0 (intensity)")
    return [r for r in records if r.setting_id != 0], by_id[0]
