import os
import subprocess
import sys

import numpy as np
import pytest

from spinorb import _kernels
from spinorb._kernels import (
    available_backends,
    density_from_params,
    factor_from_params,
    make_mle_cost,
    params_from_factor,
)


def _problem(rng):
    kets = rng.normal(size=(16, 4)) + 1j * rng.normal(size=(16, 4))
    kets /= np.linalg.norm(kets, axis=1, keepdims=True)
    proj = np.einsum("ni,nj->nij", kets, kets.conj())
    counts = rng.integers(0, 500, size=16).astype(float)
    return proj, counts


def test_factor_round_trip():
    rng = np.random.default_rng(67)
    t = rng.normal(size=16)
    assert np.allclose(params_from_factor(factor_from_params(t)), t, atol=1e-15)


def test_factor_is_lower_triangular():
    t = np.arange(1.0, 17.0)
    m = factor_from_params(t)
    assert np.abs(np.triu(m, k=1)).max() == 0.0


def test_density_is_normalized():
    rng = np.random.default_rng(71)
    for _ in range(100):
        rho = density_from_params(rng.normal(size=16))
        assert abs(np.trace(rho).real - 1.0) < 1e-12


def test_zero_params_rejected():
    with pytest.raises(ValueError):
        density_from_params(np.zeros(16))


def test_backends_agree():
    backends = available_backends()
    assert "numpy" in backends
    rng = np.random.default_rng(73)
    proj, counts = _problem(rng)
    costs = [make_mle_cost(proj, counts, 1000.0, 0.5, backend=b) for b in backends]
    for _ in range(200):
        t = rng.normal(size=16) * rng.uniform(0.05, 5.0)
        values = [c(t) for c in costs]
        assert max(values) - min(values) <= 1e-9 * max(1.0, max(values))


def test_compiled_backend_present_by_default():
    # the build script compiles the extension; only a failed build may drop it
    if "cython" not in available_backends():
        pytest.skip("compiled kernel not built in this environment")
    assert _kernels.BACKEND == "cython"


def test_env_var_forces_pure_python():
    env = dict(os.environ, SPINORB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import spinorb; print(spinorb.KERNEL_BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_unknown_backend_rejected():
    rng = np.random.default_rng(79)
    proj, counts = _problem(rng)
    with pytest.raises(ValueError, match="unknown backend"):
        make_mle_cost(proj, counts, 1000.0, 0.5, backend="fortran")


def test_cost_value_matches_direct_formula():
    rng = np.random.default_rng(83)
    proj, counts = _problem(rng)
    n_ref, eps = 1000.0, 0.5
    t = rng.normal(size=16)
    rho = density_from_params(t)
    p = np.einsum("nij,ji->n", proj, rho).real
    pred = n_ref * p
    expected = float(np.sum((pred - counts) ** 2 / (2 * np.maximum(pred, eps))))
    for b in available_backends():
        got = make_mle_cost(proj, counts, n_ref, eps, backend=b)(t)
        assert abs(got - expected) < 1e-9 * max(1.0, expected)
