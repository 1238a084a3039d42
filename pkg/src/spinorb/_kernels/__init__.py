"""Hot-loop kernels with a compiled core and a pure-python fallback.

The compiled Cython kernel is preferred when its extension module built
successfully; otherwise (or when ``SPINORB_PURE_PYTHON=1`` is set) the numpy
implementation is used. Both expose the same ``make_cost`` factory; the
selection happens once at import time.
"""

import os

from . import _mle_np

_BACKENDS = {"numpy": _mle_np}

if not os.environ.get("SPINORB_PURE_PYTHON"):
    try:
        from . import _mle_cy  # compiled extension; optional

        _BACKENDS["cython"] = _mle_cy
    except ImportError:
        pass

#: name of the backend used by default for cost evaluations
BACKEND = "cython" if "cython" in _BACKENDS else "numpy"

# parameter layout helpers are backend-independent
LOWER_INDICES = _mle_np.LOWER_INDICES
factor_from_params = _mle_np.factor_from_params
density_from_params = _mle_np.density_from_params
params_from_factor = _mle_np.params_from_factor


def available_backends():
    """Names of cost-kernel backends importable in this process."""
    return tuple(sorted(_BACKENDS))


def make_mle_cost(projectors, counts, n_ref, eps, backend=None):
    """Build the cost callable using the selected (or an explicit) backend."""
    name = backend or BACKEND
    try:
        mod = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    return mod.make_cost(projectors, counts, n_ref, eps)
