"""Single-photon spin/OAM entanglement simulator and tomography toolkit."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .elements import GpmSpec, gpm_channel, gpm_unitary, hwp, qwp
from .experiment import (
    ExperimentConfig,
    run_bell_pipeline,
    simulate_counts,
    standard_measurement_set,
)
from .states import DensityMatrix, OamKet, PureState, SpinKet, bell_state, fidelity
from .tomography import linear_inversion, mle_reconstruct

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "GpmSpec",
    "gpm_channel",
    "gpm_unitary",
    "hwp",
    "qwp",
    "ExperimentConfig",
    "run_bell_pipeline",
    "simulate_counts",
    "standard_measurement_set",
    "DensityMatrix",
    "OamKet",
    "PureState",
    "SpinKet",
    "bell_state",
    "fidelity",
    "linear_inversion",
    "mle_reconstruct",
    "__version__",
]
