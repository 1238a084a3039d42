"""Jones-calculus waveplates, the metasurface channel, and SLM projections.

Angle convention (frozen, see CONVENTIONS.md): the in-plane rotation matrix
is ``R(t) = [[cos t, sin t], [-sin t, cos t]]``, which makes a half-wave
plate at angle ``t`` act on circular polarizations as

    hwp(t)|s+-> = exp(-+ 2 i t)|s-+>

i.e. the spin-dependent phase is ``-2 * spin * t``, the same law the
metasurface geometry implements pixel by pixel. Retarders carry the phase
conventions diag(1, -1) (half-wave) and diag(1, i) (quarter-wave) in their
fast-axis frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import OamKet, PureState, SpinKet, DensityMatrix, SPIN_LABELS

UNITARY_TOL = 1e-12

#: HV components of sigma+/- columns: converts HV components to sigma components
_HV_TO_SIGMA = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)


class TruncationOverflowError(ValueError):
    """Raised when a metasurface shift would push amplitude past the OAM truncation."""


class PolarizationOperator:
    """A 2x2 Jones operator in the (H, V) basis."""

    def __init__(self, matrix, element_kind: str):
        m = np.array(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("Jones operator must be 2x2")
        m.flags.writeable = False
        self.matrix = m
        self.element_kind = element_kind

    def apply(self, ket: SpinKet) -> SpinKet:
        """Apply to a spin ket (converting through the HV basis); renormalizes."""
        out_hv = self.matrix @ ket.hv
        return SpinKet(_HV_TO_SIGMA @ out_hv)

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return bool(np.abs(self.matrix @ self.matrix.conj().T - np.eye(2)).max() < tol)

    def __repr__(self):
        return f"PolarizationOperator({self.element_kind})"


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def rotator(theta: float) -> PolarizationOperator:
    """Pure polarization rotation by ``theta`` (radians)."""
    return PolarizationOperator(_rot(theta), "rotation")


def hwp(theta: float) -> PolarizationOperator:
    """Half-wave plate with fast axis at ``theta`` radians."""
    return PolarizationOperator(_rot(theta) @ np.diag([1.0, -1.0]) @ _rot(-theta), "HWP")


def qwp(theta: float) -> PolarizationOperator:
    """Quarter-wave plate with fast axis at ``theta`` radians."""
    return PolarizationOperator(_rot(theta) @ np.diag([1.0, 1.0j]) @ _rot(-theta), "QWP")


def linear_polarizer(theta: float = 0.0) -> PolarizationOperator:
    """Ideal linear polarizer transmitting the axis at ``theta`` radians from H."""
    axis = _rot(theta) @ np.array([1.0, 0.0])
    return PolarizationOperator(np.outer(axis, axis.conj()), "polarizer")


def polarization_projector_from_waveplates(qwp_deg: float, hwp_deg: float) -> SpinKet:
    """Polarization state transmitted with certainty by the analyzer chain.

    The chain, in photon propagation order, is QWP(q) -> HWP(h) -> fixed
    H-axis polarizer; the transmitted ket is QWP(q)^dag HWP(h)^dag |H>.
    Angles are in degrees, matching the measurement table.
    """
    q = qwp(np.radians(qwp_deg)).matrix
    h = hwp(np.radians(hwp_deg)).matrix
    ket_hv = q.conj().T @ h.conj().T @ np.array([1.0, 0.0], dtype=complex)
    return SpinKet(_HV_TO_SIGMA @ ket_hv)


@dataclass(frozen=True)
class GpmSpec:
    """Geometric-phase metasurface channel parameters.

    ``winding`` is the orientation-pattern topological charge; the OAM shift
    magnitude equals it. ``flipped`` models physically turning the element
    over, which reverses the shift directions. ``efficiency`` is the
    converted fraction; the rest passes unchanged (zero order).
    """

    winding: int = 1
    flipped: bool = False
    efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")

    @property
    def delta_ell(self) -> int:
        return self.winding

    def shift_for_spin(self, spin: int) -> int:
        """OAM shift applied to the given incoming spin (+1 or -1)."""
        shift = self.delta_ell if spin == +1 else -self.delta_ell
        return -shift if self.flipped else shift


def _gpm_matrix(spec: GpmSpec, truncation: int):
    """Unitary on the product space: (s, l) -> (-s, l + shift(s)).

    Sources whose image leaves the truncation window get an all-zero column;
    callers must verify the input has no support there.
    """
    n = 2 * truncation + 1
    dim = 2 * n
    u = np.zeros((dim, dim), dtype=complex)
    dropped = []
    for si, s in enumerate(SPIN_LABELS):
        for l in range(-truncation, truncation + 1):
            src = si * n + (l + truncation)
            l_out = l + spec.shift_for_spin(s)
            if abs(l_out) > truncation:
                dropped.append(src)
                continue
            dst = (1 - si) * n + (l_out + truncation)
            u[dst, src] = 1.0
    return u, dropped


def gpm_unitary(spec: GpmSpec, psi: PureState) -> PureState:
    """Coherent metasurface action: spin flip with spin-dependent OAM shift."""
    u, dropped = _gpm_matrix(spec, psi.truncation)
    bad = sum(abs(psi.amplitudes[i]) ** 2 for i in dropped)
    if bad > 1e-24:
        raise TruncationOverflowError(
            f"input has weight {bad:g} on states shifted past L={psi.truncation}"
        )
    return PureState(u @ psi.amplitudes, psi.truncation)


def gpm_channel(spec: GpmSpec, rho: DensityMatrix) -> DensityMatrix:
    """Lossy metasurface channel: eta * U rho U^dag + (1 - eta) * rho.

    The unconverted branch keeps the photon's original spin and OAM
    (zero-order transmission); OAM post-selection removes it downstream.
    """
    spins, ells = _squarish_truncation(rho)
    u, dropped = _gpm_matrix(spec, max(abs(l) for l in ells))
    support = np.abs(rho.entries).sum(axis=1)
    bad = sum(support[i] for i in dropped)
    if bad > 1e-12:
        raise TruncationOverflowError(
            f"density matrix has weight {bad:g} on states shifted past the truncation"
        )
    eta = spec.efficiency
    converted = u @ rho.entries @ u.conj().T
    out = eta * converted + (1.0 - eta) * rho.entries
    return DensityMatrix(out, rho.basis_labels)


def _squarish_truncation(rho: DensityMatrix):
    """Validate the full spin-major product layout and return (spins, ells)."""
    labels = rho.basis_labels
    n = len(labels) // 2
    spins = (labels[0][0], labels[n][0])
    ells = [l for _, l in labels[:n]]
    expected = tuple((s, l) for s in spins for l in ells)
    if spins != SPIN_LABELS or expected != labels or ells != list(range(-max(ells), max(ells) + 1)):
        raise ValueError("gpm_channel needs a full spin-major (sigma+/-) x (-L..L) basis")
    return spins, ells


def slm_projection_ket(profile: str, truncation: int = 1) -> OamKet:
    """OAM analysis ket realized by the SLM hologram.

    Profiles: ``l=+1``, ``l=-1``, ``plus`` = (|+1> + |-1>)/sqrt(2), and
    ``r`` = (|+1> + i|-1>)/sqrt(2); superpositions carry a real positive
    +1-mode coefficient.
    """
    if profile == "l=+1":
        return OamKet.basis(+1, truncation)
    if profile == "l=-1":
        return OamKet.basis(-1, truncation)
    a = np.zeros(2 * truncation + 1, dtype=complex)
    if profile == "plus":
        a[+1 + truncation] = 1.0
        a[-1 + truncation] = 1.0
    elif profile == "r":
        a[+1 + truncation] = 1.0
        a[-1 + truncation] = 1.0j
    else:
        raise ValueError(f"unknown SLM profile {profile!r}")
    return OamKet(a, truncation)
