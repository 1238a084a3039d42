"""End-to-end run assembly: source, metasurface, measurement set, counts.

The measurement set is the standard 17-row protocol: row 0 records the
unprojected coincidence intensity used for normalization, rows 1-16 are the
tomographically complete polarization/OAM projections with their waveplate
angles and SLM hologram profiles.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import elements, states
from .elements import GpmSpec, polarization_projector_from_waveplates, slm_projection_ket
from .states import DensityMatrix, OamKet, PureState, SpinKet

BELL_NAMES = ("psi+", "psi-", "phi+", "phi-")

# source metadata only; the simulation is monochromatic and ideal
SIGNAL_WAVELENGTH_NM = 815.6
PUMP_WAVELENGTH_NM = 407.8


@dataclass(frozen=True)
class MeasurementSetting:
    """One analyzer configuration: a polarization ket, an OAM ket, and the
    waveplate angles that realize the polarization projection."""

    id: int
    label: str
    pol_ket: Optional[SpinKet]
    oam_ket: Optional[OamKet]
    qwp_deg: Optional[float]
    hwp_deg: Optional[float]
    slm_profile: Optional[str]


@dataclass(frozen=True)
class CountRecord:
    setting_id: int
    counts: int
    duration_s: float = 10.0

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be non-negative")
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one simulated acquisition."""

    target_bell: str = "psi+"
    n_total: float = 1000.0
    efficiency: float = 0.72
    noise: str = "poisson"
    rng_seed: int = 0
    post_select: bool = True
    duration_s: float = 10.0
    truncation: int = 1

    def __post_init__(self):
        if self.target_bell not in BELL_NAMES:
            raise ValueError(f"target_bell must be one of {BELL_NAMES}")
        if self.n_total <= 0:
            raise ValueError("n_total must be positive")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if self.noise not in ("none", "poisson"):
            raise ValueError("noise must be 'none' or 'poisson'")


# (polarization label, qwp deg, hwp deg) per row within one OAM group;
# the same four-analyzer pattern repeats forwards then backwards
_POL_ROWS_FWD = (("H", 0.0, 0.0), ("V", 0.0, 45.0), ("σ+", 0.0, 22.5), ("D", 45.0, 22.5))
_POL_ROWS_REV = tuple(reversed(_POL_ROWS_FWD))
_OAM_GROUPS = (("ℓ=1", "l=+1"), ("ℓ=-1", "l=-1"), ("+", "plus"), ("r", "r"))


def standard_measurement_set(truncation: int = 1):
    """The 17 settings of the tomography protocol (id 0 is the intensity row)."""
    settings = [
        MeasurementSetting(0, "Intensity", None, None, None, None, None)
    ]
    next_id = 1
    for group_index, (oam_label, profile) in enumerate(_OAM_GROUPS):
        rows = _POL_ROWS_FWD if group_index % 2 == 0 else _POL_ROWS_REV
        oam = slm_projection_ket(profile, truncation)
        for pol_label, q, h in rows:
            pol = polarization_projector_from_waveplates(q, h)
            settings.append(
                MeasurementSetting(
                    next_id, f"{pol_label} ⊗ {oam_label}", pol, oam, q, h, profile
                )
            )
            next_id += 1
    return settings


def projection_ket_on(setting: MeasurementSetting, basis_labels) -> np.ndarray:
    """Amplitudes of the setting's product projector ket on the given basis.

    Basis states absent from the setting's OAM truncation contribute zero,
    so the same setting works on the full space and on the 4-dim block.
    """
    if setting.id == 0:
        raise ValueError("the intensity row has no projector")
    pol = setting.pol_ket.amplitudes
    ket = np.array(
        [
            pol[0 if s == +1 else 1] * setting.oam_ket.amplitude(l)
            for s, l in basis_labels
        ]
    )
    return ket


def expected_probability(rho: DensityMatrix, setting: MeasurementSetting) -> float:
    """Born-rule probability <k| rho |k> for the setting's projector ket."""
    ket = projection_ket_on(setting, rho.basis_labels)
    p = float(np.real(ket.conj() @ rho.entries @ ket))
    return min(max(p, 0.0), 1.0)


def prepare_source_state(pol: str, truncation: int = 1) -> PureState:
    """Heralded source output |pol> (x) |l=0> with pol 'H' or 'V'."""
    if pol == "H":
        spin = SpinKet.h()
    elif pol == "V":
        spin = SpinKet.v()
    else:
        raise ValueError("source polarization must be 'H' or 'V'")
    return states.tensor(spin, OamKet.basis(0, truncation))


def simulate_counts(state, config: ExperimentConfig):
    """Simulate the 17 count records for a state under the configured noise.

    ``state`` is a PureState or DensityMatrix. Record 0 is the unprojected
    intensity; record nu has mean n_total * p_nu. With ``noise='none'``
    counts are the rounded means; with ``'poisson'`` they are independent
    Poisson draws, reproducible from ``rng_seed``.
    """
    rho = states.density_from_pure(state) if isinstance(state, PureState) else state
    settings = standard_measurement_set(config.truncation)
    means = [config.n_total]
    means += [config.n_total * expected_probability(rho, s) for s in settings[1:]]

    if config.noise == "poisson":
        rng = np.random.default_rng(config.rng_seed)
        drawn = [int(rng.poisson(m)) for m in means]
    else:
        drawn = [int(round(m)) for m in means]

    return [
        CountRecord(s.id, c, config.duration_s)
        for s, c in zip(settings, drawn)
    ]


def bell_source_settings(target: str):
    """(source polarization, flipped?) that generates the requested Bell state."""
    pol = "H" if target.endswith("+") else "V"
    flipped = target.startswith("phi")
    return pol, flipped


def run_bell_pipeline(config: ExperimentConfig):
    """Source -> metasurface channel -> (post-selection) -> simulated counts.

    Returns ``(ideal, counts)`` where ``ideal`` is the closed-form target
    Bell state and ``counts`` the 17 simulated records.
    """
    pol, flipped = bell_source_settings(config.target_bell)
    spec = GpmSpec(winding=1, flipped=flipped, efficiency=config.efficiency)
    psi_in = prepare_source_state(pol, config.truncation)
    rho = elements.gpm_channel(spec, states.density_from_pure(psi_in))
    if config.post_select:
        rho = states.restrict_to_block(rho)
    ideal = states.bell_state(config.target_bell, config.truncation)
    return ideal, simulate_counts(rho, config)


COUNTS_CSV_HEADER = ("setting_id", "label", "counts", "duration_s")


def counts_to_csv(records, settings=None) -> str:
    """Render count records as the interchange CSV (id 0 first)."""
    by_id = {r.setting_id: r for r in records}
    if settings is None:
        settings = standard_measurement_set()
    labels = {s.id: s.label for s in settings}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COUNTS_CSV_HEADER)
    for sid in sorted(by_id):
        r = by_id[sid]
        writer.writerow([r.setting_id, labels.get(sid, ""), r.counts, repr(r.duration_s)])
    return buf.getvalue()


def counts_from_csv(text: str):
    """Parse and validate the counts CSV; raises ValueError naming bad rows."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("counts file is empty")
    if tuple(h.strip() for h in header) != COUNTS_CSV_HEADER:
        raise ValueError(f"bad header {header!r}, expected {','.join(COUNTS_CSV_HEADER)}")
    records = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ValueError(f"line {lineno}: expected 4 columns, got {len(row)}")
        try:
            sid = int(row[0])
            counts = int(row[2])
            duration = float(row[3])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric setting_id/counts/duration")
        if not 0 <= sid <= 16:
            raise ValueError(f"line {lineno}: setting_id {sid} outside 0..16")
        if sid in seen:
            raise ValueError(f"line {lineno}: duplicate setting_id {sid}")
        seen.add(sid)
        records.append(CountRecord(sid, counts, duration))
    missing = sorted(set(range(17)) - seen)
    if missing:
        raise ValueError(f"missing setting ids: {missing}")
    return sorted(records, key=lambda r: r.setting_id)
