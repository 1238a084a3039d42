"""Command-line entry point: reproducible simulation, tomography, and design runs.

Every run writes a ``manifest.json`` echoing the fully-resolved parameters;
a manifest (or a flat ``key=value`` config file) can be replayed with
``--config`` to reproduce the run byte for byte. Existing output files are
never overwritten unless ``--force`` is given.

Exit codes: 0 success, 1 numerical/convergence failure, 2 usage or
validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path

from . import design, experiment, states, tomography

ENV_OUTDIR = "SPINORB_OUTDIR"


class UsageError(Exception):
    pass


class NumericalError(Exception):
    pass


def _default_outdir() -> str:
    return os.environ.get(ENV_OUTDIR, "spinorb-out")


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    text = p.read_text()
    if p.suffix == ".json":
        payload = json.loads(text)
        return payload.get("params", payload)
    params = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        try:
            params[key.strip()] = json.loads(value.strip())
        except json.JSONDecodeError:
            params[key.strip()] = value.strip()
    return params


def _resolve(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit command-line flags."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_params = _load_config_file(args.config)
        unknown = set(file_params) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_params)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _prepare_outputs(outdir: str, names, force: bool):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in names}
    if not force:
        existing = [str(p) for p in paths.values() if p.exists()]
        if existing:
            raise UsageError(
                "refusing to overwrite existing outputs (use --force): " + ", ".join(existing)
            )
    return paths


def _write_manifest(path: Path, command: str, params: dict):
    payload = {"command": command, "params": params}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# bell

BELL_DEFAULTS = {
    "target": "psi+",
    "counts": 1000.0,
    "efficiency": 0.72,
    "noise": "poisson",
    "seed": 0,
    "trials": 1,
    "post_select": True,
    "duration": 10.0,
    "init": "linear",
}


def cmd_bell(args) -> int:
    params = _resolve(BELL_DEFAULTS, args)
    if params["target"] not in experiment.BELL_NAMES:
        raise UsageError(f"target must be one of {experiment.BELL_NAMES}")
    trials = int(params["trials"])
    if trials < 1:
        raise UsageError("trials must be >= 1")

    names = ["manifest.json"]
    if trials == 1:
        names += ["counts.csv", "result_mle.json"]
    else:
        names += ["trials.csv"]
    paths = _prepare_outputs(args.outdir, names, args.force)

    fidelities = []
    converged_flags = []
    for i in range(trials):
        cfg = experiment.ExperimentConfig(
            target_bell=params["target"],
            n_total=float(params["counts"]),
            efficiency=float(params["efficiency"]),
            noise=params["noise"],
            rng_seed=int(params["seed"]) + i,   # derived per-trial seeds
            post_select=bool(params["post_select"]),
            duration_s=float(params["duration"]),
        )
        _, records = experiment.run_bell_pipeline(cfg)
        proj, ref = tomography.split_records(records)
        result = tomography.mle_reconstruct(proj, ref, init=params["init"], target=params["target"])
        fidelities.append(result.fidelity_vs_target)
        converged_flags.append(result.converged)
        if trials == 1:
            paths["counts.csv"].write_text(experiment.counts_to_csv(records))
            paths["result_mle.json"].write_text(result.to_json() + "\n")

    _write_manifest(paths["manifest.json"], "bell", params)

    if trials == 1:
        print(f"target={params['target']} fidelity={fidelities[0]:.6f} converged={converged_flags[0]}")
    else:
        lines = ["trial,seed,fidelity,converged"]
        for i, (f, c) in enumerate(zip(fidelities, converged_flags)):
            lines.append(f"{i},{int(params['seed']) + i},{f!r},{c}")
        paths["trials.csv"].write_text("\n".join(lines) + "\n")
        print(
            f"target={params['target']} trials={trials} "
            f"fidelity_min={min(fidelities):.6f} "
            f"fidelity_median={statistics.median(fidelities):.6f} "
            f"fidelity_max={max(fidelities):.6f} "
            f"converged={sum(converged_flags)}/{trials}"
        )
    if not any(converged_flags):
        raise NumericalError("no trial converged")
    return 0


# ---------------------------------------------------------------------------
# tomo

TOMO_DEFAULTS = {"target": "", "init": "linear"}


def cmd_tomo(args) -> int:
    params = _resolve(TOMO_DEFAULTS, args)
    target = params["target"] or None
    if target is not None and target not in experiment.BELL_NAMES:
        raise UsageError(f"target must be one of {experiment.BELL_NAMES}")
    try:
        text = Path(args.counts_file).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read counts file: {exc}")
    try:
        records = experiment.counts_from_csv(text)
    except ValueError as exc:
        raise UsageError(f"malformed counts file: {exc}")

    paths = _prepare_outputs(
        args.outdir, ["manifest.json", "result_linear.json", "result_mle.json"], args.force
    )
    proj, ref = tomography.split_records(records)
    linear = tomography.linear_inversion(proj, ref, target=target)
    mle = tomography.mle_reconstruct(proj, ref, init=params["init"], target=target)
    dist = states.trace_distance(linear.rho, mle.rho)

    paths["result_linear.json"].write_text(linear.to_json() + "\n")
    paths["result_mle.json"].write_text(mle.to_json() + "\n")
    manifest_params = dict(params)
    manifest_params["counts_file"] = str(args.counts_file)
    _write_manifest(paths["manifest.json"], "tomo", manifest_params)

    pieces = []
    if target is not None:
        pieces.append(f"target={target}")
        pieces.append(f"linear_fidelity={linear.fidelity_vs_target:.6f}")
        pieces.append(f"mle_fidelity={mle.fidelity_vs_target:.6f}")
    pieces.append(f"trace_distance={dist:.3e}")
    pieces.append(f"linear_physical={linear.physical}")
    pieces.append(f"mle_converged={mle.converged}")
    print(" ".join(pieces))
    if not mle.converged:
        raise NumericalError("maximum-likelihood fit did not converge")
    return 0


# ---------------------------------------------------------------------------
# design

DESIGN_DEFAULTS = {
    "winding": 1,
    "spin": 1,
    "grid": 1024,
    "aperture_um": 200.0,
    "block_nm": 700.0,
    "rod_width_nm": 105.0,
    "rod_depth_nm": 300.0,
    "rod_pitch_nm": 233.0,
    "waist_um": 0.0,
    "beam": "gaussian",
}


def _layout_spec(params) -> design.LayoutSpec:
    try:
        return design.LayoutSpec(
            winding=int(params["winding"]),
            aperture_diameter=float(params["aperture_um"]) * 1000.0,
            block_size=float(params["block_nm"]),
            rod_width=float(params["rod_width_nm"]),
            rod_depth=float(params["rod_depth_nm"]),
            rod_pitch=float(params["rod_pitch_nm"]),
        )
    except ValueError as exc:
        raise UsageError(f"invalid geometry: {exc}")


def cmd_design(args) -> int:
    params = _resolve(DESIGN_DEFAULTS, args)
    spec = _layout_spec(params)
    if params["spin"] not in (1, -1):
        raise UsageError("spin must be +1 or -1")
    grid = int(params["grid"])
    names = [
        "manifest.json", "layout.csv", "layout.csv.json",
        "mask_spin_plus.pgm", "mask_spin_plus.pgm.json",
        "mask_spin_minus.pgm", "mask_spin_minus.pgm.json",
        "farfield.pgm", "oam_spectrum.json",
    ]
    paths = _prepare_outputs(args.outdir, names, args.force)

    rows = design.generate_layout(spec)
    design.write_layout(paths["layout.csv"], spec, rows)

    mask_p = design.phase_mask(spec, +1, grid)
    mask_m = design.phase_mask(spec, -1, grid)
    design.write_mask(paths["mask_spin_plus.pgm"], mask_p)
    design.write_mask(paths["mask_spin_minus.pgm"], mask_m)

    selected = mask_p if params["spin"] == 1 else mask_m
    waist = float(params["waist_um"]) * 1000.0 or None
    intensity = design.far_field(selected, params["beam"], waist)
    design.write_intensity_pgm(paths["farfield.pgm"], intensity)

    field = design.transmitted_field(selected, params["beam"], waist)
    spectrum = design.oam_spectrum(field, 0.25 * spec.aperture_diameter, selected.pixel_pitch)
    paths["oam_spectrum.json"].write_text(
        json.dumps({str(l): p for l, p in sorted(spectrum.items())}, indent=2) + "\n"
    )
    _write_manifest(paths["manifest.json"], "design", params)

    dominant = max(spectrum, key=spectrum.get)
    print(
        f"winding={spec.winding} spin={params['spin']:+d} "
        f"dominant_l={dominant} dominant_power={spectrum[dominant]:.6f} rods={len(rows)}"
    )
    return 0


# ---------------------------------------------------------------------------
# farfield

FARFIELD_DEFAULTS = {"beam": "gaussian", "waist_um": 0.0}


def cmd_farfield(args) -> int:
    params = _resolve(FARFIELD_DEFAULTS, args)
    try:
        mask = design.read_mask(args.mask)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read mask: {exc}")
    paths = _prepare_outputs(args.outdir, ["manifest.json", "intensity.pgm"], args.force)
    waist = float(params["waist_um"]) * 1000.0 or None
    try:
        intensity = design.far_field(mask, params["beam"], waist)
    except ValueError as exc:
        raise UsageError(str(exc))
    design.write_intensity_pgm(paths["intensity.pgm"], intensity)
    manifest_params = dict(params)
    manifest_params["mask"] = str(args.mask)
    _write_manifest(paths["manifest.json"], "farfield", manifest_params)
    n = intensity.shape[0]
    print(f"peak={intensity.max():.6e} on_axis={intensity[n // 2, n // 2]:.6e}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinorb",
        description="Simulate metasurface spin/OAM entanglement and reconstruct it by tomography.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--outdir", default=_default_outdir(),
                       help=f"output directory (default ${ENV_OUTDIR} or ./spinorb-out)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--config", help="key=value config file or a previous manifest.json")

    p = sub.add_parser("bell", help="generate a Bell state, simulate counts, reconstruct")
    p.add_argument("--target", choices=experiment.BELL_NAMES)
    p.add_argument("--counts", type=float, help="expected unprojected coincidences per window")
    p.add_argument("--efficiency", type=float, help="metasurface conversion efficiency")
    p.add_argument("--noise", choices=("none", "poisson"))
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--post-select", dest="post_select", action=argparse.BooleanOptionalAction)
    p.add_argument("--duration", type=float, help="integration window in seconds")
    p.add_argument("--init", choices=("linear", "identity"))
    add_common(p)
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("tomo", help="reconstruct a density matrix from a counts CSV")
    p.add_argument("--counts-file", required=True)
    p.add_argument("--target", choices=experiment.BELL_NAMES)
    p.add_argument("--init", choices=("linear", "identity"))
    add_common(p)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("design", help="generate layout, phase masks, far field, OAM spectrum")
    p.add_argument("--winding", type=int)
    p.add_argument("--spin", type=int, choices=(1, -1))
    p.add_argument("--grid", type=int)
    p.add_argument("--aperture-um", dest="aperture_um", type=float)
    p.add_argument("--block-nm", dest="block_nm", type=float)
    p.add_argument("--rod-width-nm", dest="rod_width_nm", type=float)
    p.add_argument("--rod-depth-nm", dest="rod_depth_nm", type=float)
    p.add_argument("--rod-pitch-nm", dest="rod_pitch_nm", type=float)
    p.add_argument("--waist-um", dest="waist_um", type=float)
    p.add_argument("--beam", choices=("gaussian", "uniform"))
    add_common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("farfield", help="far-field intensity of a stored phase mask")
    p.add_argument("--mask", required=True, help="mask PGM (with its .json sidecar)")
    p.add_argument("--beam", choices=("gaussian", "uniform"))
    p.add_argument("--waist-um", dest="waist_um", type=float)
    add_common(p)
    p.set_defaults(func=cmd_farfield)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
