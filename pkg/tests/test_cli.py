import json
import re

import numpy as np
import pytest

from spinorb import design, tomography
from spinorb.cli import main
from spinorb.states import DensityMatrix


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBell:
    def test_noiseless_summary(self, tmp_path, capsys):
        code, out, _ = run(
            capsys, "bell", "--target", "psi+", "--noise", "none", "--outdir", tmp_path / "r"
        )
        assert code == 0
        m = re.match(r"target=psi\+ fidelity=([0-9.]+) converged=True", out)
        assert m and float(m.group(1)) >= 0.999
        assert (tmp_path / "r" / "counts.csv").exists()
        assert (tmp_path / "r" / "result_mle.json").exists()
        assert (tmp_path / "r" / "manifest.json").exists()

    def test_same_seed_is_byte_identical(self, tmp_path, capsys):
        args = ["bell", "--target", "phi-", "--noise", "poisson", "--seed", "21"]
        code1, _, _ = run(capsys, *args, "--outdir", tmp_path / "a")
        code2, _, _ = run(capsys, *args, "--outdir", tmp_path / "b")
        assert code1 == code2 == 0
        for name in ("counts.csv", "result_mle.json", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_replay(self, tmp_path, capsys):
        run(capsys, "bell", "--target", "psi-", "--seed", "4", "--outdir", tmp_path / "a")
        run(capsys, "bell", "--config", tmp_path / "a" / "manifest.json", "--outdir", tmp_path / "b")
        assert (tmp_path / "a" / "counts.csv").read_bytes() == (tmp_path / "b" / "counts.csv").read_bytes()

    def test_trials_summary(self, tmp_path, capsys):
        code, out, _ = run(
            capsys, "bell", "--target", "psi+", "--trials", "4", "--seed", "11",
            "--counts", "800", "--outdir", tmp_path / "t",
        )
        assert code == 0
        assert "trials=4" in out and "fidelity_median=" in out
        lines = (tmp_path / "t" / "trials.csv").read_text().splitlines()
        assert lines[0] == "trial,seed,fidelity,converged"
        assert len(lines) == 5
        assert lines[1].split(",")[1] == "11" and lines[4].split(",")[1] == "14"

    def test_invalid_target_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bell", "--target", "ghz", "--outdir", str(tmp_path)])
        assert exc.value.code == 2

    def test_overwrite_protection(self, tmp_path, capsys):
        args = ["bell", "--target", "psi+", "--noise", "none", "--outdir", tmp_path / "r"]
        assert run(capsys, *args)[0] == 0
        code, _, err = run(capsys, *args)
        assert code == 2 and "refusing to overwrite" in err
        assert run(capsys, *args, "--force")[0] == 0

    def test_config_file_with_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("target=phi+\nnoise=none\ncounts=2000\n")
        code, out, _ = run(
            capsys, "bell", "--config", cfg, "--counts", "500", "--outdir", tmp_path / "r"
        )
        assert code == 0 and "target=phi+" in out
        manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
        assert manifest["params"]["counts"] == 500.0   # CLI beats config file
        assert manifest["params"]["noise"] == "none"

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("tragets=psi+\n")
        code, _, err = run(capsys, "bell", "--config", cfg, "--outdir", tmp_path / "r")
        assert code == 2 and "unknown config keys" in err

    def test_nonconvergence_exits_1(self, tmp_path, capsys, monkeypatch):
        real = tomography.mle_reconstruct

        def exhausted(counts, n_ref, **kwargs):
            result = real(counts, n_ref, **kwargs)
            result.converged = False
            return result

        monkeypatch.setattr("spinorb.cli.tomography.mle_reconstruct", exhausted)
        code, _, err = run(
            capsys, "bell", "--target", "psi+", "--noise", "none", "--outdir", tmp_path / "r"
        )
        assert code == 1 and "converge" in err


class TestTomo:
    def _counts_file(self, tmp_path, capsys, target="psi+"):
        run(capsys, "bell", "--target", target, "--noise", "none", "--outdir", tmp_path / "gen")
        return tmp_path / "gen" / "counts.csv"

    def test_methods_agree_on_noiseless_counts(self, tmp_path, capsys):
        counts = self._counts_file(tmp_path, capsys)
        code, out, _ = run(
            capsys, "tomo", "--counts-file", counts, "--target", "psi+", "--outdir", tmp_path / "t"
        )
        assert code == 0
        dist = float(re.search(r"trace_distance=([0-9.e+-]+)", out).group(1))
        assert dist < 1e-6
        lin = json.loads((tmp_path / "t" / "result_linear.json").read_text())
        mle = json.loads((tmp_path / "t" / "result_mle.json").read_text())
        assert lin["method"] == "linear" and mle["method"] == "mle"
        assert lin["fidelity_vs_target"] >= 1 - 1e-8
        assert mle["fidelity_vs_target"] >= 0.999

    def test_missing_row_names_setting(self, tmp_path, capsys):
        counts = self._counts_file(tmp_path, capsys)
        lines = counts.read_text().splitlines()
        clipped = tmp_path / "clipped.csv"
        clipped.write_text("\n".join(line for line in lines if not line.startswith("0,")) + "\n")
        code, _, err = run(capsys, "tomo", "--counts-file", clipped, "--outdir", tmp_path / "t")
        assert code == 2
        assert "missing setting ids: [0]" in err

    def test_malformed_header(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        code, _, err = run(capsys, "tomo", "--counts-file", bad, "--outdir", tmp_path / "t")
        assert code == 2 and "malformed" in err

    def test_maximally_mixed_counts(self, tmp_path, capsys):
        rows = ["setting_id,label,counts,duration_s", "0,Intensity,1000,10.0"]
        rows += [f"{i},,250,10.0" for i in range(1, 17)]
        path = tmp_path / "mixed.csv"
        path.write_text("\n".join(rows) + "\n")
        code, out, _ = run(
            capsys, "tomo", "--counts-file", path, "--target", "psi+", "--outdir", tmp_path / "t"
        )
        assert code == 0
        payload = json.loads((tmp_path / "t" / "result_mle.json").read_text())
        rho = DensityMatrix.from_json(json.dumps(payload["rho"]))
        assert np.abs(rho.entries - np.eye(4) / 4).max() < 1e-3
        assert abs(payload["fidelity_vs_target"] - 0.5) < 1e-3


class TestDesign:
    def test_outputs_and_spectrum(self, tmp_path, capsys):
        code, out, _ = run(
            capsys, "design", "--winding", "1", "--grid", "128", "--outdir", tmp_path / "d"
        )
        assert code == 0
        for name in ("layout.csv", "layout.csv.json", "mask_spin_plus.pgm",
                     "mask_spin_minus.pgm", "farfield.pgm", "oam_spectrum.json",
                     "manifest.json"):
            assert (tmp_path / "d" / name).exists(), name
        spectrum = json.loads((tmp_path / "d" / "oam_spectrum.json").read_text())
        assert spectrum["-1"] >= 0.95
        assert "dominant_l=-1" in out
        sidecar = json.loads((tmp_path / "d" / "layout.csv.json").read_text())
        assert sidecar["rod_length_nm"] == pytest.approx(0.9 * 700.0)

    def test_winding_zero_flat_mask(self, tmp_path, capsys):
        code, out, _ = run(
            capsys, "design", "--winding", "0", "--grid", "128", "--outdir", tmp_path / "d"
        )
        assert code == 0
        spectrum = json.loads((tmp_path / "d" / "oam_spectrum.json").read_text())
        assert spectrum["0"] >= 0.99
        intensity = design.read_pgm16(tmp_path / "d" / "farfield.pgm")
        n = intensity.shape[0]
        assert intensity[n // 2, n // 2] == 65535

    def test_negated_winding_swaps_masks(self, tmp_path, capsys):
        run(capsys, "design", "--winding", "1", "--grid", "128", "--outdir", tmp_path / "p")
        run(capsys, "design", "--winding", "-1", "--grid", "128", "--outdir", tmp_path / "m")
        plus = (tmp_path / "p" / "mask_spin_plus.pgm").read_bytes()
        minus_of_negated = (tmp_path / "m" / "mask_spin_minus.pgm").read_bytes()
        assert plus == minus_of_negated

    def test_invalid_geometry_exits_2(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "design", "--rod-pitch-nm", "900", "--outdir", tmp_path / "d"
        )
        assert code == 2 and "invalid geometry" in err


class TestFarfield:
    def test_standalone_mask_to_intensity(self, tmp_path, capsys):
        run(capsys, "design", "--winding", "1", "--grid", "128", "--outdir", tmp_path / "d")
        code, out, _ = run(
            capsys, "farfield", "--mask", tmp_path / "d" / "mask_spin_plus.pgm",
            "--outdir", tmp_path / "f",
        )
        assert code == 0
        assert (tmp_path / "f" / "intensity.pgm").exists()
        on_axis = float(re.search(r"on_axis=([0-9.e+-]+)", out).group(1))
        peak = float(re.search(r"peak=([0-9.e+-]+)", out).group(1))
        assert on_axis < 1e-3 * peak

    def test_missing_mask_exits_2(self, tmp_path, capsys):
        code, _, err = run(capsys, "farfield", "--mask", tmp_path / "no.pgm", "--outdir", tmp_path / "f")
        assert code == 2 and "cannot read mask" in err


class TestOutdirEnv:
    def test_env_var_default(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("SPINORB_OUTDIR", str(tmp_path / "envdir"))
        code, _, _ = run(capsys, "bell", "--target", "psi+", "--noise", "none")
        assert code == 0
        assert (tmp_path / "envdir" / "counts.csv").exists()
