"""Tests for configuration parsing, the experiment harness and the ``vll`` command."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from vll import lab
from vll.cli import main
from vll.dynamics import minimal_n
from vll.spectral import read_snapshot, write_snapshot

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TG = """
[grid]
n = {n}

[physics]
nu_list = {nu}

[time]
T = 1.0
dt = 1e-3
snap_every = 50

[initial]
kind = taylor_green

[diagnostics]
scales = 4.0
deltas = 0.1

[output]
snapshots = none
"""


def write_cfg(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture(scope="module")
def golden(tmp_path_factory):
    """Two independent CLI executions of the golden configuration."""
    outs = []
    for i in range(2):
        out = tmp_path_factory.mktemp(f"golden{i}")
        code = main(["run", str(CONFIGS / "golden.ini"), "--out", str(out)])
        outs.append((code, out))
    return outs


class TestConfig:
    def test_policy_rejection_names_minimal_n(self, tmp_path, capsys):
        p = write_cfg(tmp_path, TG.format(n=64, nu="1e-2"))
        with pytest.raises(lab.ConfigError, match="minimal n is 80"):
            lab.load_config(p)
        assert main(["run", str(p)]) == 2
        assert "minimal n is 80" in capsys.readouterr().err

    def test_policy_checked_for_every_viscosity(self, tmp_path):
        p = write_cfg(tmp_path, TG.format(n=96, nu="1e-2, 1e-3"))
        with pytest.raises(lab.ConfigError) as exc:
            lab.load_config(p)
        assert any(f"minimal n is {minimal_n(1e-3)}" in e for e in exc.value.errors)
        assert not any("nu=0.01" in e for e in exc.value.errors)

    def test_all_errors_enumerated(self, tmp_path):
        text = TG.format(n=80, nu="1e-2").replace("T = 1.0", "T = -1").replace("snap_every = 50", "snap_every = 0")
        text += "\n[bogus]\nx = 1\n"
        with pytest.raises(lab.ConfigError) as exc:
            lab.parse_config(text)
        errs = exc.value.errors
        assert len(errs) >= 3
        assert any("time.T" in e for e in errs)
        assert any("snap_every" in e for e in errs)
        assert any("[bogus]" in e for e in errs)

    def test_missing_required(self):
        with pytest.raises(lab.ConfigError, match="physics.nu_list is required"):
            lab.parse_config("[time]\nT = 1\ndt = 0.1\n[initial]\nkind = taylor_green\n")

    def test_power_notation_and_auto_grid(self):
        cfg = lab.parse_config(TG.format(n="auto", nu="10^-2.5"))
        assert cfg.nu_list[0] == pytest.approx(10**-2.5)
        n = lab.grid_for(cfg, cfg.nu_list[0])
        assert n >= minimal_n(10**-2.5)
        assert min(cfg.scales) * math.sqrt(cfg.nu_list[0]) >= 4 * 2 * math.pi / n
        assert n % 3 != 0

    def test_initial_kind_params(self):
        with pytest.raises(lab.ConfigError, match="does not apply"):
            lab.parse_config(TG.format(n=80, nu="1e-2").replace("kind = taylor_green", "kind = taylor_green\nseed = 3"))

    def test_hash_stable(self):
        a = lab.parse_config(TG.format(n=80, nu="1e-2"))
        b = lab.parse_config(TG.format(n=80, nu="1e-2"))
        c = lab.parse_config(TG.format(n=96, nu="1e-2"))
        assert a.hash == b.hash != c.hash

    def test_worker_cap(self, monkeypatch):
        monkeypatch.setenv("VLL_THREADS", "1")
        assert lab._worker_count(3) == 1
        monkeypatch.setenv("VLL_THREADS", "8")
        assert lab._worker_count(3) == 3


class TestInitialData:
    @pytest.mark.parametrize("kind, params", [
        ("taylor_green", {}), ("shear", {"k": "2"}), ("random_smooth", {"seed": "3", "kmax": "6"}),
        ("mollified_vortex", {"scale": "2"}), ("vortex_sheet_approx", {"scale": "2"}),
    ])
    def test_mean_zero(self, kind, params):
        g = lab.TorusGrid(128)
        w = lab.initial_vorticity(kind, params, g, 1e-2)
        assert abs(w.values.mean()) <= 1e-12 * max(1.0, np.max(np.abs(w.values)))

    def test_random_smooth_grid_independent(self):
        # coefficients live on a fixed wavenumber box, so two grids sample the same field
        a = lab.initial_vorticity("random_smooth", {"seed": "5", "kmax": "6"}, lab.TorusGrid(64), 1e-2)
        b = lab.initial_vorticity("random_smooth", {"seed": "5", "kmax": "6"}, lab.TorusGrid(128), 1e-2)
        np.testing.assert_allclose(b.values[::2, ::2], a.values, atol=1e-12)

    def test_positive_vortex_mass(self):
        g = lab.TorusGrid(256)
        w = lab.initial_vorticity("mollified_vortex", {"mass": "0.5", "scale": "4"}, g, 1e-2)
        # positive core of mass 0.5 on a uniform negative background
        core = w.values + 0.5 / g.area
        assert g.integrate(core) == pytest.approx(0.5, rel=1e-12)
        assert np.min(core) >= -1e-12


class TestRun:
    def test_taylor_green_balance(self, tmp_path):
        cfg = lab.parse_config(TG.format(n=80, nu="1e-2"))
        rep = lab.run(cfg, outdir=tmp_path)
        with open(tmp_path / "ledger_nu=0.01.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert max(abs(float(r["balance_residual"])) for r in rows) <= 1e-6
        assert rep.exit_code == 0
        assert rep.table.rows[0]["nu"] == 0.01

    def test_single_viscosity_sweep_notice(self, tmp_path):
        cfg = lab.parse_config(TG.format(n=80, nu="1e-2"))
        rep = lab.sweep(cfg, write=False)
        notes = rep.summary["sweep"]["notices"]
        assert any("trend tests skipped" in n for n in notes)
        assert rep.summary["sweep"]["trends"] == []


class TestGoldenAndReport:
    def test_golden_passes(self, golden):
        for code, _ in golden:
            assert code == 0

    def test_byte_identical(self, golden):
        (_, a), (_, b) = golden
        for name in ("table.csv", "certificates.json", "ledger_nu=0.04.csv", "ledger_nu=0.02.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_report_all_green(self, golden, capsys):
        out = golden[0][1]
        assert main(["report", str(out)]) == 0
        text = capsys.readouterr().out
        assert "FAIL" not in text and "PASS" in text

    def test_report_missing(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "nothing")]) == 2
        assert "no diagnostic table" in capsys.readouterr().err

    def test_report_corrupted(self, golden, tmp_path, capsys):
        bad = tmp_path / "table.csv"
        text = (golden[0][1] / "table.csv").read_text().splitlines()
        bad.write_text(text[0] + "\n" + text[1].replace(",", ";", 3) + "\n")
        assert main(["report", str(bad)]) == 2
        assert "corrupted" in capsys.readouterr().err

    def test_report_certificate_failure(self, golden, tmp_path):
        text = (golden[0][1] / "table.csv").read_text()
        assert "l1_monotone:pass:" in text
        (tmp_path / "table.csv").write_text(text.replace("l1_monotone:pass:", "l1_monotone:fail:", 1))
        assert main(["report", str(tmp_path)]) == 1

    def test_snapshots_written(self, golden):
        snaps = sorted((golden[0][1] / "snapshots").glob("*.vll"))
        assert len(snaps) == 4  # first and last of two viscosities
        s = read_snapshot(snaps[0])
        assert s.nu in (0.02, 0.04)

    def test_diagnose_snapshots(self, golden, tmp_path, capsys):
        snaps = sorted(str(p) for p in (golden[0][1] / "snapshots").glob("nu=0.04_*.vll"))
        out = tmp_path / "diag.csv"
        assert main(["diagnose", *snaps, "--ell", "0.3", "--delta", "0.1", "--out", str(out)]) == 0
        rows = lab.DiagnosticTable.read_csv(out)
        assert rows[0]["nu"] == 0.04 and rows[0]["ell"] == 0.3
        assert rows[0]["certificates"]["s2_bound"][0]

    def test_diagnose_errors(self, tmp_path, capsys):
        assert main(["diagnose", str(tmp_path / "missing.vll"), "--ell", "0.3"]) == 2
        g = lab.TorusGrid(32)
        a = write_snapshot(tmp_path / "a.vll", lab.ScalarField(g, np.zeros((32, 32))), 0.1, 0.0)
        b = write_snapshot(tmp_path / "b.vll", lab.ScalarField(g, np.zeros((32, 32))), 0.2, 0.1)
        assert main(["diagnose", str(a), str(b), "--ell", "1.0"]) == 2
        assert "one viscosity" in capsys.readouterr().err


class TestGalleryCommand:
    def test_list(self, capsys):
        assert main(["gallery", "list"]) == 0
        out = capsys.readouterr().out
        assert "checkerboard n=<int>" in out
        assert "oscillating_stream kappa=<float> m=<int>" in out

    def test_emit(self, tmp_path, capsys):
        assert main(["gallery", "emit", "steady_shear", "m=2", "--out", str(tmp_path)]) == 0
        facts = json.loads((tmp_path / "steady_shear.facts.json").read_text())
        assert facts["params"] == {"m": 2}
        assert facts["facts"]["dissipation"]["pass"]
        assert read_snapshot(tmp_path / "steady_shear.vll").nu == 0.25

    @pytest.mark.parametrize("args", [["nope"], ["steady_shear"], ["steady_shear", "m"],
                                      ["steady_shear", "m=x"], ["steady_shear", "m=1", "z=2"]])
    def test_emit_errors(self, tmp_path, args, capsys):
        assert main(["gallery", "emit", *args, "--out", str(tmp_path)]) == 2
        assert "error" in capsys.readouterr().err
