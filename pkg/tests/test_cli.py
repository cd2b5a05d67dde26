import csv
import math
import os

import pytest

from rfuniform.cli import (GridSpec, RunConfig, config_to_ini, load_config,
                           main)
from rfuniform.errors import ConfigInvalid


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_grid_spec_validation():
    with pytest.raises(ConfigInvalid):
        GridSpec(1.0, 2.0, 1).values()
    assert len(GridSpec(1.0, 2.0, 5).values()) == 5
    logv = GridSpec(1.0, 100.0, 3, log=True).values()
    assert abs(logv[1] - 10.0) < 1e-12


def test_paper_defaults_fig2():
    cfg = load_config(preset="fig2")
    assert (cfg.d, cfg.N, cfg.n, cfg.replicates) == (200, 500, 300, 20)
    assert cfg.activation == "relu"
    assert cfg.lambda_grid.lo == 0.426
    assert cfg.lambda_grid_t.lo == 0.21
    # the simulator compares against realized ratios
    p = cfg.sim_model_params()
    assert (p.psi1, p.psi2) == (2.5, 1.5)


def test_overrides_win(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[params]\npsi1 = 3.0\ntau_sq = 0.2\n")
    cfg = load_config(str(ini), overrides=["tau_sq=0.5", "replicates=4"])
    assert cfg.psi1 == 3.0
    assert cfg.tau_sq == 0.5
    assert cfg.replicates == 4
    with pytest.raises(ConfigInvalid):
        load_config(str(ini), overrides=["bogus_key=1"])
    with pytest.raises(ConfigInvalid):
        load_config(str(ini), overrides=["replicates"])


def test_config_roundtrip(tmp_path):
    cfg = load_config(preset="fig2", overrides=["tau_sq=0.125"])
    ini = tmp_path / "roundtrip.ini"
    ini.write_text(config_to_ini(cfg))
    again = load_config(str(ini))
    assert again == cfg
    assert config_to_ini(again) == config_to_ini(cfg)


def test_invalid_grid_exit_code(tmp_path):
    out = tmp_path / "x.csv"
    rc = main(["--paper-defaults", "fig2", "--set", "replicates=1",
               "--output", str(out), "simulate"])
    assert rc == 2


def test_theory_csv_schema_and_roundtrip(tmp_path):
    out = tmp_path / "theory.csv"
    rc = main(["--paper-defaults", "fig2", "--output", str(out), "theory"])
    assert rc == 0
    rows = read_csv(str(out))
    assert list(rows[0]) == ["lambda", "lambda_bar", "ubar", "a_u", "lambda_t",
                             "tbar", "a_t", "risk", "norm"]
    assert len(rows) == 8
    lam = float(rows[0]["lambda"])
    assert lam == 0.426          # 17-significant-digit round trip is exact
    lb = float(rows[0]["lambda_bar"])
    assert abs(lb - lam / (0.25 - 1 / (2 * math.pi))) < 1e-13 * lb


def test_simulate_deterministic_and_compare(tmp_path):
    sim_out = tmp_path / "sim.csv"
    rc = main(["--paper-defaults", "fig2", "--set", "d=40", "--set", "N=100",
               "--set", "n=60", "--set", "replicates=3",
               "--output", str(sim_out), "simulate", "--families", "U,MIN"])
    assert rc == 0
    first = sim_out.read_bytes()
    rc = main(["--paper-defaults", "fig2", "--set", "d=40", "--set", "N=100",
               "--set", "n=60", "--set", "replicates=3",
               "--output", str(sim_out), "simulate", "--families", "U,MIN"])
    assert rc == 0
    assert sim_out.read_bytes() == first
    rep_path = tmp_path / "sim_replicates.csv"
    assert rep_path.exists()
    assert len(read_csv(str(rep_path))) == 3 * (8 + 1)   # 8 lambdas + min-norm

    theory_out = tmp_path / "theory.csv"
    rc = main(["--paper-defaults", "fig2", "--set", "psi1=2.5", "--set",
               "psi2=1.5", "--output", str(theory_out), "theory"])
    assert rc == 0
    cmp_out = tmp_path / "cmp.csv"
    rc = main(["--output", str(cmp_out), "compare", "--theory",
               str(theory_out), "--sim", str(sim_out), "--family", "U"])
    assert rc == 0
    rows = read_csv(str(cmp_out))
    assert len(rows) == 16       # 8 lambdas x 2 coordinates
    assert all(r["family"] == "U" for r in rows)


def test_powerlaw_command(tmp_path):
    src = tmp_path / "pts.csv"
    with open(src, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x in (1.0, 2.0, 4.0, 8.0, 16.0):
            w.writerow([x, 5.0 * x ** -2])
    out = tmp_path / "fit.csv"
    rc = main(["--output", str(out), "powerlaw", "--input", str(src),
               "--x-col", "x", "--y-col", "y", "--window", "1", "16"])
    assert rc == 0
    row = read_csv(str(out))[0]
    assert abs(float(row["slope"]) + 2.0) < 1e-10


def test_logdet_check_command(tmp_path):
    out = tmp_path / "logdet.csv"
    rc = main(["--paper-defaults", "fig2", "--set", "d=60", "--set", "N=150",
               "--set", "n=90", "--set", "replicates=2",
               "--output", str(out), "logdet-check", "--u", "0.5",
               "--lambdas", "1.0"])
    assert rc == 0
    rows = read_csv(str(out))
    assert len(rows) == 2
    assert all(float(r["abs_diff"]) < 0.5 for r in rows)


def test_kernel_limit_command(tmp_path):
    ini = tmp_path / "kernel.ini"
    ini.write_text("[params]\ntau_sq = 0.1\nactivation = shifted_relu\n"
                   "[grids]\npsi2_min = 100\npsi2_max = 1000\npsi2_count = 3\n"
                   "psi2_log = true\n")
    out = tmp_path / "kernel.csv"
    rc = main(["--config", str(ini), "--output", str(out),
               "kernel-limit", "--quantity", "NORM"])
    assert rc == 0
    rows = read_csv(str(out))
    assert len(rows) == 3
    assert all(r["quantity"] == "NORM" for r in rows)
    # the norm level grows ~ psi2 in the noisy kernel regime
    vals = [float(r["value"]) for r in rows]
    assert vals[0] < vals[1] < vals[2]


def test_main_unknown_preset():
    with pytest.raises(SystemExit):
        main(["--paper-defaults", "fig9", "theory"])
