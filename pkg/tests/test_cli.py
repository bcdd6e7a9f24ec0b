import subprocess
import sys

import pandas as pd
import pytest

from behavnk.cli import main
from behavnk.data import load_panel, packaged_panel_path

FAST_REPLICATE_CFG = """
seed = 3
alpha = 0.05
alpha_secondary = 0.10
gamma_min = 0.05
fix.sigma2_m = 1.0
start.m_bar = 0.6799
start.gamma = 1.9709
start.phi_pi = 1.5058
start.phi_x = 1.9672
start.rho_i = 0.4623
start.rho_d = 0.9591
start.rho_m = 0.8843
start.sigma2_d = 0.6536
start.sigma2_s = 0.7443
transform.x = none
transform.pi = none
transform.i = none
lm_groups = 1
lm_draws = 20
lm_level = 0.95
total_length = 240
burn_in_head = 20
burn_in_tail = 20
grid = 0.1:0.9:0.2,0.5:4.5:1.0
ml_max_iter = 200
"""


def _write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return str(path)


def _params_cfg(tmp_path):
    return _write_cfg(tmp_path, """
m_bar = 0.6799
gamma = 1.9709
phi_pi = 1.5058
phi_x = 1.9672
rho_i = 0.4623
rho_d = 0.9591
rho_m = 0.8843
sigma2_s = 0.7443
sigma2_d = 0.6536
sigma2_m = 1.0
""", name="params.cfg")


def test_console_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "behavnk.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "two-step-cs" in proc.stdout


def test_unknown_flag_exits_nonzero(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["solve", "--out", str(tmp_path), "--bogus-flag"])
    assert err.value.code == 2


def test_solve_writes_solution_and_manifest(tmp_path):
    cfg = _params_cfg(tmp_path)
    out = tmp_path / "solve"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    table = pd.read_csv(out / "solution.csv")
    assert set(table["matrix"]) >= {"c", "lambda", "sigma"}
    manifest = (out / "manifest.txt").read_text()
    assert "subcommand = solve" in manifest
    assert "m_bar = 0.6799" in manifest


def test_simulate_deterministic_given_seed(tmp_path):
    cfg = _write_cfg(tmp_path, "m_bar = 0.68\ngamma = 2.0\nphi_pi = 1.5\nphi_x = 0.5\n"
                               "rho_d = 0.9\nrho_m = 0.5\nsigma2_s = 0.2\n"
                               "total_length = 220\nburn_in_head = 10\nburn_in_tail = 10")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(out1), "--seed", "5"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(out2), "--seed", "5"]) == 0
    assert (out1 / "panel.csv").read_bytes() == (out2 / "panel.csv").read_bytes()
    panel = load_panel(out1 / "panel.csv")
    assert len(panel) == 200


def test_fit_ml_emits_table_and_params(tmp_path):
    cfg = _write_cfg(tmp_path, """
fix.sigma2_m = 1.0
start.m_bar = 0.6799
start.gamma = 1.9709
start.phi_pi = 1.5058
start.phi_x = 1.9672
start.rho_i = 0.4623
start.rho_d = 0.9591
start.rho_m = 0.8843
start.sigma2_d = 0.6536
start.sigma2_s = 0.7443
transform.x = none
transform.pi = none
transform.i = none
""")
    out = tmp_path / "ml"
    assert main(["fit-ml", "--config", cfg, "--data", str(packaged_panel_path()),
                 "--out", str(out)]) == 0
    table = pd.read_csv(out / "ml_estimates.csv")
    assert list(table.columns) == ["parameter", "estimate", "sd", "t_stat"]
    assert len(table) == 10
    fixed_row = table[table["parameter"] == "sigma2_m"].iloc[0]
    assert fixed_row["estimate"] == 1.0 and fixed_row["sd"] == 0.0
    assert (out / "ml_params.cfg").exists()


def test_lm_cs_outputs_draws_and_intervals(tmp_path):
    cfg = _write_cfg(tmp_path, """
m_bar = 0.6799
gamma = 1.9709
phi_pi = 1.5058
phi_x = 1.9672
rho_i = 0.4623
rho_d = 0.9591
rho_m = 0.8843
sigma2_s = 0.7443
sigma2_d = 0.6536
sigma2_m = 1.0
lm_sample = simulate
lm_groups = 1
lm_draws = 30
total_length = 240
burn_in_head = 20
burn_in_tail = 20
""")
    out = tmp_path / "lmcs"
    assert main(["lm-cs", "--config", cfg, "--out", str(out), "--seed", "9"]) == 0
    draws = pd.read_csv(out / "lmcs_draws_group1.csv")
    assert "lm_stat" in draws.columns
    intervals = pd.read_csv(out / "lmcs_intervals.csv")
    assert set(intervals["parameter"]) == {"m_bar", "gamma", "phi_pi", "phi_x", "rho_i"}


def test_fit_gmm_reports_point(tmp_path, gmm_panel):
    data = tmp_path / "panel.csv"
    gmm_panel.to_csv(data)
    out = tmp_path / "gmm"
    cfg = _write_cfg(tmp_path, "transform.x = none\ntransform.pi = none\ntransform.i = none")
    assert main(["fit-gmm", "--config", cfg, "--data", str(data), "--out", str(out),
                 "--equation", "nkpc", "--grid", "0.1:0.9:0.1,0.5:6:0.5"]) == 0
    fit = pd.read_csv(out / "gmm_fit.csv")
    assert fit.loc[0, "equation"] == "nkpc"
    assert 0.0 <= fit.loc[0, "m_bar"] <= 1.0


def test_two_step_cs_outputs(tmp_path, gmm_panel):
    data = tmp_path / "panel.csv"
    gmm_panel.to_csv(data)
    out = tmp_path / "cs"
    cfg = _write_cfg(tmp_path, "transform.x = none\ntransform.pi = none\ntransform.i = none")
    assert main(["two-step-cs", "--config", cfg, "--data", str(data), "--out", str(out),
                 "--equation", "nkpc", "--grid", "0.1:0.9:0.2,0.5:4.5:1.0"]) == 0
    grid = pd.read_csv(out / "grid_nkpc.csv")
    assert list(grid.columns) == ["m_bar", "gamma", "S", "K", "W", "in_cs_r", "in_cs_n"]
    summary = pd.read_csv(out / "summary_nkpc.csv")
    assert list(summary["parameter"]) == ["m_bar", "gamma", "joint"]
    svg = (out / "region_nkpc.svg").read_text()
    assert svg.startswith("<?xml")


def test_invalid_distortion_config_fails_cleanly(tmp_path, gmm_panel, capsys):
    data = tmp_path / "panel.csv"
    gmm_panel.to_csv(data)
    code = main(["two-step-cs", "--data", str(data), "--out", str(tmp_path / "x"),
                 "--equation", "is", "--gamma-min", "0.97",
                 "--grid", "0.2:0.8:0.2,1:4:1"])
    assert code == 2
    assert "gamma_min" in capsys.readouterr().err


def test_replicate_file_inventory(tmp_path):
    cfg = _write_cfg(tmp_path, FAST_REPLICATE_CFG)
    out = tmp_path / "rep"
    assert main(["replicate", "--config", cfg, "--out", str(out)]) == 0
    expected = [f"table{j}.csv" for j in range(1, 7)] + ["fig2.svg", "fig3.svg", "manifest.txt"]
    for name in expected:
        assert (out / name).exists(), name
    manifest = (out / "manifest.txt").read_text()
    # Numeric defaults in effect are echoed.
    assert "hac_lags = 4" in manifest
    assert "lm_level = 0.95" in manifest
