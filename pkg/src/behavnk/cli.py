"""Command-line interface: solve, simulate, estimate, and replicate.

Every run writes a ``manifest.txt`` echoing the fully resolved
configuration (defaults included), so outputs can be reproduced from the
manifest alone.  Configuration files use flat ``name = value`` lines; CLI
flags override file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import reporting
from .data import TimeSeriesPanel, apply_transforms, load_panel, packaged_panel_path
from .errors import BehavnkError, ConfigError
from .gmm import build_moment_problem, fit_cugmm, point_statistics
from .likelihood import (
    DEFAULT_FIXED,
    MaximumLikelihoodEstimator,
    ScoreProjectionSet,
)
from .params import PARAM_NAMES, StructuralParams, parse_config_text
from .simulate import SimulationPlan, simulate_observables, spawn_seeds
from .solve import is_restricted_regime, solve_full_re, solve_restricted
from .params import derive_reduced
from .twostep import GridSpec, TwoStepConfidenceSet, grid_invert, _evaluate_grid

_TRUE_STRINGS = {"1", "true", "yes", "on"}


def _as_bool(text) -> bool:
    return str(text).strip().lower() in _TRUE_STRINGS


class RunConfig:
    """Flat key-value configuration with resolution tracking.

    Every value read through :meth:`get` is recorded (defaults included),
    so the manifest reflects each setting actually in effect.
    """

    def __init__(self, values=None):
        self.values = dict(values or {})
        self.resolved = {}

    def get(self, key, default, cast=str):
        raw = self.values.get(key, default)
        try:
            value = cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from exc
        self.resolved[key] = value
        return value

    def prefixed(self, prefix) -> dict:
        out = {}
        for key, value in self.values.items():
            if key.startswith(prefix + "."):
                out[key[len(prefix) + 1:]] = value
                self.resolved[key] = value
        return out


def _read_config_file(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    return parse_config_text(text)


def _merge_cli_overrides(values, args) -> dict:
    overrides = {
        "data": args.data,
        "seed": args.seed,
        "alpha": args.alpha,
        "gamma_min": args.gamma_min,
        "grid": args.grid,
        "equation": args.equation,
    }
    merged = dict(values)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def _structural_params(cfg: RunConfig) -> StructuralParams:
    defaults = StructuralParams()
    values = {n: cfg.get(n, getattr(defaults, n), float) for n in PARAM_NAMES}
    return StructuralParams(**values)


def _default_transforms() -> dict:
    # Sample detrending defaults: the gap is linearly detrended, rates are
    # demeaned.  Override per column with ``transform.<col> = none``.
    return {"x": "linear_detrend", "pi": "demean", "i": "demean"}


def _load_input_panel(cfg: RunConfig, columns) -> TimeSeriesPanel:
    data_path = cfg.get("data", str(packaged_panel_path()), str)
    start = cfg.get("window.start", "", str) or None
    end = cfg.get("window.end", "", str) or None
    panel = load_panel(data_path, columns=columns, window=(start, end) if (start or end) else None)
    transforms = _default_transforms()
    transforms.update(cfg.prefixed("transform"))
    transforms = {
        col: ops for col, ops in transforms.items()
        if col in panel.columns and ops != "none"
    }
    for col in transforms:
        cfg.resolved[f"transform.{col}"] = transforms[col]
    if transforms:
        panel = apply_transforms(panel, transforms)
    return panel


def _fixed_from_cfg(cfg: RunConfig) -> dict:
    fixed = dict(DEFAULT_FIXED)
    for name, value in cfg.prefixed("fix").items():
        if name not in PARAM_NAMES:
            raise ConfigError(f"fix.{name}: unknown parameter")
        fixed[name] = float(value)
    for name, value in fixed.items():
        cfg.resolved[f"fix.{name}"] = value
    return fixed


def _start_from_cfg(cfg: RunConfig) -> dict:
    start = {}
    for name, value in cfg.prefixed("start").items():
        if name not in PARAM_NAMES:
            raise ConfigError(f"start.{name}: unknown parameter")
        start[name] = float(value)
    return start


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands


def cmd_solve(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    params = _structural_params(cfg)
    solution = solve_full_re(params)
    rows = []
    for r, obs in enumerate(("x", "pi", "i")):
        for c, state in enumerate(solution.state_names):
            rows.append({"matrix": "c", "row": obs, "col": state,
                         "value": solution.c_matrix[r, c]})
    for r, sr in enumerate(solution.state_names):
        for c, sc in enumerate(solution.state_names):
            rows.append({"matrix": "lambda", "row": sr, "col": sc,
                         "value": solution.lambda_mat[r, c]})
    for j, shock in enumerate(("eps_m", "eps_d", "eps_s")):
        rows.append({"matrix": "sigma", "row": shock, "col": shock,
                     "value": solution.sigma_mat[j, j]})
    if is_restricted_regime(params):
        closed = solve_restricted(derive_reduced(params), params.m_bar,
                                  params.rho_m, params.rho_d)
        for name in ("a1", "a2", "b1", "b2"):
            rows.append({"matrix": "closed_form", "row": name, "col": name,
                         "value": getattr(closed, name)})
    reporting.write_table(pd.DataFrame(rows), out / "solution.csv")
    reporting.write_manifest(out / "manifest.txt", "solve", cfg.resolved)
    return 0


def cmd_simulate(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    params = _structural_params(cfg)
    plan = SimulationPlan(
        params=params,
        total_length=cfg.get("total_length", 400, int),
        burn_in_head=cfg.get("burn_in_head", 100, int),
        burn_in_tail=cfg.get("burn_in_tail", 100, int),
        seed=cfg.get("seed", 0, int),
    )
    panel = simulate_observables(plan)
    panel.to_csv(out / "panel.csv")
    reporting.write_manifest(out / "manifest.txt", "simulate", cfg.resolved)
    return 0


def _fit_ml(cfg: RunConfig):
    panel = _load_input_panel(cfg, columns=("x", "pi", "i"))
    fixed = _fixed_from_cfg(cfg)
    start = _start_from_cfg(cfg)
    est = MaximumLikelihoodEstimator(
        fixed=fixed,
        start=start or None,
        gtol=cfg.get("ml_gtol", 1e-5, float),
        max_iter=cfg.get("ml_max_iter", 500, int),
    )
    est.fit(panel)
    return est, panel


def cmd_fit_ml(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    est, _ = _fit_ml(cfg)
    reporting.write_table(reporting.ml_table(est), out / "ml_estimates.csv")
    with open(out / "ml_params.cfg", "w", encoding="utf-8") as fh:
        fh.write(est.params_.to_config_text())
    reporting.write_manifest(out / "manifest.txt", "fit-ml", cfg.resolved)
    return 0


def _run_projections(cfg: RunConfig, base_params, groups, seed):
    sub_seeds = spawn_seeds(seed, len(groups) + 1)
    plan = SimulationPlan(
        params=base_params,
        total_length=cfg.get("total_length", 400, int),
        burn_in_head=cfg.get("burn_in_head", 100, int),
        burn_in_tail=cfg.get("burn_in_tail", 100, int),
        seed=sub_seeds[0],
    )
    sim_panel = simulate_observables(plan)
    n_draws = cfg.get("lm_draws", 10000, int)
    level = cfg.get("lm_level", 0.95, float)
    projections = {}
    for j, group in enumerate(groups):
        proj = ScoreProjectionSet(
            base_params=base_params, group=group, n_draws=n_draws,
            level=level, seed=sub_seeds[j + 1],
        )
        proj.fit(sim_panel)
        projections[group] = proj
    return projections


def cmd_lm_cs(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    groups = [int(g) for g in str(cfg.get("lm_groups", "1,2,3", str)).split(",")]
    base = _structural_params(cfg)
    sample_mode = cfg.get("lm_sample", "data", str)
    if sample_mode == "simulate":
        # Test a sample simulated at the config's parameter point.
        projections = _run_projections(cfg, base, groups, cfg.get("seed", 0, int))
    elif sample_mode == "data":
        panel = _load_input_panel(cfg, columns=("x", "pi", "i"))
        n_draws = cfg.get("lm_draws", 10000, int)
        level = cfg.get("lm_level", 0.95, float)
        seeds = spawn_seeds(cfg.get("seed", 0, int), len(groups))
        projections = {}
        for j, group in enumerate(groups):
            proj = ScoreProjectionSet(base_params=base, group=group,
                                      n_draws=n_draws, level=level, seed=seeds[j])
            proj.fit(panel)
            projections[group] = proj
    else:
        raise ConfigError(f"lm_sample must be 'data' or 'simulate', got {sample_mode!r}")
    for group, proj in projections.items():
        reporting.write_table(proj.retained_, out / f"lmcs_draws_group{group}.csv")
    reporting.write_table(reporting.projection_table(projections),
                          out / "lmcs_intervals.csv")
    reporting.write_manifest(out / "manifest.txt", "lm-cs", cfg.resolved)
    return 0


def _gmm_columns(equation):
    return ("x", "pi", "i", "labor_share") if equation == "nkpc" else ("x", "pi", "i")


def cmd_fit_gmm(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    equation = cfg.get("equation", "is", str)
    panel = _load_input_panel(cfg, columns=_gmm_columns(equation))
    grid = GridSpec.parse(cfg.get("grid", "coarse", str))
    problem = build_moment_problem(
        panel, equation,
        instruments=cfg.get(f"instruments.{equation}", "", str) or None,
        hac_lags=cfg.get("hac_lags", 4, int),
        r_n_column=cfg.get("r_n_column", "", str) or None,
        fd_steps=grid.cell / 2.0,
    )
    fit = fit_cugmm(problem, grid.points())
    stats = point_statistics(problem, fit.theta)
    sd = np.sqrt(np.abs(np.diag(fit.cov)))
    frame = pd.DataFrame(
        [
            {
                "equation": equation,
                "m_bar": fit.theta[0],
                "gamma": fit.theta[1],
                "sd_m_bar": sd[0],
                "sd_gamma": sd[1],
                "objective": fit.objective,
                "s_stat": stats["S"],
            }
        ]
    )
    reporting.write_table(frame, out / "gmm_fit.csv")
    reporting.write_manifest(out / "manifest.txt", "fit-gmm", cfg.resolved)
    return 0


def cmd_two_step_cs(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    equation = cfg.get("equation", "is", str)
    panel = _load_input_panel(cfg, columns=_gmm_columns(equation))
    cs = TwoStepConfidenceSet(
        equation=equation,
        alpha=cfg.get("alpha", 0.05, float),
        gamma_min=cfg.get("gamma_min", 0.05, float),
        grid=cfg.get("grid", "coarse", str),
        hac_lags=cfg.get("hac_lags", 4, int),
        instruments=cfg.get(f"instruments.{equation}", "", str) or None,
        r_n_column=cfg.get("r_n_column", "", str) or None,
    )
    cs.fit(panel)
    reporting.write_table(reporting.grid_table(cs.result_), out / f"grid_{equation}.csv")
    reporting.write_table(reporting.twostep_table(cs.result_), out / f"summary_{equation}.csv")
    reporting.region_plot(cs.result_, out / f"region_{equation}.svg",
                          title=f"{equation.upper()} equation")
    reporting.write_manifest(out / "manifest.txt", "two-step-cs", cfg.resolved)
    return 0


def cmd_replicate(args) -> int:
    cfg = RunConfig(_merge_cli_overrides(_read_config_file(args.config), args))
    out = _out_dir(args)
    seed = cfg.get("seed", 0, int)
    alpha = cfg.get("alpha", 0.05, float)
    alpha_secondary = cfg.get("alpha_secondary", 0.10, float)
    gamma_min = cfg.get("gamma_min", 0.05, float)

    # Likelihood fit on the input panel.
    est, _ = _fit_ml(cfg)
    reporting.write_table(reporting.ml_table(est), out / "table1.csv")

    # Projection sets on a sample simulated at the fitted point.
    groups = [int(g) for g in str(cfg.get("lm_groups", "1,2,3", str)).split(",")]
    projections = _run_projections(cfg, est.params_, groups, seed)
    reporting.write_table(reporting.projection_table(projections), out / "table2.csv")

    # Two-step confidence sets for both equations at both levels, reusing
    # the grid statistics across levels (they do not depend on alpha).
    grid = GridSpec.parse(cfg.get("grid", "coarse", str))
    table_map = {
        ("is", alpha): ("table3.csv", "fig2.svg"),
        ("nkpc", alpha): ("table4.csv", "fig3.svg"),
        ("is", alpha_secondary): ("table5.csv", None),
        ("nkpc", alpha_secondary): ("table6.csv", None),
    }
    for equation in ("is", "nkpc"):
        panel = _load_input_panel(cfg, columns=_gmm_columns(equation))
        problem = build_moment_problem(
            panel, equation,
            instruments=cfg.get(f"instruments.{equation}", "", str) or None,
            hac_lags=cfg.get("hac_lags", 4, int),
            r_n_column=cfg.get("r_n_column", "", str) or None,
            fd_steps=grid.cell / 2.0,
        )
        stats_frame = _evaluate_grid(problem, grid.points())
        for level in (alpha, alpha_secondary):
            result = grid_invert(problem, grid, alpha=level, gamma_min=gamma_min,
                                 stats_frame=stats_frame)
            table_name, fig_name = table_map[(equation, level)]
            reporting.write_table(reporting.twostep_table(result), out / table_name)
            if fig_name:
                reporting.region_plot(result, out / fig_name,
                                      title=f"{equation.upper()} equation")
    reporting.write_manifest(out / "manifest.txt", "replicate", cfg.resolved)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="behavnk",
        description=(
            "Behavioral New Keynesian model: solving, simulation, likelihood "
            "and GMM estimation with identification-robust confidence sets."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value configuration file")
    common.add_argument("--data", help="input panel CSV")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, help="reproducibility seed")
    common.add_argument("--alpha", type=float, help="nominal test size")
    common.add_argument("--gamma-min", dest="gamma_min", type=float,
                        help="minimum coverage distortion considered")
    common.add_argument("--grid", help="grid preset or lo:hi:step,lo:hi:step")
    common.add_argument("--equation", choices=("is", "nkpc"),
                        help="single-equation choice")

    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, func, summary in (
        ("solve", cmd_solve, "solve the model and write its state-space form"),
        ("simulate", cmd_simulate, "simulate an observable panel"),
        ("fit-ml", cmd_fit_ml, "maximum likelihood estimation"),
        ("lm-cs", cmd_lm_cs, "score-test projection confidence sets"),
        ("fit-gmm", cmd_fit_gmm, "continuous-updating GMM point estimate"),
        ("two-step-cs", cmd_two_step_cs, "two-step robust confidence sets"),
        ("replicate", cmd_replicate, "full table and figure pipeline"),
    ):
        p = sub.add_parser(name, parents=[common], help=summary)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BehavnkError as exc:
        print(f"behavnk {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
