"""Result tables, confidence-region figures, and run manifests."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

#: Parameter rows of the likelihood summary table, in reporting order.
ML_TABLE_ROWS = (
    "m_bar", "gamma", "phi_pi", "phi_x", "rho_i",
    "rho_d", "rho_m", "sigma2_d", "sigma2_s", "sigma2_m",
)


def write_table(frame: pd.DataFrame, path) -> None:
    """Write a result table as CSV with stable formatting."""
    frame.to_csv(path, index=False, lineterminator="\n")


def ml_table(estimator) -> pd.DataFrame:
    """Likelihood summary: (parameter, estimate, sd, t_stat) rows.

    Free parameters carry their inverse-Hessian standard deviations;
    parameters held fixed appear with zero sd and t-stat.
    """
    rows = []
    for name in ML_TABLE_ROWS:
        if name in estimator.free_names_:
            est = float(estimator.estimates_[name])
            sd = float(estimator.sd_[name])
            t = float(estimator.tstats_[name])
        else:
            est = float(getattr(estimator.params_, name))
            sd = 0.0
            t = 0.0
        rows.append({"parameter": name, "estimate": est, "sd": sd, "t_stat": t})
    return pd.DataFrame(rows)


def projection_table(projections: dict) -> pd.DataFrame:
    """Combine group projection sets into a per-parameter interval table.

    ``projections`` maps group id to a fitted projection estimator.  The
    base group (1) supplies the common five parameters; each larger group
    contributes only its extra parameter.
    """
    rows = {}
    for group_id in sorted(projections):
        est = projections[group_id]
        names = est.tested_names_
        take = names if group_id == min(projections) else names[5:]
        for name in take:
            rows[name] = {
                "parameter": name,
                "lower": float(est.intervals_.loc[name, "lower"]),
                "upper": float(est.intervals_.loc[name, "upper"]),
                "group": group_id,
                "n_accepted": est.n_accepted_,
            }
    return pd.DataFrame(list(rows.values()))


def twostep_table(result) -> pd.DataFrame:
    """Per-parameter interval table plus the whole-set distortion cutoff."""
    rows = []
    for name in result.param_names:
        r = result.intervals.loc[name]
        rows.append(
            {
                "parameter": name,
                "cs_r_lower": r["cs_r_lower"],
                "cs_r_upper": r["cs_r_upper"],
                "cs_n_lower": r["cs_n_lower"],
                "cs_n_upper": r["cs_n_upper"],
                "gamma_hat": r["gamma_hat"],
            }
        )
    rows.append(
        {
            "parameter": "joint",
            "cs_r_lower": np.nan,
            "cs_r_upper": np.nan,
            "cs_n_lower": np.nan,
            "cs_n_upper": np.nan,
            "gamma_hat": result.gamma_hat,
        }
    )
    return pd.DataFrame(rows)


def grid_table(result) -> pd.DataFrame:
    """Grid CSV with per-point statistics and set membership."""
    cols = ["m_bar", "gamma", "S", "K", "W", "in_cs_r", "in_cs_n"]
    return result.grid[cols].copy()


def region_plot(result, path, title=None) -> None:
    """Shade the robust and non-robust regions over the parameter grid.

    Writes a standalone vector (SVG) file with deterministic content:
    figure metadata dates are suppressed and hashed ids are salted with a
    fixed string.
    """
    frame = result.grid
    m_vals = np.unique(frame["m_bar"].to_numpy())
    g_vals = np.unique(frame["gamma"].to_numpy())
    shape = (m_vals.size, g_vals.size)
    in_r = frame["in_cs_r"].to_numpy().reshape(shape)
    in_n = frame["in_cs_n"].to_numpy().reshape(shape)

    with plt.rc_context({"svg.hashsalt": "behavnk"}):
        fig, ax = plt.subplots(figsize=(7.0, 5.0))
        extent = (g_vals.min(), g_vals.max(), m_vals.min(), m_vals.max())
        ax.imshow(
            np.where(in_r, 1.0, np.nan), origin="lower", extent=extent,
            aspect="auto", cmap="Blues", vmin=0, vmax=2, alpha=0.45,
        )
        ax.imshow(
            np.where(in_n, 1.0, np.nan), origin="lower", extent=extent,
            aspect="auto", cmap="Oranges", vmin=0, vmax=2, alpha=0.55,
        )
        point = result.point_estimate.theta
        ax.plot(point[1], point[0], marker="*", markersize=12, color="black",
                linestyle="none")
        ax.set_xlabel("gamma (risk aversion)")
        ax.set_ylabel("m_bar (cognitive discounting)")
        label = title or "Confidence regions"
        ax.set_title(
            f"{label}: robust (blue), non-robust (orange); "
            f"distortion cutoff {result.gamma_hat:.3f}"
        )
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def write_manifest(path, subcommand, resolved: dict) -> None:
    """Echo the fully resolved run configuration, one ``key = value`` line."""
    lines = [f"subcommand = {subcommand}"]
    for key in sorted(resolved):
        lines.append(f"{key} = {resolved[key]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
