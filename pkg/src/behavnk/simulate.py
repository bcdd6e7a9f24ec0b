"""Seeded simulation of the shock laws and the model observables.

All randomness flows through ``numpy.random.Generator`` seeded from a
64-bit integer, so identical plans produce bit-identical output.  Parallel
Monte Carlo replications should derive child seeds with
:func:`spawn_seeds`, which splits the root seed into independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import TimeSeriesPanel
from .errors import DomainError
from .params import StructuralParams
from .solve import solve_full_re


@dataclass(frozen=True)
class SimulationPlan:
    """Recipe for one simulated sample.

    ``total_length`` periods are generated from a zero (steady-state)
    shock initialization and the first ``burn_in_head`` and last
    ``burn_in_tail`` observations are discarded.
    """

    params: StructuralParams
    total_length: int = 400
    burn_in_head: int = 100
    burn_in_tail: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.total_length <= self.burn_in_head + self.burn_in_tail:
            raise DomainError(
                "total_length must exceed burn_in_head + burn_in_tail "
                f"({self.total_length} <= {self.burn_in_head} + {self.burn_in_tail})"
            )

    @property
    def kept_length(self) -> int:
        return self.total_length - self.burn_in_head - self.burn_in_tail


@dataclass(frozen=True)
class ShockPath:
    """Simulated shock levels and innovations, full length (no burn-in cut)."""

    eta_m: np.ndarray
    eta_d: np.ndarray
    eps_m: np.ndarray
    eps_d: np.ndarray
    eps_s: np.ndarray


def spawn_seeds(seed, n) -> list:
    """Derive ``n`` independent child seeds from a root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_shocks(plan: SimulationPlan) -> ShockPath:
    """Draw the AR(1) shock paths of the plan, full ``total_length``.

    Innovations are i.i.d. Gaussian with diagonal covariance
    ``diag(s2_s, s2_d, s2_m)``; the AR levels start at zero.
    """
    p = plan.params
    rng = np.random.default_rng(plan.seed)
    T = plan.total_length
    # One draw call in a fixed (s, d, m) column order keeps the stream layout
    # stable even when some variances are zero.
    z = rng.standard_normal((T, 3))
    eps_s = z[:, 0] * np.sqrt(p.sigma2_s)
    eps_d = z[:, 1] * np.sqrt(p.sigma2_d)
    eps_m = z[:, 2] * np.sqrt(p.sigma2_m)
    eta_m = np.empty(T)
    eta_d = np.empty(T)
    prev_m = 0.0
    prev_d = 0.0
    for t in range(T):
        prev_m = p.rho_m * prev_m + eps_m[t]
        prev_d = p.rho_d * prev_d + eps_d[t]
        eta_m[t] = prev_m
        eta_d[t] = prev_d
    return ShockPath(eta_m=eta_m, eta_d=eta_d, eps_m=eps_m, eps_d=eps_d, eps_s=eps_s)


def build_demo_panel(params: StructuralParams, n_quarters=219, start="1962Q2",
                     seed=0) -> TimeSeriesPanel:
    """Model-generated quarterly panel with calendar labels and a labor share.

    Used to build the packaged demo dataset: the observables are simulated
    at ``params`` (with a 100-quarter burn-in on each side) and a labor
    share proxy is attached as the marginal-cost object
    ``(gamma + phi) x_t`` plus an AR(1) measurement disturbance.
    """
    seeds = spawn_seeds(seed, 2)
    plan = SimulationPlan(
        params=params,
        total_length=n_quarters + 200,
        burn_in_head=100,
        burn_in_tail=100,
        seed=seeds[0],
    )
    panel = simulate_observables(plan)
    rng = np.random.default_rng(seeds[1])
    noise = np.empty(n_quarters)
    level = 0.0
    innovations = 0.3 * rng.standard_normal(n_quarters)
    for t in range(n_quarters):
        level = 0.7 * level + innovations[t]
        noise[t] = level
    labor_share = (params.gamma + params.phi) * panel.column("x") + noise
    frame = panel.frame.copy()
    frame["labor_share"] = labor_share
    frame.index = pd.period_range(start=start, periods=n_quarters, freq="Q")
    return TimeSeriesPanel(frame)


def simulate_observables(plan: SimulationPlan) -> TimeSeriesPanel:
    """Simulate the observable panel ``(x, pi, i)`` for the plan.

    The model is solved at ``plan.params``; indeterminacy or nonexistence
    propagates.  Burn-in head and tail are removed and synthetic dates
    ``t = 1..T`` label the retained rows.
    """
    solution = solve_full_re(plan.params)
    shocks = simulate_shocks(plan)
    T = plan.total_length
    eps = np.column_stack([shocks.eps_m, shocks.eps_d, shocks.eps_s])
    n_state = solution.n_state
    states = np.zeros((T, n_state))
    s = np.zeros(n_state)
    lam = solution.lambda_mat
    r_mat = solution.r_matrix
    for t in range(T):
        s = lam @ s + r_mat @ eps[t]
        states[t] = s
    obs = states @ solution.c_matrix.T
    keep = slice(plan.burn_in_head, T - plan.burn_in_tail)
    frame = pd.DataFrame(
        {"x": obs[keep, 0], "pi": obs[keep, 1], "i": obs[keep, 2]},
        index=pd.RangeIndex(1, plan.kept_length + 1, name="date"),
    )
    return TimeSeriesPanel(frame)
