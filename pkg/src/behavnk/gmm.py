"""Single-equation GMM: residuals, HAC moments, and weak-ID-robust statistics.

The demand and pricing equations are estimated by continuous-updating GMM
(Hansen, Heaton and Yaron 1996) on instrument orthogonality conditions,
with a Newey-West (1987) long-run covariance.  Grid inference uses the
S statistic of Stock and Wright (2000) and the K statistic of Kleibergen
(2005); both keep their chi-square null references regardless of
instrument strength.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import InstrumentSpec, TimeSeriesPanel, build_instruments
from .errors import DataError, DomainError
from .params import effective_eis, firm_attention, phillips_slope
from .validation import check_frame

#: Default instrument layouts (seven columns each).
IS_INSTRUMENTS = "const, x:1-3, rr:1-3"
NKPC_INSTRUMENTS = "pi:1-4, labor_share:1-3"

#: Default fixed parameters for the single-equation residuals.
SINGLE_EQ_FIXED = {"beta": 0.99, "theta": 0.875, "phi": 1.0}

#: Admissible domains of the free parameters in the residual functions.
_DEFAULT_PARAM_BOUNDS = {"m_bar": (0.0, 1.0), "gamma": (1e-6, np.inf)}


def residual_nkpc(theta, pi_t, pi_lead, x_t, fixed=None):
    """Pricing-equation residual ``pi_t - beta*Mf * pi_{t+1} - kappa * x_t``.

    ``theta = (m_bar, gamma)``; expectations are replaced by realizations,
    so the residual absorbs the one-step inflation forecast error.
    """
    fixed = SINGLE_EQ_FIXED if fixed is None else fixed
    m_bar, gamma = float(theta[0]), float(theta[1])
    beta, th = fixed["beta"], fixed["theta"]
    bmf = beta * firm_attention(m_bar, beta, th)
    kappa = phillips_slope(gamma, fixed["phi"], beta, th)
    return pi_t - bmf * pi_lead - kappa * x_t


def residual_is(theta, x_t, x_lead, i_t, pi_lead, r_n, fixed=None):
    """Demand-equation residual ``x_t - M x_{t+1} + sigma (i_t - pi_{t+1} - r_n)``.

    ``theta = (m_bar, gamma)`` with ``M = m_bar`` and ``sigma = beta/gamma``;
    realizations substitute for expectations.
    """
    fixed = SINGLE_EQ_FIXED if fixed is None else fixed
    m_bar, gamma = float(theta[0]), float(theta[1])
    sigma = effective_eis(gamma, fixed["beta"])
    return x_t - m_bar * x_lead + sigma * (i_t - pi_lead - r_n)


def newey_west(G, lags, center=True):
    """Newey-West long-run covariance of the rows of ``G`` (T x k).

    Bartlett weights ``1 - l/(L+1)``; with ``lags=0`` this degenerates to
    the outer-product sample covariance.
    """
    G = np.asarray(G, dtype=float)
    T = G.shape[0]
    Gc = G - G.mean(axis=0) if center else G
    S = Gc.T @ Gc / T
    for lag in range(1, int(lags) + 1):
        w = 1.0 - lag / (lags + 1.0)
        C = Gc[lag:].T @ Gc[:-lag] / T
        S += w * (C + C.T)
    return 0.5 * (S + S.T)


def newey_west_cross(A, B, lags, center=True):
    """Newey-West long-run cross-covariance between the rows of A and B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    T = A.shape[0]
    Ac = A - A.mean(axis=0) if center else A
    Bc = B - B.mean(axis=0) if center else B
    S = Ac.T @ Bc / T
    for lag in range(1, int(lags) + 1):
        w = 1.0 - lag / (lags + 1.0)
        S += w * (Ac[lag:].T @ Bc[:-lag] + Ac[:-lag].T @ Bc[lag:]) / T
    return S


def regularize_covariance(sigma, rel_floor=1e-10):
    """Ridge-regularize a covariance whose smallest eigenvalue is too small.

    Adds ``rel_floor * trace`` to the diagonal (with a warning) whenever the
    minimum eigenvalue falls below that amount, so the CUE objective stays
    evaluable over the whole grid.
    """
    sigma = np.asarray(sigma, dtype=float)
    floor = rel_floor * float(np.trace(sigma))
    min_eig = float(np.linalg.eigvalsh(sigma)[0])
    if min_eig < floor:
        warnings.warn(
            f"HAC covariance nearly singular (min eig {min_eig:.3e}); ridge added",
            stacklevel=2,
        )
        sigma = sigma + floor * np.eye(sigma.shape[0])
    return sigma


@dataclass(frozen=True)
class MomentBundle:
    """Sample moments, their HAC covariance, and the moment Jacobian."""

    f_t: np.ndarray
    sigma_hat: np.ndarray
    jacobian: np.ndarray

    @property
    def weight(self) -> np.ndarray:
        return linalg.inv(self.sigma_hat)


@dataclass(frozen=True)
class KStat:
    """K statistic value with its (possibly reduced) degrees of freedom."""

    value: float
    df: int
    rank_deficient: bool


class MomentProblem:
    """Moment condition ``E[Z_t h_t(theta)] = 0`` bound to data.

    Parameters
    ----------
    residual_fn : callable
        Maps a parameter vector to the length-T residual array.
    instruments : ndarray (T, n_z)
        Instrument matrix aligned with the residuals; at least as many
        columns as free parameters.
    hac_lags : int
        Newey-West lag count (default 4).
    param_names : tuple of str
    fd_steps : array-like, optional
        Central-difference steps for the moment Jacobian (defaults to 5e-3
        per coordinate, the half-spacing of the default grids).
    tag : str, optional
        Label of the bound equation (e.g. ``"is"`` or ``"nkpc"``).
    """

    def __init__(self, residual_fn, instruments, hac_lags=4,
                 param_names=("m_bar", "gamma"), fd_steps=None,
                 instrument_names=None, param_bounds=None, tag=None):
        self.tag = tag
        self.residual_fn = residual_fn
        self.instruments = np.asarray(instruments, dtype=float)
        if self.instruments.ndim != 2:
            raise DataError("instrument matrix must be two-dimensional")
        self.hac_lags = int(hac_lags)
        self.param_names = tuple(param_names)
        if self.instruments.shape[1] < len(self.param_names):
            raise DataError(
                f"{self.instruments.shape[1]} instruments cannot identify "
                f"{len(self.param_names)} parameters"
            )
        steps = np.full(len(self.param_names), 5e-3) if fd_steps is None else np.asarray(fd_steps, float)
        self.fd_steps = steps
        self.instrument_names = tuple(instrument_names) if instrument_names else None
        if param_bounds is None:
            param_bounds = [_DEFAULT_PARAM_BOUNDS.get(n, (-np.inf, np.inf)) for n in self.param_names]
        self.param_bounds = np.asarray(param_bounds, dtype=float)

    @property
    def nobs(self) -> int:
        return self.instruments.shape[0]

    @property
    def n_moments(self) -> int:
        return self.instruments.shape[1]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def residuals(self, theta) -> np.ndarray:
        h = np.asarray(self.residual_fn(np.asarray(theta, dtype=float)), dtype=float)
        if h.shape != (self.nobs,):
            raise DataError(
                f"residual function returned shape {h.shape}, expected ({self.nobs},)"
            )
        return h

    def moment_matrix(self, theta) -> np.ndarray:
        return self.instruments * self.residuals(theta)[:, None]

    def moment_jacobian_matrices(self, theta):
        """Per-period derivative matrices of ``Z_t h_t`` by central differences.

        Steps are clipped to the parameter domain near its boundary (the
        difference is then one-sided in the clipped direction).
        """
        theta = np.asarray(theta, dtype=float)
        out = []
        for j in range(self.n_params):
            d = self.fd_steps[j]
            lo, hi = self.param_bounds[j]
            up = theta.copy()
            up[j] = min(theta[j] + d, hi)
            dn = theta.copy()
            dn[j] = max(theta[j] - d, lo)
            spread = up[j] - dn[j]
            if spread <= 0.0:
                raise DomainError(
                    f"cannot difference {self.param_names[j]} at {theta[j]} "
                    f"within bounds [{lo}, {hi}]"
                )
            out.append((self.moment_matrix(up) - self.moment_matrix(dn)) / spread)
        return out

    def bundle(self, theta) -> MomentBundle:
        """Sample moment vector, HAC covariance and Jacobian at ``theta``."""
        g = self.moment_matrix(theta)
        f = g.mean(axis=0)
        sigma = regularize_covariance(newey_west(g, self.hac_lags))
        jac = np.column_stack(
            [q.mean(axis=0) for q in self.moment_jacobian_matrices(theta)]
        )
        return MomentBundle(f_t=f, sigma_hat=sigma, jacobian=jac)


def cugmm_objective(problem: MomentProblem, theta) -> float:
    """Continuous-updating objective ``f_T' Sigma(theta)^{-1} f_T``.

    The S statistic equals ``T`` times this quantity.
    """
    g = problem.moment_matrix(theta)
    f = g.mean(axis=0)
    sigma = regularize_covariance(newey_west(g, problem.hac_lags))
    return float(f @ linalg.solve(sigma, f, assume_a="pos"))


def s_statistic(problem: MomentProblem, theta) -> float:
    """S statistic ``T f' Sigma^{-1} f`` with chi-square(n_z) null reference."""
    return problem.nobs * cugmm_objective(problem, theta)


def k_statistic(problem: MomentProblem, theta) -> KStat:
    """K statistic with the CUE-orthogonalized Jacobian.

    Each Jacobian column is recentred by its projection on the moment
    vector through the corresponding HAC cross-covariance block; the
    statistic projects the normalized moments on the span of the result
    and refers to chi-square with ``n_params`` degrees of freedom (fewer
    when the orthogonalized Jacobian loses rank, which is flagged).
    """
    stats = _core_statistics(problem, theta)
    return KStat(value=stats["K"], df=stats["k_df"], rank_deficient=stats["k_rank_deficient"])


def _core_statistics(problem: MomentProblem, theta) -> dict:
    """S, K and the CUE objective in one pass (shared HAC work)."""
    T = problem.nobs
    g = problem.moment_matrix(theta)
    f = g.mean(axis=0)
    gc = g - f
    sigma = regularize_covariance(newey_west(g, problem.hac_lags))
    cho = linalg.cho_factor(sigma, lower=True, check_finite=False)
    sigma_inv_f = linalg.cho_solve(cho, f, check_finite=False)
    objective = float(f @ sigma_inv_f)

    d_tilde = np.empty((problem.n_moments, problem.n_params))
    for j, q in enumerate(problem.moment_jacobian_matrices(theta)):
        d_j = q.mean(axis=0)
        lam_j = newey_west_cross(q, gc, problem.hac_lags, center=True)
        d_tilde[:, j] = d_j - lam_j @ sigma_inv_f

    # Whiten: w = L^{-1} f, M = L^{-1} D~; K = T ||P_M w||^2.
    lower = cho[0]
    w = linalg.solve_triangular(lower, f, lower=True, check_finite=False)
    m_mat = linalg.solve_triangular(lower, d_tilde, lower=True, check_finite=False)
    coef, _, rank, _ = np.linalg.lstsq(m_mat, w, rcond=None)
    proj = m_mat @ coef
    k_val = float(T * proj @ proj)
    deficient = rank < problem.n_params
    if deficient:
        warnings.warn(
            f"orthogonalized Jacobian rank {rank} < {problem.n_params}; "
            "K reported with reduced degrees of freedom",
            stacklevel=2,
        )
    return {
        "objective": objective,
        "S": float(T * objective),
        "K": max(k_val, 0.0),
        "k_df": int(rank),
        "k_rank_deficient": bool(deficient),
    }


def point_statistics(problem: MomentProblem, theta) -> dict:
    """Evaluate the CUE objective and the S and K statistics at a point."""
    return _core_statistics(problem, theta)


@dataclass(frozen=True)
class CugmmFit:
    """Continuous-updating GMM point estimate with its variance."""

    theta: np.ndarray
    objective: float
    cov: np.ndarray
    param_names: tuple

    def wald_statistic(self, theta0, subset=None) -> float:
        """Wald quadratic form at a hypothesized point.

        ``subset`` selects coordinate indices (defaults to all); ``theta0``
        gives the hypothesized values either for the full vector or for
        the selected coordinates only.  Uses the usual efficient-GMM
        delta-method variance at the estimate.
        """
        theta0 = np.asarray(theta0, dtype=float)
        idx = list(range(len(self.theta))) if subset is None else list(subset)
        target = theta0[idx] if theta0.size == self.theta.size else theta0
        diff = self.theta[idx] - target
        sub = self.cov[np.ix_(idx, idx)]
        return float(diff @ linalg.solve(sub, diff, assume_a="pos"))


def _compass_polish(fn, theta0, step0, lower, upper, tol=1e-6, max_iter=200):
    """Derivative-free coordinate search within a box."""
    theta = np.asarray(theta0, dtype=float).copy()
    best = fn(theta)
    step = np.asarray(step0, dtype=float).copy()
    for _ in range(max_iter):
        improved = False
        for j in range(theta.size):
            for sign in (1.0, -1.0):
                cand = theta.copy()
                cand[j] = np.clip(cand[j] + sign * step[j], lower[j], upper[j])
                if cand[j] == theta[j]:
                    continue
                val = fn(cand)
                if val < best - 1e-14:
                    theta, best = cand, val
                    improved = True
        if not improved:
            step *= 0.5
            if np.all(step < tol):
                break
    return theta, best


def fit_cugmm(problem: MomentProblem, grid_points, objectives=None, polish=True) -> CugmmFit:
    """CUGMM point estimate: grid argmin refined by compass search.

    Parameters
    ----------
    grid_points : ndarray (N, p)
        Candidate parameter points.
    objectives : ndarray, optional
        Pre-computed CUE objective at the grid points (saves a pass).
    polish : bool
        Refine within one grid cell by compass search; grid captions are
        finer than the grid spacing only because of this step.
    """
    grid_points = np.asarray(grid_points, dtype=float)
    if objectives is None:
        objectives = np.array([cugmm_objective(problem, th) for th in grid_points])
    best = int(np.argmin(objectives))
    theta = grid_points[best]
    obj = float(objectives[best])
    if polish:
        cell = np.array(
            [_grid_cell_size(grid_points[:, j]) for j in range(grid_points.shape[1])]
        )
        lower = np.maximum(theta - cell, problem.param_bounds[:, 0])
        upper = np.minimum(theta + cell, problem.param_bounds[:, 1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            theta, obj = _compass_polish(
                lambda th: cugmm_objective(problem, th),
                theta,
                step0=cell / 2.0,
                lower=lower,
                upper=upper,
            )
    bundle = problem.bundle(theta)
    d_mat = bundle.jacobian
    sigma = bundle.sigma_hat
    bread = d_mat.T @ linalg.solve(sigma, d_mat, assume_a="pos")
    try:
        cov = linalg.inv(bread) / problem.nobs
    except linalg.LinAlgError:
        warnings.warn("GMM variance singular at the estimate; using pseudo-inverse",
                      stacklevel=2)
        cov = np.linalg.pinv(bread) / problem.nobs
    return CugmmFit(theta=np.asarray(theta), objective=obj, cov=cov,
                    param_names=problem.param_names)


def _grid_cell_size(values):
    uniq = np.unique(values)
    return float(np.min(np.diff(uniq))) if uniq.size > 1 else 1e-2


# ---------------------------------------------------------------------------
# Equation-specific problem builders


def _panel_frame(panel):
    if isinstance(panel, TimeSeriesPanel):
        return panel.frame
    return check_frame(panel)


def build_moment_problem(panel, equation, instruments=None, hac_lags=4,
                         fixed=None, r_n_column=None, fd_steps=None) -> MomentProblem:
    """Bind one of the two model equations to panel data.

    Parameters
    ----------
    panel : TimeSeriesPanel or DataFrame
        Requires ``x, pi, i`` (and ``labor_share`` for the pricing
        equation).  The demand equation's real-rate proxy comes from
        ``r_n_column`` when given; otherwise the sample mean of the
        ex-post real rate ``i_t - pi_{t+1}`` is used.
    equation : {"is", "nkpc"}
    instruments : str or InstrumentSpec, optional
        Defaults to the equation's standard layout: a constant plus three
        lags of the output gap and of the ex-post real-rate gap for the
        demand equation; four lags of inflation plus three lags of the
        labor share for the pricing equation.
    """
    frame = _panel_frame(panel)
    fixed = dict(SINGLE_EQ_FIXED) if fixed is None else dict(fixed)
    equation = str(equation).lower()
    x = np.asarray(frame["x"], dtype=float)
    pi = np.asarray(frame["pi"], dtype=float)
    i_rate = np.asarray(frame["i"], dtype=float)
    T = len(frame)
    if T < 3:
        raise DataError("panel too short for lead/lag alignment")

    head = frame.iloc[: T - 1].copy()  # rows where the t+1 lead exists
    pi_lead = pi[1:]
    x_lead = x[1:]

    if equation == "is":
        if r_n_column is not None and r_n_column in frame.columns:
            r_n_full = np.asarray(frame[r_n_column], dtype=float)[: T - 1]
        else:
            # Fallback proxy: sample mean of the ex-post real rate.
            r_n_full = np.full(T - 1, np.mean(i_rate[: T - 1] - pi_lead))
        head["rr"] = i_rate[: T - 1] - pi_lead - r_n_full
        spec = InstrumentSpec.parse(IS_INSTRUMENTS if instruments is None else instruments)
    elif equation == "nkpc":
        spec = InstrumentSpec.parse(NKPC_INSTRUMENTS if instruments is None else instruments)
    else:
        raise DomainError(f"unknown equation {equation!r} (expected 'is' or 'nkpc')")

    z_frame = build_instruments(TimeSeriesPanel(head), spec)
    start = T - 1 - len(z_frame)  # first evaluable row
    rows = slice(start, T - 1)

    if equation == "is":
        x_t = x[rows]
        xl = x_lead[start:]
        it = i_rate[rows]
        pl = pi_lead[start:]
        rn = r_n_full[start:]

        def residual_fn(theta):
            return residual_is(theta, x_t, xl, it, pl, rn, fixed=fixed)

    else:
        pi_t = pi[rows]
        pl = pi_lead[start:]
        x_t = x[rows]

        def residual_fn(theta):
            return residual_nkpc(theta, pi_t, pl, x_t, fixed=fixed)

    return MomentProblem(
        residual_fn=residual_fn,
        instruments=z_frame.to_numpy(),
        hac_lags=hac_lags,
        param_names=("m_bar", "gamma"),
        fd_steps=fd_steps,
        instrument_names=tuple(z_frame.columns),
        tag=equation,
    )
