"""State-space likelihood, score-based tests, and maximum likelihood.

The model likelihood is evaluated by the prediction-error decomposition of
a linear-Gaussian state-space filter initialized at the stationary
distribution of the shock state.  In the restricted regime with a square
invertible observation matrix the likelihood also has a closed form
(:func:`restricted_loglik`), kept as a cross-check of the filter.

Score increments are central finite differences of the per-period
prediction-error log densities; their quadratic variation estimates the
information matrix without assuming identification strength, which makes
the score test (:func:`lm_test`) usable where Wald inference breaks down
(Andrews and Mikusheva 2015).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg, optimize
from scipy.special import expit, logit
from scipy.stats import chi2
from sklearn.base import BaseEstimator

from .errors import BehavnkError, DataError, DomainError, FilterError, SingularSystemError
from .params import PARAM_NAMES, StructuralParams
from .solve import SolutionMatrix, solve_full_re
from .utils import parallel_map
from .validation import check_frame

#: Parameters held fixed by default in likelihood estimation.
DEFAULT_FIXED = {"beta": 0.99, "theta": 0.875, "phi": 1.0}

#: Default parameter box for estimation bounds and uniform hypothesis draws.
DEFAULT_BOUNDS = {
    "beta": (0.001, 0.999),
    "theta": (0.001, 0.999),
    "m_bar": (0.001, 0.999),
    "gamma": (0.01, 10.0),
    "phi": (0.01, 10.0),
    "phi_pi": (1e-6, 5.0),
    "phi_x": (1e-6, 5.0),
    "rho_i": (0.001, 0.999),
    "rho_d": (0.001, 0.999),
    "rho_m": (0.001, 0.999),
    "sigma2_s": (0.01, 5.0),
    "sigma2_d": (0.01, 5.0),
    "sigma2_m": (0.01, 5.0),
}

#: Incremental parameter groups for projection confidence sets.
PARAMETER_GROUPS = {
    1: ("m_bar", "gamma", "phi_pi", "phi_x", "rho_i"),
    2: ("m_bar", "gamma", "phi_pi", "phi_x", "rho_i", "rho_d"),
    3: ("m_bar", "gamma", "phi_pi", "phi_x", "rho_i", "rho_m"),
    4: ("m_bar", "gamma", "phi_pi", "phi_x", "rho_i", "sigma2_d"),
    5: ("m_bar", "gamma", "phi_pi", "phi_x", "rho_i", "sigma2_s"),
    6: ("m_bar", "gamma", "phi_pi", "phi_x", "rho_i", "sigma2_m"),
}

_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def kalman_loglik_terms(c_mat, t_mat, q_mat, y, init="stationary"):
    """Per-period log densities of ``y_t = C s_t``, ``s_t = T s_{t-1} + w_t``.

    ``w_t ~ N(0, Q)``; there is no measurement error.  ``init`` selects the
    prior on the first state: ``"stationary"`` solves the discrete Lyapunov
    equation, ``"zero_state"`` conditions on ``s_0 = 0`` (prior variance
    ``Q``), matching the closed-form convention.

    Returns the length-T array of log-density terms, each including its
    ``-n/2 log(2 pi)`` constant.

    Raises
    ------
    FilterError
        If a prediction variance fails to be positive definite.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    T_len, n_obs = y.shape
    terms = np.empty(T_len)
    if T_len == 0:
        return terms
    c_mat = np.asarray(c_mat, dtype=float)
    t_mat = np.asarray(t_mat, dtype=float)
    q_mat = np.asarray(q_mat, dtype=float)
    n_state = t_mat.shape[0]

    a = np.zeros(n_state)
    if init == "stationary":
        P = linalg.solve_discrete_lyapunov(t_mat, q_mat)
        if not np.all(np.isfinite(P)):
            raise FilterError("stationary state covariance is not finite")
    elif init == "zero_state":
        P = q_mat.copy()
    else:
        raise DomainError(f"unknown filter initialization {init!r}")

    log2pi = np.log(2.0 * np.pi)
    steady = False
    cho = None
    logdet_f = 0.0
    gain = None
    for t in range(T_len):
        if not steady:
            f_mat = c_mat @ P @ c_mat.T
            f_mat = 0.5 * (f_mat + f_mat.T)
            try:
                cho = linalg.cho_factor(f_mat, lower=True, check_finite=False)
            except linalg.LinAlgError as exc:
                raise FilterError(
                    f"prediction variance not positive definite at t={t}"
                ) from exc
            logdet_f = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
            gain = P @ c_mat.T @ linalg.cho_solve(cho, np.eye(n_obs), check_finite=False)
        v = y[t] - c_mat @ a
        terms[t] = -0.5 * (
            n_obs * log2pi + logdet_f + v @ linalg.cho_solve(cho, v, check_finite=False)
        )
        a = t_mat @ (a + gain @ v)
        if not steady:
            p_filt = P - gain @ c_mat @ P
            p_next = t_mat @ p_filt @ t_mat.T + q_mat
            p_next = 0.5 * (p_next + p_next.T)
            if np.max(np.abs(p_next - P)) < 1e-12 * (1.0 + np.max(np.abs(P))):
                steady = True
            P = p_next
    return terms


def restricted_loglik_terms(solution: SolutionMatrix, rho_m, rho_d, sigma2_m, sigma2_d, y):
    """Closed-form per-period log densities in the restricted regime.

    For observables ``Y_t = C U_t`` with ``U_t = diag(rho_m, rho_d) U_{t-1}
    + eps_t`` and ``eps ~ N(0, diag(s2_m, s2_d))``, period ``t`` contributes
    ``log N(C^-1 Y_t - Lambda C^-1 Y_{t-1}; 0, Sigma) - log|det C|`` with
    ``Y_0 = 0``.  The total is ``-(nT/2) log(2 pi) - (1/2) sum(...)
    - (T/2) log|Sigma| - T log|det C|``.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    T_len = y.shape[0]
    if T_len == 0:
        return np.empty(0)
    c_mat = solution.as_matrix()
    det_c = np.linalg.det(c_mat)
    if abs(det_c) < 1e-12:
        raise SingularSystemError("observation matrix is singular in the closed form")
    if sigma2_m <= 0.0 or sigma2_d <= 0.0:
        raise FilterError("innovation covariance not positive definite")
    lam = np.array([rho_m, rho_d])
    sig = np.array([sigma2_m, sigma2_d])
    u = y @ np.linalg.inv(c_mat).T
    u_prev = np.vstack([np.zeros(2), u[:-1]])
    resid = u - u_prev * lam
    quad = np.sum(resid**2 / sig, axis=1)
    const = -np.log(2.0 * np.pi) - 0.5 * float(np.sum(np.log(sig))) - np.log(abs(det_c))
    return const - 0.5 * quad


def restricted_loglik(solution, rho_m, rho_d, sigma2_m, sigma2_d, y) -> float:
    return float(np.sum(restricted_loglik_terms(solution, rho_m, rho_d, sigma2_m, sigma2_d, y)))


class LikelihoodProblem:
    """Panel plus the fixed/free split of the structural parameter vector.

    Parameters
    ----------
    X : DataFrame or TimeSeriesPanel
        Observables panel containing the requested columns.
    fixed : dict, optional
        Parameters held fixed with their values; defaults to
        ``{"beta": 0.99, "theta": 0.875, "phi": 1.0}``.  Together with the
        free list this partitions the full vector.
    bounds : dict, optional
        Per-parameter boxes overriding :data:`DEFAULT_BOUNDS`.
    observables : tuple of str
        Panel columns filtered as observables, in state-space order.
    init : str
        Filter initialization (see :func:`kalman_loglik_terms`).
    """

    def __init__(self, X, fixed=None, bounds=None, observables=("x", "pi", "i"), init="stationary"):
        frame = check_frame(X, required=observables)
        if len(frame) < 2:
            raise DataError(f"panel needs at least 2 observations, got {len(frame)}")
        self.y = np.column_stack([np.asarray(frame[c], dtype=float) for c in observables])
        if not np.all(np.isfinite(self.y)):
            raise DataError("observables contain non-finite values")
        self.observables = tuple(observables)
        self.fixed = dict(DEFAULT_FIXED) if fixed is None else dict(fixed)
        unknown = set(self.fixed) - set(PARAM_NAMES)
        if unknown:
            raise DomainError(f"unknown fixed parameters: {sorted(unknown)}")
        self.free_names = tuple(n for n in PARAM_NAMES if n not in self.fixed)
        self.bounds = dict(DEFAULT_BOUNDS)
        if bounds:
            self.bounds.update(bounds)
        self.init = init
        self.nobs = len(frame)

    def params_at(self, values) -> StructuralParams:
        """Structural point from the free-parameter vector."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.free_names),):
            raise DomainError(
                f"expected {len(self.free_names)} free values {self.free_names}, "
                f"got shape {values.shape}"
            )
        full = dict(self.fixed)
        full.update({n: float(v) for n, v in zip(self.free_names, values)})
        return StructuralParams(**full)

    def free_vector(self, params: StructuralParams) -> np.ndarray:
        return np.array([getattr(params, n) for n in self.free_names], dtype=float)

    def loglik_terms_params(self, params: StructuralParams) -> np.ndarray:
        """Per-period log-density contributions at a structural point."""
        ss = solve_full_re(params)
        obs_rows = [("x", "pi", "i").index(c) for c in self.observables]
        c_mat = ss.c_matrix[obs_rows, :]
        q_mat = ss.r_matrix @ ss.sigma_mat @ ss.r_matrix.T
        return kalman_loglik_terms(c_mat, ss.lambda_mat, q_mat, self.y, init=self.init)

    def loglik_params(self, params: StructuralParams) -> float:
        return float(np.sum(self.loglik_terms_params(params)))

    def loglik(self, values) -> float:
        return self.loglik_params(self.params_at(values))


@dataclass(frozen=True)
class ScoreBundle:
    """Per-period score increments and their quadratic variation.

    ``total`` is exactly the column sum of ``increments``; ``j_matrix`` is
    the symmetric positive semi-definite sum of outer products.
    """

    names: tuple
    increments: np.ndarray
    total: np.ndarray
    j_matrix: np.ndarray


@dataclass(frozen=True)
class LmResult:
    stat: float
    df: int
    pvalue: float
    j_rank: int
    rank_deficient: bool


def score_increments(terms_fn, theta, step_scale=_FD_STEP) -> np.ndarray:
    """Central-difference per-period score increments of ``terms_fn``.

    ``terms_fn(theta)`` returns the per-period log densities; the step for
    coordinate ``j`` is ``step_scale * max(1, |theta_j|)``.
    """
    theta = np.asarray(theta, dtype=float)
    cols = []
    for j in range(theta.size):
        h = step_scale * max(1.0, abs(theta[j]))
        up = theta.copy()
        up[j] += h
        dn = theta.copy()
        dn[j] -= h
        cols.append((terms_fn(up) - terms_fn(dn)) / (2.0 * h))
    return np.column_stack(cols)


def score_bundle(problem: LikelihoodProblem, params: StructuralParams, names=None) -> ScoreBundle:
    """Score increments with respect to ``names`` evaluated at ``params``."""
    names = tuple(names) if names is not None else problem.free_names
    base = np.array([getattr(params, n) for n in names], dtype=float)

    def terms_fn(theta):
        return problem.loglik_terms_params(params.with_values(names, theta))

    inc = score_increments(terms_fn, base)
    return ScoreBundle(
        names=names, increments=inc, total=inc.sum(axis=0), j_matrix=inc.T @ inc
    )


def lm_test(problem: LikelihoodProblem, params0: StructuralParams, names=None) -> LmResult:
    """Score statistic for ``H0: theta_names = values in params0``.

    The statistic is ``S' J^{-1} S`` with ``J`` the quadratic variation of
    the score increments; its null reference is chi-square with one degree
    of freedom per tested parameter regardless of identification strength.
    A rank-deficient ``J`` is handled by pseudo-inverse and flagged.
    """
    bundle = score_bundle(problem, params0, names)
    k = len(bundle.names)
    j_mat = bundle.j_matrix
    rank = int(np.linalg.matrix_rank(j_mat, hermitian=True))
    deficient = rank < k
    if deficient:
        warnings.warn(f"score quadratic variation is rank deficient ({rank} < {k})", stacklevel=2)
        stat = float(bundle.total @ np.linalg.pinv(j_mat, hermitian=True) @ bundle.total)
    else:
        stat = float(bundle.total @ linalg.solve(j_mat, bundle.total, assume_a="pos"))
    stat = max(stat, 0.0)
    return LmResult(
        stat=stat,
        df=k,
        pvalue=float(chi2.sf(stat, k)),
        j_rank=rank,
        rank_deficient=deficient,
    )


def _to_unconstrained(theta, lows, highs):
    frac = (np.asarray(theta) - lows) / (highs - lows)
    return logit(np.clip(frac, 1e-12, 1.0 - 1e-12))


def _from_unconstrained(z, lows, highs):
    return lows + (highs - lows) * expit(np.asarray(z))


def _central_gradient(fn, z, step=_FD_STEP):
    z = np.asarray(z, dtype=float)
    grad = np.empty(z.size)
    for j in range(z.size):
        h = step * max(1.0, abs(z[j]))
        up = z.copy()
        up[j] += h
        dn = z.copy()
        dn[j] -= h
        grad[j] = (fn(up) - fn(dn)) / (2.0 * h)
    return grad


def _fd_hessian(fn, theta, step_scale=1e-4):
    """Central-difference Hessian of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    h = step_scale * np.maximum(1.0, np.abs(theta))
    hess = np.empty((k, k))
    f0 = fn(theta)
    for i in range(k):
        for j in range(i, k):
            if i == j:
                up = theta.copy()
                up[i] += h[i]
                dn = theta.copy()
                dn[i] -= h[i]
                hess[i, i] = (fn(up) - 2.0 * f0 + fn(dn)) / h[i] ** 2
            else:
                pp = theta.copy()
                pp[[i, j]] += [h[i], h[j]]
                pm = theta.copy()
                pm[i] += h[i]
                pm[j] -= h[j]
                mp = theta.copy()
                mp[i] -= h[i]
                mp[j] += h[j]
                mm = theta.copy()
                mm[[i, j]] -= [h[i], h[j]]
                hess[i, j] = hess[j, i] = (fn(pp) - fn(pm) - fn(mp) + fn(mm)) / (
                    4.0 * h[i] * h[j]
                )
    return hess


class MaximumLikelihoodEstimator(BaseEstimator):
    """Quasi-Newton (BFGS) maximum likelihood for the structural model.

    Box constraints are enforced by logistic transforms of each free
    parameter, so the optimizer runs unconstrained.  Model solution
    failures at visited points are penalized, not fatal.  Standard
    deviations are reported from the inverse of a finite-difference
    Hessian (``sd_``) and from the inverse quadratic variation of the
    score (``sd_score_``).

    Parameters
    ----------
    fixed : dict, optional
        Parameters held fixed (default ``beta, theta, phi``).
    start : dict or StructuralParams, optional
        Starting values for free parameters; must be interior to the box.
    bounds : dict, optional
        Per-parameter box overrides.
    observables : tuple of str
    gtol : float
        Gradient tolerance passed to the optimizer.
    max_iter : int
    standard_errors : bool
        Skip the (relatively costly) Hessian and score-variance work when
        False; useful in Monte Carlo studies needing only point estimates.

    Attributes
    ----------
    params_ : StructuralParams
    estimates_ : pandas.Series
    sd_, sd_score_, tstats_ : pandas.Series
    loglik_ : float
    converged_ : bool
    n_iter_, grad_norm_, message_ : optimizer diagnostics
    cov_ : ndarray, inverse-Hessian covariance of the free parameters
    """

    _PENALTY = 1e10

    def __init__(self, fixed=None, start=None, bounds=None,
                 observables=("x", "pi", "i"), init="stationary",
                 gtol=1e-5, max_iter=500, standard_errors=True):
        self.fixed = fixed
        self.start = start
        self.bounds = bounds
        self.observables = observables
        self.init = init
        self.gtol = gtol
        self.max_iter = max_iter
        self.standard_errors = standard_errors

    def _start_vector(self, problem):
        if isinstance(self.start, StructuralParams):
            return problem.free_vector(self.start)
        lows = np.array([problem.bounds[n][0] for n in problem.free_names])
        highs = np.array([problem.bounds[n][1] for n in problem.free_names])
        mid = 0.5 * (lows + highs)
        if isinstance(self.start, dict):
            for j, n in enumerate(problem.free_names):
                if n in self.start:
                    mid[j] = float(self.start[n])
        return mid

    def fit(self, X, y=None):
        problem = LikelihoodProblem(
            X, fixed=self.fixed, bounds=self.bounds,
            observables=self.observables, init=self.init,
        )
        names = problem.free_names
        lows = np.array([problem.bounds[n][0] for n in names])
        highs = np.array([problem.bounds[n][1] for n in names])
        theta0 = self._start_vector(problem)
        if np.any(theta0 <= lows) or np.any(theta0 >= highs):
            raise DomainError("starting values must be interior to the parameter box")

        def negloglik_z(z):
            theta = _from_unconstrained(z, lows, highs)
            try:
                return -problem.loglik(theta)
            except BehavnkError:
                return self._PENALTY

        res = optimize.minimize(
            negloglik_z,
            _to_unconstrained(theta0, lows, highs),
            method="BFGS",
            jac=lambda z: _central_gradient(negloglik_z, z),
            options={"gtol": self.gtol, "maxiter": self.max_iter},
        )
        theta_hat = _from_unconstrained(res.x, lows, highs)
        params_hat = problem.params_at(theta_hat)

        self.problem_ = problem
        self.params_ = params_hat
        self.free_names_ = names
        self.estimates_ = pd.Series(theta_hat, index=names)
        self.loglik_ = float(-res.fun)
        self.converged_ = bool(res.success)
        self.n_iter_ = int(res.nit)
        self.grad_norm_ = float(np.max(np.abs(res.jac)))
        self.message_ = str(res.message)
        if not self.converged_:
            warnings.warn(
                f"maximum likelihood did not converge: {self.message_} "
                f"(grad norm {self.grad_norm_:.3e} after {self.n_iter_} iterations)",
                stacklevel=2,
            )

        if not self.standard_errors:
            self.hessian_ = None
            self.cov_ = None
            self.sd_ = self.sd_score_ = self.tstats_ = None
            return self

        def loglik_theta(theta):
            try:
                return problem.loglik(theta)
            except BehavnkError:
                return -self._PENALTY

        hess = _fd_hessian(loglik_theta, theta_hat)
        self.hessian_ = hess
        neg_hess = -hess
        try:
            cov = linalg.inv(neg_hess)
            if np.any(np.diag(cov) <= 0.0):
                raise linalg.LinAlgError("non-positive variance")
        except linalg.LinAlgError:
            warnings.warn("Hessian not positive definite at optimum; using pseudo-inverse",
                          stacklevel=2)
            cov = np.linalg.pinv(neg_hess, hermitian=True)
        self.cov_ = cov
        self.sd_ = pd.Series(np.sqrt(np.abs(np.diag(cov))), index=names)

        bundle = score_bundle(problem, params_hat, names)
        self.score_bundle_ = bundle
        cov_j = np.linalg.pinv(bundle.j_matrix, hermitian=True)
        self.cov_score_ = cov_j
        self.sd_score_ = pd.Series(np.sqrt(np.abs(np.diag(cov_j))), index=names)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.tstats_ = self.estimates_ / self.sd_
        return self

    def wald_test(self, params0, names=None):
        """Wald statistic for ``H0: theta_names = params0`` at the fit.

        Uses the inverse-Hessian covariance.  Returns ``(stat, df, pvalue)``.
        """
        names = tuple(names) if names is not None else self.free_names_
        idx = [self.free_names_.index(n) for n in names]
        if isinstance(params0, StructuralParams):
            target = np.array([getattr(params0, n) for n in names])
        else:
            target = np.asarray([params0[n] for n in names], dtype=float)
        diff = self.estimates_.iloc[idx].to_numpy() - target
        sub = self.cov_[np.ix_(idx, idx)]
        stat = float(diff @ linalg.solve(sub, diff, assume_a="pos"))
        df = len(names)
        return stat, df, float(chi2.sf(stat, df))


class ScoreProjectionSet(BaseEstimator):
    """Projection confidence set from inverting the score test over draws.

    Uniform draws over the parameter box replace the tested group's values
    in ``base_params``; draws whose score statistic does not reject at the
    given level are retained and the per-parameter intervals are the
    coordinate-wise min/max of the retained draws.  Draws where the model
    cannot be solved count as rejections.  Deterministic given ``seed``.

    Parameters
    ----------
    base_params : StructuralParams
        Point supplying every parameter outside the tested group.
    group : int or tuple of str
        One of the predefined groups (1-6) or an explicit name tuple.
    n_draws : int
    level : float
        Confidence level of the underlying test (default 0.95).
    box : dict, optional
        Per-parameter draw box overrides.
    seed : int

    Attributes
    ----------
    retained_ : DataFrame of accepted draws with their statistics
    intervals_ : DataFrame with ``lower``/``upper`` per tested parameter
    n_accepted_ : int
    empty_ : bool
    """

    def __init__(self, base_params=None, group=1, n_draws=10000, level=0.95,
                 box=None, seed=0, fixed=None, observables=("x", "pi", "i"),
                 init="stationary"):
        self.base_params = base_params
        self.group = group
        self.n_draws = n_draws
        self.level = level
        self.box = box
        self.seed = seed
        self.fixed = fixed
        self.observables = observables
        self.init = init

    def _group_names(self):
        if isinstance(self.group, int):
            if self.group not in PARAMETER_GROUPS:
                raise DomainError(f"group must be in 1..6 or a name tuple, got {self.group}")
            return PARAMETER_GROUPS[self.group]
        return tuple(self.group)

    def fit(self, X, y=None):
        if self.base_params is None:
            raise DomainError("base_params must be supplied")
        names = self._group_names()
        problem = LikelihoodProblem(
            X, fixed=self.fixed, observables=self.observables, init=self.init
        )
        box = dict(DEFAULT_BOUNDS)
        if self.box:
            box.update(self.box)
        cv = float(chi2.ppf(self.level, len(names)))
        rng = np.random.default_rng(self.seed)
        lows = np.array([box[n][0] for n in names])
        highs = np.array([box[n][1] for n in names])
        draws = lows + (highs - lows) * rng.random((int(self.n_draws), len(names)))

        def evaluate(draw):
            point = self.base_params.with_values(names, draw)
            try:
                return lm_test(problem, point, names).stat
            except BehavnkError:
                return np.inf

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            stats = np.array(parallel_map(evaluate, list(draws)), dtype=float)
        accepted = stats <= cv
        retained = pd.DataFrame(draws[accepted], columns=list(names))
        retained["lm_stat"] = stats[accepted]

        self.tested_names_ = names
        self.critical_value_ = cv
        self.retained_ = retained
        self.n_accepted_ = int(accepted.sum())
        self.empty_ = self.n_accepted_ == 0
        if self.empty_:
            warnings.warn("projection confidence set is empty", stacklevel=2)
            self.intervals_ = pd.DataFrame(
                {"lower": np.nan, "upper": np.nan}, index=list(names)
            )
        else:
            self.intervals_ = pd.DataFrame(
                {
                    "lower": retained[list(names)].min(axis=0),
                    "upper": retained[list(names)].max(axis=0),
                }
            )
        return self
