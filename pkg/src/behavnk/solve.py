"""Model solution: closed form for the restricted regime and a QZ solver.

Two solution paths are provided.

* :func:`solve_restricted` evaluates the closed-form loadings of the output
  gap and inflation on the two AR(1) shocks in the restricted policy regime
  (no smoothing, no output response, inflation response pinned at
  ``1/sigma``, no cost-push innovations).
* :func:`solve_full_re` assembles the model as a first-order linear
  rational-expectations system and solves it by generalized Schur (QZ)
  decomposition with unit-circle partitioning, returning a state-space form
  suitable for filtering and simulation.  Interest-rate smoothing augments
  the state with the lagged policy rate.

In the restricted regime the model is solved in its forward-substituted
form (the one-period expectation equation for the output gap plus the
Phillips curve), which is the system the closed form solves exactly; the
QZ path therefore reproduces :func:`solve_restricted` to machine precision
there.  Outside that regime the full three-equation system is assembled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import ordqz

from .errors import (
    DomainError,
    IndeterminacyError,
    NoStableSolutionError,
    SingularSystemError,
)
from .params import ReducedParams, StructuralParams, derive_reduced

OBS_NAMES = ("x", "pi", "i")
SHOCK_NAMES = ("eta_m", "eta_d", "eta_s")

#: Relative tolerance used to recognize the restricted policy regime.
_REGIME_RTOL = 1e-9


@dataclass(frozen=True)
class SolutionMatrix:
    """Loadings of (x, pi) on (eta_m, eta_d) in the restricted regime.

    ``x_t = a1 eta_m + a2 eta_d`` and ``pi_t = b1 eta_m + b2 eta_d``.
    """

    a1: float
    a2: float
    b1: float
    b2: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a1, self.a2], [self.b1, self.b2]], dtype=float)

    def smallest_singular_value(self) -> float:
        return float(np.linalg.svd(self.as_matrix(), compute_uv=False)[-1])


@dataclass(frozen=True)
class AutocovSet:
    """Population second moments of (x, pi) at a given lag."""

    lag: int
    var_x: float
    cov_xx: float
    cov_xpi: float


@dataclass(frozen=True)
class IdentifiedQuantities:
    """Quantities recoverable from the autocovariance structure of (x, pi).

    With distinct shock persistences six quantities are identified: the two
    persistences, the squared shock loadings scaled by the innovation
    variances (``q1``, ``q2``), and those same objects scaled by the
    inflation pass-through ratios (``q3``, ``q4``).  When the persistences
    coincide the two series become linearly dependent AR(1) processes and
    only four quantities survive; ``degenerate_flag`` marks that collapse.
    """

    rho_m: float
    rho_d: float
    q1: float
    q2: float
    q3: float
    q4: float
    degenerate_flag: bool


@dataclass(frozen=True)
class StateSpaceSolution:
    """First-order state-space form of the solved model.

    The state stacks the exogenous shocks ``(eta_m, eta_d, eta_s)`` and,
    when the policy rule smooths, the lagged policy rate.  Innovations
    ``(eps_m, eps_d, eps_s)`` load on the shock block only.

    Attributes
    ----------
    c_matrix : ndarray, shape (3, n_state)
        Loadings of the observables ``(x, pi, i)`` on the state.
    lambda_mat : ndarray, shape (n_state, n_state)
        State transition; diagonal on the shock block.
    sigma_mat : ndarray, shape (3, 3)
        Diagonal innovation covariance ``diag(s2_m, s2_d, s2_s)``.
    r_matrix : ndarray, shape (n_state, 3)
        Innovation loading (identity on the shock block).
    """

    c_matrix: np.ndarray
    lambda_mat: np.ndarray
    sigma_mat: np.ndarray
    r_matrix: np.ndarray
    state_names: tuple = field(default=SHOCK_NAMES)
    restricted_regime: bool = False

    def __post_init__(self):
        c = np.asarray(self.c_matrix, dtype=float)
        if not np.all(np.isfinite(c)):
            raise DomainError("observation matrix contains non-finite entries")
        lam = np.asarray(self.lambda_mat, dtype=float)
        shock_block = lam[:3, :3]
        if not np.allclose(shock_block, np.diag(np.diag(shock_block))):
            raise DomainError("shock transition block must be diagonal")
        d = np.diag(shock_block)
        if np.any(d < 0.0) or np.any(d >= 1.0):
            raise DomainError(f"shock persistences must lie in [0, 1), got {d}")
        sd = np.diag(np.asarray(self.sigma_mat, dtype=float))
        if np.any(sd < 0.0):
            raise DomainError(f"innovation variances must be >= 0, got {sd}")

    @property
    def n_state(self) -> int:
        return self.lambda_mat.shape[0]

    def shock_loadings(self) -> np.ndarray:
        """Loadings of (x, pi, i) on the three shock states."""
        return np.asarray(self.c_matrix, dtype=float)[:, :3]


def _checked_denominator(value, label):
    if abs(value) < 1e-12:
        raise SingularSystemError(f"denominator {label} vanishes (= {value:.3e})")
    return value


def solve_restricted(reduced: ReducedParams, m_bar, rho_m, rho_d) -> SolutionMatrix:
    """Closed-form solution of the restricted-regime model.

    Parameters
    ----------
    reduced : ReducedParams
        Reduced-form block at the structural point.
    m_bar, rho_m, rho_d : float
        Myopia and the two shock persistences.

    Returns
    -------
    SolutionMatrix

    Raises
    ------
    SingularSystemError
        If one of the structural denominators vanishes.
    """
    bmf = reduced.beta_mf
    sigma = reduced.sigma
    kappa = reduced.kappa
    d_m = _checked_denominator(
        bmf + sigma * kappa - rho_m * m_bar, "beta*Mf + sigma*kappa - rho_m*m_bar"
    )
    d_d = _checked_denominator(
        bmf + sigma * kappa - rho_d * m_bar, "beta*Mf + sigma*kappa - rho_d*m_bar"
    )
    g_m = _checked_denominator(1.0 - rho_m * bmf, "1 - rho_m*beta*Mf")
    g_d = _checked_denominator(1.0 - rho_d * bmf, "1 - rho_d*beta*Mf")
    a1 = -bmf * sigma / d_m
    a2 = bmf / d_d
    return SolutionMatrix(a1=a1, a2=a2, b1=a1 * kappa / g_m, b2=a2 * kappa / g_d)


def is_restricted_regime(params: StructuralParams) -> bool:
    """True when the policy restrictions of the closed-form solution hold."""
    if params.rho_i != 0.0 or params.phi_x != 0.0 or params.sigma2_s != 0.0:
        return False
    sigma = derive_reduced(params).sigma
    target = 1.0 / sigma
    return abs(params.phi_pi - target) <= _REGIME_RTOL * max(1.0, abs(target))


def _policy_from_subspace(Z, n_pre):
    z11 = Z[:n_pre, :n_pre]
    z21 = Z[n_pre:, :n_pre]
    if np.linalg.cond(z11) > 1e12:
        raise SingularSystemError(
            "selected invariant subspace is not spanned by the predetermined states"
        )
    policy = z21 @ np.linalg.inv(z11)
    if np.max(np.abs(policy.imag)) > 1e-8 * max(1.0, np.max(np.abs(policy.real))):
        raise SingularSystemError("complex residual in policy function exceeds tolerance")
    return policy.real


def _klein_policy(A, B, n_pre):
    """Solve ``A E_t[z_{t+1}] = B z_t`` for the stable policy ``d = F k``.

    ``z = (k, d)`` with the first ``n_pre`` entries predetermined.  Roots
    ``mu`` solve ``B v = mu A v``; existence and uniqueness require exactly
    ``n_pre`` roots inside the unit circle.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # LinAlgWarning on deflated infinite eigs
        _, _, alpha, beta, _, Z = ordqz(A, B, sort="ouc", output="complex")
    # mu = beta/alpha; the selected block (|alpha| > |beta|) has |mu| < 1
    n = A.shape[0]
    n_stable = int(np.sum(np.abs(alpha) > np.abs(beta)))
    n_unstable = n - n_stable
    if n_stable < n_pre:
        raise NoStableSolutionError(n_stable, n_unstable, n_pre)
    if n_stable > n_pre:
        raise IndeterminacyError(n_stable, n_unstable, n_pre)
    return _policy_from_subspace(Z, n_pre)


def _fundamental_policy(A, B, n_pre, exo_roots):
    """Policy from the invariant subspace of the exogenous roots.

    Used for the forward-substituted assembly, whose endogenous root can
    fall inside the unit circle at admissible parameter values; the
    fundamental (minimal-state) solution then loads on the exogenous roots
    only, so the QZ ordering targets those directly.
    """
    targets = [complex(t) for t in exo_roots]

    def _select(alpha, beta):
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = np.where(np.abs(alpha) > 0.0, beta / alpha, np.inf + 0j)
        sel = np.zeros(mu.shape, dtype=bool)
        for t in targets:
            sel |= np.abs(mu - t) <= 1e-7 * max(1.0, abs(t))
        return sel

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, _, alpha, beta, _, Z = ordqz(A, B, sort=_select, output="complex")
    n_sel = int(np.sum(_select(alpha, beta)))
    if n_sel != n_pre:
        raise SingularSystemError(
            f"could not isolate the exogenous-root subspace "
            f"({n_sel} roots matched, {n_pre} expected)"
        )
    return _policy_from_subspace(Z, n_pre)


def _system_matrices(params: StructuralParams, restricted: bool):
    """Assemble ``A E_t[z+] = B z`` for the model.

    State ordering: ``(eta_m, eta_d, eta_s[, i_lag], x, pi, i)``.
    """
    red = derive_reduced(params)
    bmf, sigma, kappa = red.beta_mf, red.sigma, red.kappa
    with_lag = params.rho_i != 0.0
    n_pre = 4 if with_lag else 3
    names = ["eta_m", "eta_d", "eta_s"] + (["i_lag"] if with_lag else [])
    idx = {name: j for j, name in enumerate(names + ["x", "pi", "i"])}
    n = n_pre + 3
    A = np.zeros((n, n))
    B = np.zeros((n, n))

    # Exogenous shock laws (expectations of the AR states)
    A[0, idx["eta_m"]] = 1.0
    B[0, idx["eta_m"]] = params.rho_m
    A[1, idx["eta_d"]] = 1.0
    B[1, idx["eta_d"]] = params.rho_d
    A[2, idx["eta_s"]] = 1.0  # i.i.d. cost-push innovation: persistence 0
    row = 3
    if with_lag:
        A[row, idx["i_lag"]] = 1.0
        B[row, idx["i"]] = 1.0
        row += 1

    if restricted:
        # Forward-substituted output-gap equation:
        # (beta*Mf + sigma*kappa) x = m_bar E[x+] - beta*Mf*sigma eta_m + beta*Mf eta_d
        A[row, idx["x"]] = params.m_bar
        B[row, idx["x"]] = bmf + sigma * kappa
        B[row, idx["eta_m"]] = bmf * sigma
        B[row, idx["eta_d"]] = -bmf
    else:
        # IS curve: m_bar E[x+] + sigma E[pi+] = x + sigma i - eta_d
        A[row, idx["x"]] = params.m_bar
        A[row, idx["pi"]] = sigma
        B[row, idx["x"]] = 1.0
        B[row, idx["i"]] = sigma
        B[row, idx["eta_d"]] = -1.0
    row += 1

    # Phillips curve: beta*Mf E[pi+] = pi - kappa x - eta_s
    A[row, idx["pi"]] = bmf
    B[row, idx["pi"]] = 1.0
    B[row, idx["x"]] = -kappa
    B[row, idx["eta_s"]] = -1.0
    row += 1

    # Policy rule (static): 0 = i - rho_i i_lag - (1-rho_i)(phi_pi pi + phi_x x) - eta_m
    B[row, idx["i"]] = 1.0
    if with_lag:
        B[row, idx["i_lag"]] = -params.rho_i
    B[row, idx["pi"]] = -(1.0 - params.rho_i) * params.phi_pi
    B[row, idx["x"]] = -(1.0 - params.rho_i) * params.phi_x
    B[row, idx["eta_m"]] = -1.0

    return A, B, n_pre, tuple(names)


def solve_full_re(params: StructuralParams, system="auto") -> StateSpaceSolution:
    """Solve the model and return its state-space form.

    Parameters
    ----------
    params : StructuralParams
    system : {"auto", "full", "restricted"}
        ``auto`` uses the forward-substituted restricted assembly when the
        restricted policy regime is detected and the full three-equation
        system otherwise.

    Returns
    -------
    StateSpaceSolution

    Raises
    ------
    IndeterminacyError, NoStableSolutionError
        When the count of unstable generalized eigenvalues does not match
        the number of non-predetermined variables.
    """
    if system not in ("auto", "full", "restricted"):
        raise DomainError(f"unknown system choice {system!r}")
    restricted = system == "restricted" or (system == "auto" and is_restricted_regime(params))
    A, B, n_pre, state_names = _system_matrices(params, restricted)
    if restricted:
        policy = _fundamental_policy(A, B, n_pre, (params.rho_m, params.rho_d, 0.0))
    else:
        policy = _klein_policy(A, B, n_pre)

    lam = np.zeros((n_pre, n_pre))
    lam[0, 0] = params.rho_m
    lam[1, 1] = params.rho_d
    lam[2, 2] = 0.0
    if n_pre == 4:
        lam[3, :] = policy[2, :]  # i_lag(t) = i(t-1)
    r_matrix = np.zeros((n_pre, 3))
    r_matrix[:3, :3] = np.eye(3)
    sigma_mat = np.diag([params.sigma2_m, params.sigma2_d, params.sigma2_s])
    return StateSpaceSolution(
        c_matrix=policy,
        lambda_mat=lam,
        sigma_mat=sigma_mat,
        r_matrix=r_matrix,
        state_names=state_names,
        restricted_regime=restricted,
    )


def population_autocov(solution: SolutionMatrix, rho_m, rho_d, sigma2_m, sigma2_d, lag) -> AutocovSet:
    """Population autocovariances of (x, pi) implied by the restricted solution.

    Returns ``Var(x_t)``, ``Cov(x_t, x_{t-lag})`` and ``Cov(x_t, pi_{t-lag})``
    from the AR(1) shock laws.

    Raises
    ------
    DomainError
        If either persistence has modulus >= 1 (no stationary distribution).
    """
    for name, rho in (("rho_m", rho_m), ("rho_d", rho_d)):
        if abs(rho) >= 1.0:
            raise DomainError(f"{name} must have modulus < 1 for stationarity, got {rho}")
    if lag < 0:
        raise DomainError(f"lag must be >= 0, got {lag}")
    v_m = sigma2_m / (1.0 - rho_m**2)
    v_d = sigma2_d / (1.0 - rho_d**2)
    var_x = solution.a1**2 * v_m + solution.a2**2 * v_d
    cov_xx = solution.a1**2 * v_m * rho_m**lag + solution.a2**2 * v_d * rho_d**lag
    cov_xpi = (
        solution.a1 * solution.b1 * v_m * rho_m**lag
        + solution.a2 * solution.b2 * v_d * rho_d**lag
    )
    return AutocovSet(lag=int(lag), var_x=var_x, cov_xx=cov_xx, cov_xpi=cov_xpi)


def identified_quantities(
    solution: SolutionMatrix, rho_m, rho_d, sigma2_m, sigma2_d, tol=1e-6
) -> IdentifiedQuantities:
    """Quantities identified by the (x, pi) autocovariance structure.

    ``q1 = a1^2 s2_m``, ``q2 = a2^2 s2_d`` and ``q3``/``q4`` additionally
    carry the inflation pass-through ratios (``q3 = a1 b1 s2_m`` and
    ``q4 = a2 b2 s2_d``).  ``degenerate_flag`` is set when the persistences
    coincide within ``tol``; the collapse is flagged, never raised.
    """
    return IdentifiedQuantities(
        rho_m=float(rho_m),
        rho_d=float(rho_d),
        q1=solution.a1**2 * sigma2_m,
        q2=solution.a2**2 * sigma2_d,
        q3=solution.a1 * solution.b1 * sigma2_m,
        q4=solution.a2 * solution.b2 * sigma2_d,
        degenerate_flag=bool(abs(rho_d - rho_m) < tol),
    )
