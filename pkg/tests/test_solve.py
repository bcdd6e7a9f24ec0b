import numpy as np
import pytest

from behavnk.errors import (
    DomainError,
    IndeterminacyError,
    SingularSystemError,
)
from behavnk.params import StructuralParams, derive_reduced, firm_attention, phillips_slope
from behavnk.simulate import SimulationPlan, simulate_observables
from behavnk.solve import (
    identified_quantities,
    is_restricted_regime,
    population_autocov,
    solve_full_re,
    solve_restricted,
)

from _oracles import forward_iteration_solution, rational_benchmark_determinate


def _restricted_params(rng):
    """Random valid draw in the restricted regime with convergent forward sums."""
    while True:
        base = StructuralParams(
            beta=0.99,
            theta=rng.uniform(0.4, 0.95),
            m_bar=rng.uniform(0.05, 0.95),
            gamma=rng.uniform(0.3, 5.0),
            phi=rng.uniform(0.2, 3.0),
            phi_pi=1.5,
            phi_x=0.0,
            rho_i=0.0,
            rho_d=rng.uniform(0.0, 0.97),
            rho_m=rng.uniform(0.0, 0.97),
            sigma2_s=0.0,
            sigma2_d=1.0,
            sigma2_m=1.0,
        )
        red = derive_reduced(base)
        params = base.replace(phi_pi=1.0 / red.sigma)
        ratio = params.m_bar / (red.beta_mf + red.sigma * red.kappa)
        if ratio < 1.0:  # forward sums converge, tail bound applies
            return params, red


def test_zero_persistence_collapses_denominators(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, restricted_point.m_bar, 0.0, 0.0)
    denom = red.beta_mf + red.sigma * red.kappa
    assert sol.a1 == pytest.approx(-red.beta_mf * red.sigma / denom, rel=1e-14)
    assert sol.b1 == pytest.approx(sol.a1 * red.kappa, rel=1e-14)
    assert sol.b2 == pytest.approx(sol.a2 * red.kappa, rel=1e-14)


def test_equal_persistence_gives_rank_one(restricted_point):
    red = derive_reduced(restricted_point)
    rho = 0.55
    sol = solve_restricted(red, restricted_point.m_bar, rho, rho)
    mat = sol.as_matrix()
    assert np.linalg.matrix_rank(mat, tol=1e-10) == 1
    ratio = red.kappa / (1.0 - rho * red.beta_mf)
    assert sol.b1 / sol.a1 == pytest.approx(ratio, rel=1e-12)
    assert sol.b2 / sol.a2 == pytest.approx(ratio, rel=1e-12)


def test_singular_denominator_is_reported(restricted_point):
    red = derive_reduced(restricted_point)
    # Choose rho_m so that beta*Mf + sigma*kappa - rho_m*m_bar = 0.
    rho_bad = (red.beta_mf + red.sigma * red.kappa) / restricted_point.m_bar
    if rho_bad < 1.0:
        with pytest.raises(SingularSystemError, match="rho_m"):
            solve_restricted(red, restricted_point.m_bar, rho_bad, 0.5)


def test_closed_form_matches_forward_iteration_oracle():
    rng = np.random.default_rng(42)
    for _ in range(100):
        params, red = _restricted_params(rng)
        sol = solve_restricted(red, params.m_bar, params.rho_m, params.rho_d)
        oracle = forward_iteration_solution(red, params.m_bar, params.rho_m, params.rho_d)
        assert np.max(np.abs(sol.as_matrix() - oracle)) < 1e-10


def test_qz_solver_matches_closed_form():
    rng = np.random.default_rng(43)
    for _ in range(100):
        params, red = _restricted_params(rng)
        sol = solve_restricted(red, params.m_bar, params.rho_m, params.rho_d)
        ss = solve_full_re(params)
        assert ss.restricted_regime
        assert np.max(np.abs(ss.shock_loadings()[:2, :2] - sol.as_matrix())) < 1e-8


def test_policy_rate_loadings_follow_rule(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, restricted_point.m_bar, restricted_point.rho_m,
                           restricted_point.rho_d)
    ss = solve_full_re(restricted_point)
    i_row = ss.shock_loadings()[2]
    assert i_row[0] == pytest.approx(restricted_point.phi_pi * sol.b1 + 1.0, rel=1e-9)
    assert i_row[1] == pytest.approx(restricted_point.phi_pi * sol.b2, rel=1e-9)


def test_full_model_satisfies_structural_equations(demo_calibration):
    ss = solve_full_re(demo_calibration)
    assert not ss.restricted_regime
    red = derive_reduced(demo_calibration)
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = rng.standard_normal(ss.n_state)
        x, pi, i = ss.c_matrix @ s
        ex, epi, _ = ss.c_matrix @ (ss.lambda_mat @ s)
        eta_m, eta_d, eta_s, i_lag = s
        p = demo_calibration
        assert x == pytest.approx(p.m_bar * ex - red.sigma * (i - epi) + eta_d, abs=1e-10)
        assert pi == pytest.approx(red.beta_mf * epi + red.kappa * x + eta_s, abs=1e-10)
        assert i == pytest.approx(
            p.rho_i * i_lag + (1 - p.rho_i) * (p.phi_pi * pi + p.phi_x * x) + eta_m,
            abs=1e-10,
        )


def test_zero_variances_give_zero_observables(demo_calibration):
    quiet = demo_calibration.replace(sigma2_s=0.0, sigma2_d=0.0, sigma2_m=0.0)
    plan = SimulationPlan(params=quiet, total_length=150, burn_in_head=20,
                          burn_in_tail=20, seed=1)
    panel = simulate_observables(plan)
    assert np.all(panel.frame.to_numpy() == 0.0)


def test_taylor_violation_raises_indeterminacy():
    params = StructuralParams(
        beta=0.99, theta=0.875, m_bar=1.0, gamma=1.0, phi=1.0,
        phi_pi=0.5, phi_x=0.0, rho_i=0.0, rho_d=0.5, rho_m=0.5,
        sigma2_s=0.1, sigma2_d=1.0, sigma2_m=1.0,
    )
    with pytest.raises(IndeterminacyError) as err:
        solve_full_re(params, system="full")
    assert err.value.n_stable > err.value.n_predetermined


def test_root_counts_match_activeness_oracle():
    """QZ determinacy agrees with the textbook inequality (rational benchmark)."""
    kappa = phillips_slope(1.0, 1.0, 0.99, 0.875)
    rng = np.random.default_rng(5)
    for _ in range(30):
        phi_pi = rng.uniform(0.0, 3.0)
        phi_x = rng.uniform(0.0, 2.0)
        if abs(kappa * (phi_pi - 1.0) + 0.01 * phi_x) < 1e-3:
            continue  # skip knife-edge draws
        params = StructuralParams(
            beta=0.99, theta=0.875, m_bar=1.0, gamma=1.0, phi=1.0,
            phi_pi=phi_pi, phi_x=phi_x, rho_i=0.0, rho_d=0.4, rho_m=0.2,
            sigma2_s=0.1, sigma2_d=1.0, sigma2_m=1.0,
        )
        expected = rational_benchmark_determinate(phi_pi, phi_x, 0.99, kappa)
        if expected:
            solve_full_re(params, system="full")
        else:
            with pytest.raises(IndeterminacyError):
                solve_full_re(params, system="full")


def test_regime_detection(demo_calibration, restricted_point):
    assert is_restricted_regime(restricted_point)
    assert not is_restricted_regime(demo_calibration)


# ---------------------------------------------------------------------------
# Population moments and identification


def test_autocov_lag_zero_reduces_to_variance(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, restricted_point.m_bar, 0.3, 0.7)
    ac = population_autocov(sol, 0.3, 0.7, 1.0, 0.6536, 0)
    assert ac.cov_xx == pytest.approx(ac.var_x, rel=1e-14)


def test_autocov_single_factor_when_one_variance_zero(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, 0.68, 0.3, 0.7)
    ac = population_autocov(sol, 0.3, 0.7, 1.0, 0.0, 0)
    assert ac.var_x == pytest.approx(sol.a1**2 * 1.0 / (1 - 0.3**2), rel=1e-14)


def test_autocov_rejects_unit_roots(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, 0.68, 0.3, 0.7)
    with pytest.raises(DomainError):
        population_autocov(sol, 1.0, 0.7, 1.0, 1.0, 1)


def test_autocov_geometric_decay(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, restricted_point.m_bar, 0.3, 0.7)
    values = [population_autocov(sol, 0.3, 0.7, 1.0, 0.65, k).cov_xx for k in range(6)]
    # Each lag is a rho-weighted combination of the two AR components.
    v_m = sol.a1**2 / (1 - 0.09)
    v_d = sol.a2**2 * 0.65 / (1 - 0.49)
    for k, val in enumerate(values):
        assert val == pytest.approx(v_m * 0.3**k + v_d * 0.7**k, rel=1e-12)


def test_autocov_matches_long_simulation(restricted_point):
    params = restricted_point.replace(rho_m=0.5, rho_d=0.85)
    red = derive_reduced(params)
    sol = solve_restricted(red, params.m_bar, params.rho_m, params.rho_d)
    plan = SimulationPlan(params=params, total_length=10**6 + 200,
                          burn_in_head=100, burn_in_tail=100, seed=99)
    panel = simulate_observables(plan)
    x = panel.column("x")
    pi = panel.column("pi")
    for lag in (0, 1, 3):
        pop = population_autocov(sol, params.rho_m, params.rho_d,
                                 params.sigma2_m, params.sigma2_d, lag)
        sample_xx = np.mean((x[lag:] - x.mean()) * (x[: len(x) - lag] - x.mean()))
        sample_xpi = np.mean((x[lag:] - x.mean()) * (pi[: len(pi) - lag] - pi.mean()))
        assert sample_xx == pytest.approx(pop.cov_xx, rel=0.01)
        assert sample_xpi == pytest.approx(pop.cov_xpi, rel=0.01)


def test_identified_quantities_flag_degeneracy(restricted_point):
    red = derive_reduced(restricted_point)
    sol_eq = solve_restricted(red, restricted_point.m_bar, 0.5, 0.5)
    iq = identified_quantities(sol_eq, 0.5, 0.5, 1.0, 1.0)
    assert iq.degenerate_flag
    sol_table = solve_restricted(red, restricted_point.m_bar, 0.8843, 0.9591)
    iq2 = identified_quantities(sol_table, 0.8843, 0.9591, 1.0, 0.65, tol=0.01)
    assert not iq2.degenerate_flag


def test_identified_quantity_ratios(restricted_point):
    red = derive_reduced(restricted_point)
    sol = solve_restricted(red, restricted_point.m_bar, 0.3, 0.7)
    iq = identified_quantities(sol, 0.3, 0.7, 1.2, 0.7)
    assert iq.q3 / iq.q1 == pytest.approx(red.kappa / (1 - 0.3 * red.beta_mf), rel=1e-12)
    assert iq.q4 / iq.q2 == pytest.approx(red.kappa / (1 - 0.7 * red.beta_mf), rel=1e-12)


def test_observationally_equivalent_points_share_quantities():
    """Distinct deep parameters built to match the identified set do match it."""
    from scipy.optimize import brentq

    p1 = StructuralParams(beta=0.99, theta=0.875, m_bar=0.68, gamma=2.0, phi=1.0,
                          rho_d=0.7, rho_m=0.3, sigma2_d=0.8, sigma2_m=1.2)
    red1 = derive_reduced(p1)
    sol1 = solve_restricted(red1, p1.m_bar, p1.rho_m, p1.rho_d)
    iq1 = identified_quantities(sol1, p1.rho_m, p1.rho_d, p1.sigma2_m, p1.sigma2_d)

    # Second point: different fixed (beta, theta, phi); invert the mapping.
    beta2, theta2, phi2 = 0.97, 0.8, 0.5
    target_bmf = red1.beta_mf
    m2 = brentq(lambda m: beta2 * firm_attention(m, beta2, theta2) - target_bmf, 0.0, 1.0)
    gamma2 = red1.kappa / ((1 / theta2 - 1) * (1 - beta2 * theta2)) - phi2
    p2 = StructuralParams(beta=beta2, theta=theta2, m_bar=m2, gamma=gamma2, phi=phi2,
                          rho_d=p1.rho_d, rho_m=p1.rho_m, sigma2_d=1.0, sigma2_m=1.0)
    red2 = derive_reduced(p2)
    assert red2.beta_mf == pytest.approx(red1.beta_mf, rel=1e-12)
    assert red2.kappa == pytest.approx(red1.kappa, rel=1e-12)
    sol2_unit = solve_restricted(red2, m2, p1.rho_m, p1.rho_d)
    s2_m = iq1.q1 / sol2_unit.a1**2
    s2_d = iq1.q2 / sol2_unit.a2**2
    iq2 = identified_quantities(sol2_unit, p1.rho_m, p1.rho_d, s2_m, s2_d)
    for field in ("q1", "q2", "q3", "q4"):
        assert getattr(iq2, field) == pytest.approx(getattr(iq1, field), rel=1e-10)
    # The full second-order structure coincides as well.
    for lag in (0, 1, 4):
        ac1 = population_autocov(sol1, p1.rho_m, p1.rho_d, p1.sigma2_m, p1.sigma2_d, lag)
        ac2 = population_autocov(sol2_unit, p1.rho_m, p1.rho_d, s2_m, s2_d, lag)
        assert ac2.var_x == pytest.approx(ac1.var_x, rel=1e-10)
        assert ac2.cov_xx == pytest.approx(ac1.cov_xx, rel=1e-10)
        assert ac2.cov_xpi == pytest.approx(ac1.cov_xpi, rel=1e-10)


def test_singular_value_collapses_as_persistences_merge(restricted_point):
    red = derive_reduced(restricted_point)
    rho_m = 0.8843
    path = np.linspace(0.9591, rho_m, 20)
    smallest = []
    for rho_d in path:
        sol = solve_restricted(red, restricted_point.m_bar, rho_m, rho_d)
        smallest.append(sol.smallest_singular_value())
    assert all(np.diff(smallest) < 0.0)
    assert smallest[-1] < 1e-8
