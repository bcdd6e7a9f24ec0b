import numpy as np
import pytest

from behavnk.params import StructuralParams, derive_reduced
from behavnk.simulate import SimulationPlan, simulate_observables


@pytest.fixture(scope="session")
def demo_calibration():
    """US-style quarterly calibration used across the suite."""
    return StructuralParams(
        beta=0.99, theta=0.875, m_bar=0.6799, gamma=1.9709, phi=1.0,
        phi_pi=1.5058, phi_x=1.9672, rho_i=0.4623, rho_d=0.9591, rho_m=0.8843,
        sigma2_s=0.7443, sigma2_d=0.6536, sigma2_m=1.0,
    )


@pytest.fixture(scope="session")
def restricted_point():
    """A point satisfying the restricted policy regime."""
    base = StructuralParams(
        beta=0.99, theta=0.875, m_bar=0.6799, gamma=1.9709, phi=1.0,
        phi_pi=1.5, phi_x=0.0, rho_i=0.0, rho_d=0.7, rho_m=0.3,
        sigma2_s=0.0, sigma2_d=0.6536, sigma2_m=1.0,
    )
    return base.replace(phi_pi=1.0 / derive_reduced(base).sigma)


@pytest.fixture(scope="session")
def demo_panel(demo_calibration):
    """One simulated sample at the demo calibration (T = 200)."""
    plan = SimulationPlan(params=demo_calibration, total_length=400,
                          burn_in_head=100, burn_in_tail=100, seed=7)
    return simulate_observables(plan)


@pytest.fixture(scope="session")
def gmm_panel(demo_calibration):
    """Simulated panel with a labor-share proxy for the pricing equation."""
    plan = SimulationPlan(params=demo_calibration, total_length=419,
                          burn_in_head=100, burn_in_tail=100, seed=20)
    panel = simulate_observables(plan)
    rng = np.random.default_rng(1)
    ls = (demo_calibration.gamma + demo_calibration.phi) * panel.column("x")
    ls = ls + 0.3 * rng.standard_normal(len(panel))
    return panel.with_column("labor_share", ls)
