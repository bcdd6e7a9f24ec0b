"""Structural and reduced-form parameters of the behavioral New Keynesian model.

The structural vector collects the deep parameters of the three-equation
model (IS curve, Phillips curve, interest-rate rule) together with the
shock-law parameters.  The reduced-form block maps the behavioral
attention/myopia parameter into the aggregate attention coefficients of
consumers and firms, the effective intertemporal elasticity of
substitution, and the Phillips-curve slope (Gabaix 2020).
"""

from __future__ import annotations

import dataclasses
import io
from dataclasses import dataclass

from .errors import ConfigError, DomainError
from .validation import check_interval, check_positive

#: Canonical ordering of the structural parameter vector.
PARAM_NAMES = (
    "beta",
    "theta",
    "m_bar",
    "gamma",
    "phi",
    "phi_pi",
    "phi_x",
    "rho_i",
    "rho_d",
    "rho_m",
    "sigma2_s",
    "sigma2_d",
    "sigma2_m",
)


@dataclass(frozen=True)
class StructuralParams:
    """Deep parameters of the behavioral model.

    Parameters
    ----------
    beta : float
        Discount factor, quarterly, in (0, 1).
    theta : float
        Price survival rate (Calvo), in (0, 1).
    m_bar : float
        Cognitive discounting / myopia, in [0, 1]; 1 recovers the
        fully rational benchmark.
    gamma : float
        Risk aversion, > 0.
    phi : float
        Inverse Frisch elasticity, >= 0.
    phi_pi, phi_x : float
        Interest-rate rule responses to inflation and the output gap.
    rho_i : float
        Interest-rate smoothing, in [0, 1).
    rho_d, rho_m : float
        Demand and monetary shock persistences, in [0, 1).
    sigma2_s, sigma2_d, sigma2_m : float
        Innovation variances (squared percentage points), >= 0.
    """

    beta: float = 0.99
    theta: float = 0.875
    m_bar: float = 1.0
    gamma: float = 1.0
    phi: float = 1.0
    phi_pi: float = 1.5
    phi_x: float = 0.125
    rho_i: float = 0.0
    rho_d: float = 0.0
    rho_m: float = 0.0
    sigma2_s: float = 0.0
    sigma2_d: float = 1.0
    sigma2_m: float = 1.0

    def __post_init__(self):
        check_interval("beta", self.beta, 0.0, 1.0)
        check_interval("theta", self.theta, 0.0, 1.0)
        check_interval("m_bar", self.m_bar, 0.0, 1.0, closed_lo=True, closed_hi=True)
        check_positive("gamma", self.gamma)
        check_positive("phi", self.phi, strict=False)
        for name in ("rho_i", "rho_d", "rho_m"):
            check_interval(name, getattr(self, name), 0.0, 1.0, closed_lo=True)
        for name in ("sigma2_s", "sigma2_d", "sigma2_m"):
            check_positive(name, getattr(self, name), strict=False)

    def replace(self, **changes) -> "StructuralParams":
        """Return a copy with the given fields replaced (re-validated)."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, values) -> "StructuralParams":
        unknown = set(values) - set(PARAM_NAMES)
        if unknown:
            raise DomainError(f"unknown parameter names: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})

    def values_of(self, names) -> list:
        return [float(getattr(self, n)) for n in names]

    def with_values(self, names, values) -> "StructuralParams":
        """Copy with the named entries replaced by the given values."""
        return self.replace(**{n: float(v) for n, v in zip(names, values)})

    def to_config_text(self) -> str:
        """Serialize to the flat ``name = value`` text format."""
        buf = io.StringIO()
        for name in PARAM_NAMES:
            buf.write(f"{name} = {getattr(self, name)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_config_text(cls, text) -> "StructuralParams":
        values = parse_config_text(text)
        return cls.from_dict({k: float(v) for k, v in values.items()})


def parse_config_text(text) -> dict:
    """Parse flat ``name = value`` lines into an ordered string dict.

    Blank lines and lines starting with ``#`` are ignored.  Values are kept
    as strings; callers coerce them.
    """
    out = {}
    for lineno, raw in enumerate(str(text).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'name = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key in {raw!r}")
        out[key] = value.strip()
    return out


@dataclass(frozen=True)
class ReducedParams:
    """Reduced-form coefficients implied by the structural parameters.

    Attributes
    ----------
    M : float
        Aggregate consumer attention (equals ``m_bar``).
    Mf : float
        Aggregate firm attention, in [0, 1].
    sigma : float
        Effective intertemporal elasticity of substitution, ``beta / gamma``.
    kappa : float
        Phillips-curve slope.
    R : float
        Gross discount rate, ``1 / beta``.
    """

    M: float
    Mf: float
    sigma: float
    kappa: float
    R: float

    @property
    def beta(self) -> float:
        return 1.0 / self.R

    @property
    def beta_mf(self) -> float:
        """Discounted firm attention ``beta * Mf`` entering the Phillips curve."""
        return self.Mf / self.R


def firm_attention(m_bar, beta, theta) -> float:
    """Aggregate firm attention implied by myopia ``m_bar``.

    ``Mf = m_bar * (theta + (1 - beta*theta) / (1 - beta*theta*m_bar) * (1 - theta))``.
    Equals 1 when ``m_bar`` is 1 and is proportional to ``m_bar`` near 0.
    """
    denom = 1.0 - beta * theta * m_bar
    if denom <= 0.0:
        raise DomainError(f"1 - beta*theta*m_bar must be positive, got {denom}")
    return m_bar * (theta + (1.0 - beta * theta) / denom * (1.0 - theta))


def phillips_slope(gamma, phi, beta, theta) -> float:
    """Phillips-curve slope ``kappa = (1/theta - 1) (1 - beta*theta) (gamma + phi)``."""
    if theta == 0.0:
        raise DomainError("theta must be nonzero in the Phillips-curve slope")
    return (1.0 / theta - 1.0) * (1.0 - beta * theta) * (gamma + phi)


def effective_eis(gamma, beta) -> float:
    """Effective intertemporal elasticity of substitution ``sigma = 1/(gamma R)``.

    Firms discount at the gross rate ``R = 1/beta``, so this equals
    ``beta / gamma``.
    """
    if gamma <= 0.0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    return beta / gamma


def derive_reduced(params: StructuralParams) -> ReducedParams:
    """Map structural parameters into the reduced-form block.

    Parameters
    ----------
    params : StructuralParams

    Returns
    -------
    ReducedParams
    """
    if params.theta == 0.0:
        raise DomainError("theta = 0 makes the Phillips-curve slope undefined")
    if params.gamma <= 0.0:
        raise DomainError(f"gamma must be > 0, got {params.gamma}")
    return ReducedParams(
        M=params.m_bar,
        Mf=firm_attention(params.m_bar, params.beta, params.theta),
        sigma=effective_eis(params.gamma, params.beta),
        kappa=phillips_slope(params.gamma, params.phi, params.beta, params.theta),
        R=1.0 / params.beta,
    )
