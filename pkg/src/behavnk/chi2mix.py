"""Two-component chi-square mixture: ``(1+a) X_p + a X_{k-p}``.

``X_p`` and ``X_{k-p}`` are independent chi-square variables.  This is the
null distribution of the linear combination ``K + a S`` of the K and S
statistics, whose quantiles calibrate identification-robust confidence
sets (I. Andrews 2018).  The CDF conditions on the second component and
integrates the smooth convolution; the quantile inverts it by bracketed
root-finding.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize
from scipy.stats import chi2

from .errors import DomainError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(200)


def _gauss_legendre(fn, lo, hi):
    half = 0.5 * (hi - lo)
    pts = lo + half * (_GL_NODES + 1.0)
    return half * float(np.sum(_GL_WEIGHTS * fn(pts)))


def _check_akp(a, k, p):
    if not np.isfinite(a) or a < 0.0:
        raise DomainError(f"mixture weight a must be >= 0, got {a}")
    k = int(k)
    p = int(p)
    if not 1 <= p <= k:
        raise DomainError(f"need 1 <= p <= k, got p={p}, k={k}")
    return float(a), k, p


def chi2mix_cdf(x, a, k, p) -> float:
    """CDF of ``(1+a) chi2_p + a chi2_{k-p}`` at ``x``.

    Exact special cases: ``a = 0`` reduces to chi-square with ``p`` degrees
    of freedom; ``k = p`` to a scaled chi-square.
    """
    a, k, p = _check_akp(a, k, p)
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if a == 0.0:
        return float(chi2.cdf(x, p))
    if k == p:
        return float(chi2.cdf(x / (1.0 + a), p))

    # P(Q <= x) = E_Y[ F_{chi2_p}((x - a Y)/(1+a)) ] with Y ~ chi2_{k-p};
    # the integrand vanishes beyond Y = x/a.  Endpoint substitutions keep
    # each Gauss-Legendre panel smooth: Y = s^2 removes the half-power
    # density behavior at 0 (odd k - p), and Y = L - v^2 removes the
    # half-power kink of the chi-square CDF at the upper limit.
    df2 = k - p
    limit = x / a
    y_cap = float(chi2.isf(1e-18, df2))

    def lower_piece(lo, hi):
        return _gauss_legendre(
            lambda s: chi2.cdf((x - a * s * s) / (1.0 + a), p)
            * chi2.pdf(s * s, df2) * 2.0 * s,
            np.sqrt(lo), np.sqrt(hi),
        )

    if limit > y_cap:
        prob = lower_piece(0.0, y_cap)
    else:
        mid = 0.5 * limit
        prob = lower_piece(0.0, mid) + _gauss_legendre(
            lambda v: chi2.cdf(a * v * v / (1.0 + a), p)
            * chi2.pdf(limit - v * v, df2) * 2.0 * v,
            0.0, np.sqrt(limit - mid),
        )
    return float(min(max(prob, 0.0), 1.0))


def chi2mix_quantile(q, a, k, p) -> float:
    """Quantile of the mixture, inverting :func:`chi2mix_cdf`."""
    a, k, p = _check_akp(a, k, p)
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must be in (0, 1), got {q}")
    if a == 0.0:
        return float(chi2.ppf(q, p))
    if k == p:
        return float((1.0 + a) * chi2.ppf(q, p))
    mean = (1.0 + a) * p + a * (k - p)
    sd = np.sqrt(2.0 * (1.0 + a) ** 2 * p + 2.0 * a**2 * (k - p))
    hi = mean + 10.0 * sd
    while chi2mix_cdf(hi, a, k, p) < q:
        hi *= 2.0
        if hi > 1e12:
            raise DomainError(f"quantile bracket failed for q={q}")
    return float(optimize.brentq(lambda x: chi2mix_cdf(x, a, k, p) - q, 0.0, hi, xtol=1e-10))


def gamma_of_a(a, alpha, k, p=1) -> float:
    """Coverage distortion of the ``K + a S`` set at the plain chi-square cutoff.

    ``gamma(a) = 1 - alpha - Pr[(1+a) chi2_p + a chi2_{k-p} <= chi2_{p,1-alpha}]``;
    zero at ``a = 0`` and increasing to ``1 - alpha`` as ``a`` grows.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    cutoff = float(chi2.ppf(1.0 - alpha, p))
    return float(1.0 - alpha - chi2mix_cdf(cutoff, a, k, p))


def a_of_gamma(gamma, alpha, k, p=1) -> float:
    """Mixture weight achieving a target coverage distortion.

    Monotone inverse of :func:`gamma_of_a` by bracketed root-finding;
    raises when ``gamma`` lies outside the achievable range ``[0, 1-alpha)``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    if gamma < 0.0 or gamma >= 1.0 - alpha:
        raise DomainError(
            f"gamma must lie in [0, 1-alpha) = [0, {1.0 - alpha}), got {gamma}"
        )
    if gamma == 0.0:
        return 0.0
    hi = 1.0
    while gamma_of_a(hi, alpha, k, p) < gamma:
        hi *= 4.0
        if hi > 1e10:
            raise DomainError(f"no mixture weight reaches distortion {gamma}")
    return float(
        optimize.brentq(lambda a: gamma_of_a(a, alpha, k, p) - gamma, 0.0, hi, xtol=1e-10)
    )
