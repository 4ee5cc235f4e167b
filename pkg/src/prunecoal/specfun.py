"""Closed forms and quadratures for the limit laws.

Every closed form here has an independent numerical route (adaptive
quadrature, series, or a second algebraic derivation) and the test suite
cross-checks the two.  Endpoint singularities are handled by short analytic
series heads rather than by subdivision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, gammasgn

from .offspring import mean_root_excess, require_formula_alpha

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUAD",
    "phi_subordinator",
    "z_moment",
    "phi_alpha",
    "b_pmf",
    "b_pmf_table",
    "b_pmf_tail_bound",
    "mean_root_excess",
]


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    endpoint_mode: str = "series"  # "series" or "raw"

    def __post_init__(self):
        if self.rel_tol <= 1e2 * np.finfo(float).eps:
            raise ValueError("tolerance too close to machine epsilon")


DEFAULT_QUAD = QuadratureSpec()

_EPS_HEAD = 1e-6


def _quad(f, a, b, spec: QuadratureSpec) -> float:
    val, _ = quad(f, a, b, epsabs=0.0, epsrel=spec.rel_tol,
                  limit=spec.max_subdivisions)
    return val


# -- Laplace exponent of the event-count subordinator --------------------------


def phi_subordinator(
    alpha: float, lam: float, mode: str = "closed", spec: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """integral of (1 - (1-x)^lam) x^(alpha-2) (1-x)^(-alpha) over (0,1).

    Closed form lam * G(alpha) G(lam+1-alpha) / ((1-alpha) G(lam+1)),
    valid for lam > alpha - 1.
    """
    alpha = require_formula_alpha(alpha)
    lam = float(lam)
    if lam <= alpha - 1.0:
        raise ValueError("lambda must exceed alpha - 1")
    if mode == "closed":
        if lam == 0.0:
            return 0.0
        mag = (
            math.log(abs(lam))
            + gammaln(alpha)
            + gammaln(lam + 1.0 - alpha)
            - math.log(1.0 - alpha)
            - gammaln(lam + 1.0)
        )
        return math.copysign(math.exp(mag), lam)
    if mode != "quadrature":
        raise ValueError("mode must be 'closed' or 'quadrature'")

    def integrand(x):
        one_m = -math.expm1(lam * math.log1p(-x))
        return one_m * x ** (alpha - 2.0) * (1.0 - x) ** (-alpha)

    if spec.endpoint_mode == "raw":
        return _quad(integrand, 0.0, 1.0, spec)
    e = _EPS_HEAD
    # x -> 0: integrand = lam x^(alpha-1) (1 + (alpha - (lam-1)/2) x + O(x^2))
    head0 = lam * (
        e**alpha / alpha
        + (alpha - (lam - 1.0) / 2.0) * e ** (alpha + 1.0) / (alpha + 1.0)
    )
    # x -> 1 (y = 1-x): (1 - y^lam) y^(-alpha) (1 + (2-alpha) y + O(y^2))
    head1 = (
        e ** (1.0 - alpha) / (1.0 - alpha)
        - e ** (lam + 1.0 - alpha) / (lam + 1.0 - alpha)
        + (2.0 - alpha)
        * (e ** (2.0 - alpha) / (2.0 - alpha) - e ** (lam + 2.0 - alpha) / (lam + 2.0 - alpha))
    )
    return head0 + _quad(integrand, e, 1.0 - e, spec) + head1


# -- moments of the rescaled cut count -----------------------------------------


def z_moment(alpha: float, j: int, via: str = "closed") -> float:
    """j-th moment of the limit of n^(alpha-1) Z_n.

    'closed': alpha^j j! G(1-alpha) / G((j+1)(1-alpha)).
    'product': j! (G(1+alpha)/(1-alpha))^j / prod_i phi(i (1-alpha)); the two
    must agree to 1e-12.
    """
    alpha = require_formula_alpha(alpha)
    j = int(j)
    if j < 0:
        raise ValueError("moment order must be non-negative")
    if j == 0:
        return 1.0
    if via == "closed":
        return math.exp(
            j * math.log(alpha)
            + gammaln(j + 1.0)
            + gammaln(1.0 - alpha)
            - gammaln((j + 1.0) * (1.0 - alpha))
        )
    if via != "product":
        raise ValueError("via must be 'closed' or 'product'")
    log_prod = 0.0
    for i in range(1, j + 1):
        log_prod += math.log(phi_subordinator(alpha, i * (1.0 - alpha)))
    return math.exp(
        gammaln(j + 1.0)
        + j * (gammaln(1.0 + alpha) - math.log(1.0 - alpha))
        - log_prod
    )


# -- generating function of the final-merge block count ------------------------


def phi_alpha(alpha: float, r: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """gf of the limit block count of the last merge, alpha in (-1, 1).

    alpha = 0 and alpha = -1 dispatch to their own closed/limit forms
    (r * integral of log(1-rx)/log(1-x), and r^2) rather than taking
    numerical limits.
    """
    alpha = float(alpha)
    r = float(r)
    if not -1.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [-1, 1)")
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    if r == 0.0:
        return 0.0
    if alpha == -1.0:
        return r * r
    if alpha == 0.0:

        def integrand0(x):
            if x <= 0.0:
                return r  # removable limit
            if x >= 1.0:
                return 1.0 if r == 1.0 else 0.0
            return math.log1p(-r * x) / math.log1p(-x)

        return r * _quad(integrand0, 0.0, 1.0, spec)

    def integrand(x):
        if x <= 0.0:
            return r  # removable limit
        num = math.expm1(-alpha * math.log1p(-r * x))
        den = -math.expm1(alpha * math.log1p(-x))
        return num / den

    if r == 1.0 and alpha > 0.0 and spec.endpoint_mode == "series":
        # near x=1 the integrand is exactly (1-x)^(-alpha); integrate the
        # last slice analytically and quadrate the rest
        e = _EPS_HEAD
        head1 = e ** (1.0 - alpha) / (1.0 - alpha)
        return (1.0 - alpha) * r * (_quad(integrand, 0.0, 1.0 - e, spec) + head1)
    return (1.0 - alpha) * r * _quad(integrand, 0.0, 1.0, spec)


def _b_coef_log(alpha: float, m: int):
    """(sign, log magnitude) of (1-alpha) * G(alpha+m-1) / (G(alpha) (m-1)!)."""
    sign = gammasgn(alpha + m - 1.0) * gammasgn(alpha)
    mag = (
        math.log(1.0 - alpha)
        + gammaln(alpha + m - 1.0)
        - gammaln(alpha)
        - gammaln(float(m))
    )
    return sign, mag


def b_pmf(alpha: float, m: int, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """P(final-merge block count = m) for the limit law; alpha in (-1, 1).

    m >= 2: (1-alpha) G(alpha+m-1)/(G(alpha) (m-1)!) * integral of
    x^(m-1) / (1 - (1-x)^alpha).  alpha = 0 uses the alternating-log sum.
    """
    alpha = float(alpha)
    if not -1.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (-1, 1)")
    m = int(m)
    if m < 1:
        raise ValueError("block count must be at least 1")
    if m == 1:
        return 0.0
    if alpha == 0.0:
        n = m - 1
        total = 0.0
        for k in range(1, n + 1):
            total += math.comb(n, k) * (-1.0) ** (k + 1) * math.log(k + 1.0)
        return total / n

    def integrand(x):
        return x ** (m - 1.0) / (-math.expm1(alpha * math.log1p(-x)))

    val = _quad(integrand, 0.0, 1.0, spec)
    sign, mag = _b_coef_log(alpha, m)
    return sign * math.exp(mag) * val


def b_pmf_table(alpha: float, m_max: int, nodes_per_panel: int = 64) -> np.ndarray:
    """b_pmf(alpha, m) for m = 1..m_max in one pass.

    Vectorized composite Gauss-Legendre with panels refined geometrically
    toward x = 1, where x^(m-1) concentrates.
    """
    alpha = float(alpha)
    if not -1.0 < alpha < 1.0 or alpha == 0.0:
        raise ValueError("table form needs alpha in (-1,1), alpha != 0")
    xs, ws = np.polynomial.legendre.leggauss(nodes_per_panel)
    # panels refine geometrically toward 1; the final 1e-13 sliver contributes
    # below resolution and would only feed log1p(-1) warnings
    edges = [0.0]
    gap = 1.0
    while gap > 1e-13:
        gap /= 2.0
        edges.append(1.0 - gap)
    nodes = []
    weights = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes.append(mid + half * xs)
        weights.append(half * ws)
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    f = w / (-np.expm1(alpha * np.log1p(-x)))
    ms = np.arange(1, m_max + 1)
    out = np.zeros(m_max + 1)
    powers = np.ones_like(x)
    for m in ms:
        if m >= 2:
            sign, mag = _b_coef_log(alpha, int(m))
            out[m] = sign * math.exp(mag) * float(f @ powers)
        powers = powers * x
    return out


def b_pmf_tail_bound(alpha: float, m_max: int) -> float:
    """Upper bound on the mass at block counts above m_max (alpha in (0,1)).

    Uses 1-(1-x)^alpha >= alpha x and the Gautschi ratio bound
    G(m-1+alpha)/G(m) < (m-1)^(alpha-1).
    """
    alpha = require_formula_alpha(alpha)
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    return (m_max - 1.0) ** (alpha - 1.0) / math.exp(gammaln(alpha + 1.0))
