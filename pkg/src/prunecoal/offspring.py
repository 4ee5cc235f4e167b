"""Offspring laws of the heavy-tailed critical branching tree.

Everything here is a pure function of scalar arguments.  Formula evaluation
accepts alpha in (0,1); the samplers additionally restrict to [1/2, 1), where
the offspring coefficients are genuine probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, gammasgn


def require_formula_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1), got %r" % alpha)
    return alpha


def require_sim_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.5 <= alpha < 1.0:
        raise ValueError("simulation requires alpha in [1/2, 1), got %r" % alpha)
    return alpha


def require_theta(theta: float) -> float:
    theta = float(theta)
    if theta < 0.0:
        raise ValueError("theta must be non-negative, got %r" % theta)
    return theta


@dataclass(frozen=True)
class AlphaParam:
    """Tail index alpha with its branching exponent gamma = 1/alpha."""

    alpha: float

    def __post_init__(self):
        require_formula_alpha(self.alpha)

    @property
    def gamma(self) -> float:
        return 1.0 / self.alpha

    def require_simulation(self) -> "AlphaParam":
        require_sim_alpha(self.alpha)
        return self


# -- critical offspring law ---------------------------------------------------


def offspring_pmf(alpha: float, k: int) -> float:
    """Mass at k of the critical offspring law with gf r + alpha*(1-r)^(1/alpha).

    nu(0) = alpha, nu(1) = 0, and for k >= 2 the k-th Taylor coefficient of
    alpha*(1-r)^gamma.  For alpha in (0, 1/2) some coefficients are negative;
    they are returned signed.
    """
    alpha = require_formula_alpha(alpha)
    k = int(k)
    if k < 0:
        raise ValueError("k must be non-negative")
    g = 1.0 / alpha
    if k == 0:
        return alpha
    if k == 1:
        return 0.0
    if k <= 256:
        # recurrence nu(j+1) = nu(j) * (j - gamma) / (j + 1), seeded at k = 2
        v = 0.5 * alpha * g * (g - 1.0)
        for j in range(2, k):
            v *= (j - g) / (j + 1.0)
        return v
    if abs(g - round(g)) < 1e-12 and k > g:
        return 0.0  # polynomial gf: coefficients vanish beyond degree gamma
    sign = gammasgn(k - g) * gammasgn(2.0 - g)
    mag = (
        math.log(alpha * g * (g - 1.0))
        + gammaln(k - g)
        - gammaln(2.0 - g)
        - gammaln(k + 1)
    )
    return sign * math.exp(mag)


def offspring_pmf_table(alpha: float, kmax: int) -> np.ndarray:
    """nu(0..kmax) via the multiplicative recurrence (cancellation-free)."""
    alpha = require_formula_alpha(alpha)
    g = 1.0 / alpha
    out = np.zeros(kmax + 1)
    out[0] = alpha
    if kmax >= 2:
        ks = np.arange(2, kmax, dtype=float)
        factors = (ks - g) / (ks + 1.0)
        out[2] = 0.5 * alpha * g * (g - 1.0)
        if kmax > 2:
            out[3:] = out[2] * np.cumprod(factors)
    return out


def offspring_pmf_pruned(alpha: float, theta: float, k: int) -> float:
    """Offspring mass at k after cutting at intensity theta.

    Masses at k >= 2 shrink by (1+theta)^(1-k); the deficit moves to k = 0.
    """
    alpha = require_formula_alpha(alpha)
    theta = require_theta(theta)
    k = int(k)
    if k < 0:
        raise ValueError("k must be non-negative")
    g = 1.0 / alpha
    if k == 0:
        if theta == 0.0:
            return alpha
        ratio_pow = math.exp(g * (math.log(theta) - math.log1p(theta)))
        return alpha * (1.0 + theta) * (1.0 - ratio_pow)
    if k == 1:
        return 0.0
    return offspring_pmf(alpha, k) * math.exp((1.0 - k) * math.log1p(theta))


def leaf_count_pmf(alpha: float, n: int) -> float:
    """Probability that the unconditioned critical tree has exactly n leaves."""
    alpha = require_formula_alpha(alpha)
    n = int(n)
    if n < 1:
        raise ValueError("leaf count must be positive")
    if n == 1:
        return alpha
    return math.exp(
        math.log(alpha) + gammaln(n - alpha) - gammaln(n + 1) - gammaln(1.0 - alpha)
    )


def leaf_count_logpmf(alpha: float, n: int) -> float:
    alpha = require_formula_alpha(alpha)
    n = int(n)
    if n < 1:
        raise ValueError("leaf count must be positive")
    if n == 1:
        return math.log(alpha)
    return (
        math.log(alpha) + gammaln(n - alpha) - gammaln(n + 1) - gammaln(1.0 - alpha)
    )


# -- generating functions -----------------------------------------------------


def _check_r(r: float) -> float:
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1], got %r" % r)
    return r


def gf_g(alpha: float, r: float) -> float:
    alpha = require_formula_alpha(alpha)
    r = _check_r(r)
    return r + alpha * (1.0 - r) ** (1.0 / alpha)


def gf_g_theta(alpha: float, theta: float, r: float) -> float:
    """Offspring gf after cutting at intensity theta; equals gf_g at theta=0."""
    alpha = require_formula_alpha(alpha)
    theta = require_theta(theta)
    r = _check_r(r)
    g = 1.0 / alpha
    num = (1.0 - r + theta) ** g - theta**g
    return r + alpha * num / (1.0 + theta) ** (g - 1.0)


def leaf_gf(alpha: float, t: float) -> float:
    """Generating function of the leaf count: 1 - (1-t)^alpha."""
    alpha = require_formula_alpha(alpha)
    t = _check_r(t)
    return -math.expm1(alpha * math.log1p(-t)) if t < 1.0 else 1.0


def _survival_factor(alpha: float, theta: float) -> float:
    # 1 - (theta/(1+theta))^(1/alpha)
    if theta == 0.0:
        return 1.0
    g = 1.0 / alpha
    return -math.expm1(g * (math.log(theta) - math.log1p(theta)))


def h_theta(alpha: float, theta: float, r: float) -> float:
    """Leaf-count gf of the tree cut at intensity theta."""
    alpha = require_formula_alpha(alpha)
    theta = require_theta(theta)
    r = _check_r(r)
    c = _survival_factor(alpha, theta)
    inner = 1.0 - r * c
    return (1.0 + theta) * (1.0 - inner**alpha)


def h_theta_prime(alpha: float, theta: float, r: float) -> float:
    """d/dr of h_theta; used by the size-biased leaf-count oracle."""
    alpha = require_formula_alpha(alpha)
    theta = require_theta(theta)
    r = _check_r(r)
    c = _survival_factor(alpha, theta)
    inner = 1.0 - r * c
    return (1.0 + theta) * alpha * c * inner ** (alpha - 1.0)


# -- conditioned tree law -----------------------------------------------------


def tree_log_prob_given_leaves(alpha: float, tree) -> float:
    """log-probability of an ordered tree conditioned on its leaf count.

    Product of offspring masses over all nodes divided by the leaf-count mass;
    -inf when some node degree has zero mass (e.g. degree 3 at alpha = 1/2).
    """
    alpha = require_formula_alpha(alpha)
    if not tree.is_gw_valid():
        raise ValueError("tree has a node with exactly one child")
    n = tree.leaf_count()
    total = 0.0
    for k in tree.child_counts:
        p = offspring_pmf(alpha, k)
        if p <= 0.0:
            return float("-inf")
        total += math.log(p)
    return total - leaf_count_logpmf(alpha, n)


def mean_root_excess(alpha: float, n: int) -> float:
    """Expected root degree minus one for the tree conditioned on n leaves."""
    alpha = require_formula_alpha(alpha)
    n = int(n)
    if n < 2:
        raise ValueError("n must be at least 2")
    return ((1.0 - alpha) / alpha) * math.exp(
        gammaln(1.0 - alpha)
        - gammaln(alpha)
        + gammaln(n - 1.0 + alpha)
        - gammaln(n - alpha)
    )
