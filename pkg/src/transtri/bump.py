"""Smooth bump-function calculus on the standard simplex.

Everything here is built from the classic flat mollifier

    rho(r) = exp(-1/r)   for r > 0,
    rho(r) = 0           for r <= 0,

which is smooth on all of R with every derivative vanishing at r = 0.
Its derivatives have the closed form exp(-1/r) * P_k(1/r) with P_k a
polynomial, so they can be evaluated exactly up to order 4.

Products of rho over simplex coordinates give

    rho_l(t) = rho(1 - sum t_i) * prod rho(t_i),

nonnegative on R^l and strictly positive exactly on the open standard
l-simplex {t : t_i > 0, sum t_i < 1}.  For l = 0 the simplex has no
boundary and rho_0 is taken to be the constant 1.

On top of these the module provides:

* ``beta``, a smooth step equal to 1 on r <= 1/2 and 0 on r >= 1, realized
  as rho(1-r) / (rho(1-r) + rho(r-1/2)), and ``c_beta``, a sampled upper
  bound for sup |beta'|;
* ``warp``, the super-flat factor exp(-1/rho_l(t)) that fades normal
  displacements toward the simplex boundary faster than any power of
  rho_l.

All branch functions return exact zeros on their flat branches, so the
vanishing of derivatives at the glue locus holds identically in floating
point, and near-boundary underflow produces a clean 0.0 rather than NaN.
"""

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "RHO_DERIV_MAX",
    "rho",
    "rho_deriv",
    "rho_l",
    "rho_l_grad",
    "rho_l_hess",
    "beta",
    "beta_deriv",
    "c_beta",
    "warp",
    "scaled_warp",
]

RHO_DERIV_MAX = 4

# Coefficients (ascending powers of u = 1/r) of P_k in
# d^k/dr^k exp(-1/r) = exp(-1/r) * P_k(1/r); P_{k+1} = u^2 (P_k - P_k').
_RHO_POLYS = (
    np.array([1.0]),
    np.array([0.0, 0.0, 1.0]),
    np.array([0.0, 0.0, 0.0, -2.0, 1.0]),
    np.array([0.0, 0.0, 0.0, 0.0, 6.0, -6.0, 1.0]),
    np.array([0.0, 0.0, 0.0, 0.0, 0.0, -24.0, 36.0, -12.0, 1.0]),
)

# exp underflows to 0.0 below roughly -745; switch to log-domain evaluation
# well before the polynomial factor can overflow.
_LOG_SAFE_U = 500.0


def rho(r):
    """Flat mollifier exp(-1/r) on r > 0, identically 0 on r <= 0."""
    if r <= 0.0:
        return 0.0
    return math.exp(-1.0 / r)


def rho_deriv(r, k):
    """k-th derivative of rho at r, exact closed form, k <= RHO_DERIV_MAX."""
    if not 0 <= k <= RHO_DERIV_MAX:
        raise ValueError(f"derivative order {k} unsupported (max {RHO_DERIV_MAX})")
    if r <= 0.0:
        return 0.0
    u = 1.0 / r
    coeffs = _RHO_POLYS[k]
    poly = float(np.polyval(coeffs[::-1], u))
    if u > _LOG_SAFE_U:
        if poly == 0.0:
            return 0.0
        return math.copysign(math.exp(-u + math.log(abs(poly))), poly)
    return math.exp(-u) * poly


def rho_l(t):
    """Simplex bump rho(1 - sum t) * prod rho(t_i); constant 1 for l = 0.

    Positive exactly on the open standard simplex of dimension len(t).
    """
    t = np.asarray(t, dtype=float)
    if t.size == 0:
        return 1.0
    val = rho(1.0 - float(t.sum()))
    for ti in t:
        if val == 0.0:
            return 0.0
        val *= rho(float(ti))
    return val


def _factor_data(t):
    # Factor values and first/second derivatives w.r.t. their scalar argument.
    # Factor 0 is rho(1 - sum t); factor a >= 1 is rho(t_a).
    u = 1.0 - float(t.sum())
    args = [u] + [float(ti) for ti in t]
    g = [rho(a) for a in args]
    g1 = [rho_deriv(a, 1) for a in args]
    g2 = [rho_deriv(a, 2) for a in args]
    return g, g1, g2


def rho_l_grad(t):
    """Gradient of rho_l, exact zeros outside the open simplex."""
    t = np.asarray(t, dtype=float)
    l = t.size
    if l == 0:
        return np.zeros(0)
    g, g1, _ = _factor_data(t)
    grad = np.zeros(l)
    for j in range(l):
        # d/dt_j hits factor 0 with a sign flip, and factor j+1 directly.
        term0 = -g1[0]
        for a in range(1, l + 1):
            term0 *= g[a]
        termj = g1[j + 1]
        for a in range(l + 1):
            if a == j + 1:
                continue
            termj *= g[a]
        grad[j] = term0 + termj
    return grad


def rho_l_hess(t):
    """Hessian of rho_l via the generic product rule over factors."""
    t = np.asarray(t, dtype=float)
    l = t.size
    if l == 0:
        return np.zeros((0, 0))
    g, g1, g2 = _factor_data(t)
    n_fac = l + 1

    def d1(a, j):
        # derivative of factor a w.r.t. t_j
        if a == 0:
            return -g1[0]
        return g1[a] if a == j + 1 else 0.0

    def d2(a, j, k):
        if a == 0:
            return g2[0]
        return g2[a] if (a == j + 1 and a == k + 1) else 0.0

    def prod_except(skip):
        out = 1.0
        for a in range(n_fac):
            if a in skip:
                continue
            out *= g[a]
        return out

    hess = np.zeros((l, l))
    for j in range(l):
        for k in range(j, l):
            val = 0.0
            for a in range(n_fac):
                val += d2(a, j, k) * prod_except({a})
            for a in range(n_fac):
                for c in range(n_fac):
                    if a == c:
                        continue
                    val += d1(a, j) * d1(c, k) * prod_except({a, c})
            hess[j, k] = val
            hess[k, j] = val
    return hess


def beta(r):
    """Smooth step: 1 for r <= 1/2, 0 for r >= 1, rho-ratio blend between."""
    if r <= 0.5:
        return 1.0
    if r >= 1.0:
        return 0.0
    a = rho(1.0 - r)
    b = rho(r - 0.5)
    return a / (a + b)


def beta_deriv(r):
    """First derivative of beta, exactly 0 outside (1/2, 1)."""
    if r <= 0.5 or r >= 1.0:
        return 0.0
    a = rho(1.0 - r)
    b = rho(r - 0.5)
    da = -rho_deriv(1.0 - r, 1)
    db = rho_deriv(r - 0.5, 1)
    return (da * b - a * db) / (a + b) ** 2


@lru_cache(maxsize=1)
def c_beta():
    """Sampled upper bound for sup |beta'| (dense grid times 1.05).

    Only ever used through constraints of the form eps < 1/c_beta, so an
    over-estimate is safe.
    """
    rs = np.linspace(0.5, 1.0, 10_001)
    m = max(abs(beta_deriv(float(r))) for r in rs)
    return 1.05 * m


def scaled_warp(rho_value, power=0):
    """exp(-1/rho) * rho**(-power), evaluated in log space.

    Underflow-coherent: returns exact 0.0 when the combined exponent falls
    below the representable range, and 0.0 when rho_value == 0.
    """
    if rho_value <= 0.0:
        return 0.0
    expo = -1.0 / rho_value - power * math.log(rho_value)
    if expo < -745.0:
        return 0.0
    return math.exp(expo)


def warp(t):
    """Super-flat fade factor exp(-1/rho_l(t)).

    Returns the continuous extension by zero outside the open simplex, so
    near-boundary evaluation underflows gracefully to 0.0 instead of
    raising or producing NaN.
    """
    return scaled_warp(rho_l(t), 0)
