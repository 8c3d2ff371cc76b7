"""Reference values computed independently of the package.

Nothing here imports ``elastic_reflect``.  The Ornstein-Uhlenbeck
eigenfunction comes from parabolic cylinder functions, so these routes
share no code with the Riccati integrator.
"""
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import pbdv


def const_root(b, sigma, lam):
    """Positive root of 0.5 sigma^2 u^2 + b u - lam via numpy.roots."""
    r = np.roots([0.5 * sigma ** 2, b, -lam])
    return float(max(r.real))


def ou_log_phi(x, lam, beta, sigma=1.0, alpha=0.0):
    """log Phi(x) for drift alpha - beta x, up to an additive constant.

    Phi(x) = exp(xi^2/4) D_{-lam/beta}(-xi), xi = (x - alpha/beta) sqrt(2 beta)/sigma.
    """
    xi = (x - alpha / beta) * math.sqrt(2 * beta) / sigma
    d, _ = pbdv(-lam / beta, -xi)
    return xi * xi / 4 + math.log(d)


def ou_u(x, lam, beta, sigma=1.0, alpha=0.0):
    xi = (x - alpha / beta) * math.sqrt(2 * beta) / sigma
    d, dp = pbdv(-lam / beta, -xi)
    return math.sqrt(2 * beta) / sigma * (xi / 2 - dp / d)


def ou_hitting_lt(x, z, lam, beta, sigma=1.0, alpha=0.0):
    """E_x exp(-lam T_z) = Phi(x)/Phi(z), x <= z."""
    return math.exp(ou_log_phi(x, lam, beta, sigma, alpha) - ou_log_phi(z, lam, beta, sigma, alpha))


def bm_limit_lt(lam, ell, g, sigma=1.0, mu=0.0):
    """Constant coefficients: exponent u * (g(ell) - g(0) + ell)."""
    return math.exp(-const_root(mu, sigma, lam) * (g(ell) - g(0.0) + ell))


def ou_discrete_lt(lam, ell, eps, g, beta, sigma=1.0, alpha=0.0):
    """Product over excursions of Phi(g((n-1)eps) - eps) / Phi(g(n eps))."""
    k = int(round(ell / eps)) if abs(round(ell / eps) * eps - ell) < 1e-12 else int(ell // eps)
    logv = 0.0
    for n in range(1, k + 1):
        logv += ou_log_phi(g((n - 1) * eps) - eps, lam, beta, sigma, alpha)
        logv -= ou_log_phi(g(n * eps), lam, beta, sigma, alpha)
    return math.exp(logv)


def ou_limit_lt(lam, ell, g, gprime, beta, sigma=1.0, alpha=0.0):
    """exp(-int_0^ell (g'(a) + 1) u(g(a)) da) by plain adaptive quadrature."""
    val, _ = quad(lambda a: (gprime(a) + 1) * ou_u(g(a), lam, beta, sigma, alpha), 0, ell,
                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return math.exp(-val)


def floor_max_local_time(eps, levels_plus_index, running_max):
    """eps * (1 + #{n >= 1 : g(n eps) + n eps <= running max of the free path})."""
    return eps * (1 + np.searchsorted(levels_plus_index, running_max, side="right"))
