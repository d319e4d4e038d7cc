"""Independent reference computations used to pin expected test values.

Everything here is deliberately written against scipy.integrate.quad and
closed forms, so it shares no code with the package implementations it
checks. Keep it that way: these oracles are the second route in every
dual-route test.
"""

import numpy as np
from scipy.integrate import quad

LOG_2PI = np.log(2.0 * np.pi)


def two_point_labels(p1):
    """Zero-mean, unit-second-moment embedding of a two-community prior."""
    p2 = 1.0 - p1
    return np.sqrt(p2 / p1), -np.sqrt(p1 / p2)


def _density(y, s, p1):
    mu1, mu2 = two_point_labels(p1)
    rs = np.sqrt(s)
    f1 = np.exp(-0.5 * (y - rs * mu1) ** 2) / np.sqrt(2 * np.pi)
    f2 = np.exp(-0.5 * (y - rs * mu2) ** 2) / np.sqrt(2 * np.pi)
    return p1 * f1 + (1.0 - p1) * f2, f1, f2


def binary_info_quad(s, p1=0.5):
    """I(X;Y) in nats for Y = sqrt(s) X + N, X on the two-point embedding.

    Computed as sum_a p_a E_z[ log f(y|a) - log f(y) ] with adaptive
    quadrature over the noise variable.
    """
    if s == 0.0:
        return 0.0
    mu1, mu2 = two_point_labels(p1)
    rs = np.sqrt(s)
    total = 0.0
    for pa, mua in ((p1, mu1), (1.0 - p1, mu2)):
        def integrand(z, mua=mua):
            y = rs * mua + z
            fy, _, _ = _density(y, s, p1)
            log_cond = -0.5 * z * z - 0.5 * LOG_2PI
            return np.exp(log_cond) * (log_cond - np.log(fy))
        val, _ = quad(integrand, -12, 12, limit=200, epsabs=1e-12, epsrel=1e-12)
        total += pa * val
    return total


def binary_mmse_quad(s, p1=0.5):
    """E[(X - E[X|Y])^2] for the same channel; equals 1 at s=0."""
    if s == 0.0:
        return 1.0
    mu1, mu2 = two_point_labels(p1)

    def integrand(y):
        fy, f1, f2 = _density(y, s, p1)
        m = (p1 * mu1 * f1 + (1.0 - p1) * mu2 * f2) / fy
        return fy * m * m

    lo = np.sqrt(s) * mu2 - 12
    hi = np.sqrt(s) * mu1 + 12
    second_moment, _ = quad(integrand, lo, hi, limit=200, epsabs=1e-12, epsrel=1e-12)
    return 1.0 - second_moment


def binary_info_via_mmse(s, p1=0.5):
    """Second route to the same information value: integrate the error curve.

    Uses d/ds I(s) = mmse(s) / 2, so I(s) = (1/2) * int_0^s mmse(t) dt.
    """
    val, _ = quad(lambda t: binary_mmse_quad(t, p1), 0.0, s,
                  limit=200, epsabs=1e-10, epsrel=1e-10)
    return 0.5 * val


def entropy(p):
    p = np.asarray(p, dtype=float)
    return float(-np.sum(p * np.log(p)))


def scalar_potential(u, lam, alpha=0.0, s0=0.0, p1=0.5):
    """One-layer, two-community objective: mixed info term plus quartic tail."""
    s_eff = s0 + lam * lam * (1.0 - u)
    info = alpha * entropy([p1, 1 - p1]) + (1 - alpha) * binary_info_quad(s_eff, p1)
    return info + 0.25 * lam * lam * u * u


def grid_minimize_scalar(lam, alpha=0.0, s0=0.0, p1=0.5, step=1e-3):
    """Exhaustive scan of the unit interval; ties resolved toward smaller u."""
    us = np.arange(0.0, 1.0 + step / 2, step)
    vals = np.array([scalar_potential(u, lam, alpha, s0, p1) for u in us])
    best = vals.min()
    idx = int(np.flatnonzero(vals <= best + 1e-8)[0])
    return us[idx], vals[idx]
