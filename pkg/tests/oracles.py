"""Independent reference implementations used only by the tests.

These are written from the defining formulas with mpmath at high precision or
by brute-force summation, and share no code with the package.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def entropy(x) -> float:
    x = mp.mpf(x)
    if x == 0 or x == 1:
        return 0.0
    return float(-x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2))


def tau(n: int, mus, probs) -> float:
    return float(sum(mp.e ** (-mp.mpf(m)) * mp.mpf(m) ** n * mp.mpf(p) for m, p in zip(mus, probs)) / mp.factorial(n))


def chernoff(y, eps) -> tuple[float, float]:
    beta = mp.log(1 / mp.mpf(eps))
    y = mp.mpf(y)
    return (
        float(beta + mp.sqrt(2 * beta * y + beta**2)),
        float(beta / 2 + mp.sqrt(2 * beta * y + beta**2 / 4)),
    )


def gamma(a, b, c, d) -> float:
    a, b, c, d = (mp.mpf(v) for v in (a, b, c, d))
    if b == 0 or b == 1:
        return 0.0
    root = mp.sqrt((c + d) * (1 - b) * b / (c * d * mp.log(2)))
    return float(root * mp.log((c + d) / (c * d * (1 - b) * b) * 21**2 / a**2, 2))


def binomial_log_cdf_table(n: int, p: float) -> np.ndarray:
    """``log P[X <= k]`` for k = 0..n by summing the pmf in log space (float64)."""
    k = np.arange(n + 1)
    lg = np.array([math.lgamma(i + 1) for i in range(n + 1)])
    log_pmf = lg[n] - lg - lg[::-1] + k * math.log(p) + (n - k) * math.log1p(-p)
    return np.logaddexp.accumulate(log_pmf)


def binomial_cdf_exact(k: int, n: int, p) -> mp.mpf:
    p = mp.mpf(p)
    return mp.fsum(mp.binomial(n, i) * p**i * (1 - p) ** (n - i) for i in range(k + 1))


def binomial_inverse_bruteforce(eps: float, n: int, p: float, table: np.ndarray | None = None) -> int:
    """Smallest k with CDF(k) >= eps.

    The float64 table locates the answer; when it lands within rounding of a
    CDF value the decision is redone in 50-digit arithmetic.
    """
    if table is None:
        table = binomial_log_cdf_table(n, p)
    log_eps = math.log(eps)
    k = int(np.searchsorted(table, log_eps, side="left"))
    k = min(k, n)
    eps_mp = mp.mpf(eps)
    for cand in (k - 1, k):
        if 0 <= cand <= n and abs(table[cand] - log_eps) < 1e-9:
            # ambiguous in double precision; settle exactly
            lo = max(0, k - 2)
            for j in range(lo, n + 1):
                if binomial_cdf_exact(j, n, p) >= eps_mp:
                    return j
    return k


def circular_aperture(w: float, r_a: float, chi: float = 1.0) -> float:
    return chi * (1.0 - math.exp(-2.0 * r_a**2 / w**2))


def elliptical_transmittance_mp(x0, y0, w1, w2, alpha, r_a, chi=1.0) -> float:
    """Transmittance of an elliptical Gaussian beam by adaptive mpmath quadrature in Cartesian form.

    ``alpha`` is the absolute orientation of the ``W1`` axis.
    """
    mp.mp.dps = 20
    try:
        ca, sa = mp.cos(alpha), mp.sin(alpha)

        def f(r, t):
            x = r * mp.cos(t) - x0
            y = r * mp.sin(t) - y0
            u = x * ca + y * sa
            v = -x * sa + y * ca
            return r * mp.exp(-2 * (u**2 / w1**2 + v**2 / w2**2))

        val = mp.quad(f, [0, r_a], mp.linspace(0, 2 * mp.pi, 9))
        return float(2 * chi / (mp.pi * w1 * w2) * val)
    finally:
        mp.mp.dps = 50


def corrected(y, mu, p, eps) -> tuple[float, float]:
    """(upper, lower) rescaled count ``exp(mu)/p * (y +/- delta)``, lower clamped at 0."""
    dp, dm = chernoff(y, eps)
    g = mp.e ** mp.mpf(mu) / mp.mpf(p)
    return float(g * (mp.mpf(y) + dp)), float(max(0, g * (mp.mpf(y) - dm)))


def vacuum(n_minus_3, n_plus_2, mus, probs) -> float:
    _, m2, m3 = (mp.mpf(m) for m in mus)
    t0 = tau(0, mus, probs)
    return float(max(0, t0 * (m2 * n_minus_3 - m3 * n_plus_2) / (m2 - m3)))


def single_photon(n_plus_1, n_minus_2, n_plus_3, y0, mus, probs) -> float:
    m1, m2, m3 = (mp.mpf(m) for m in mus)
    t0, t1 = tau(0, mus, probs), tau(1, mus, probs)
    inner = n_minus_2 - n_plus_3 - (m2**2 - m3**2) / m1**2 * (n_plus_1 - y0 / t0)
    return float(max(0, t1 * m1 * inner / (m1 * (m2 - m3) - (m2**2 - m3**2))))


def bit_errors(m_plus_2, m_minus_3, mus, probs) -> float:
    _, m2, m3 = (mp.mpf(m) for m in mus)
    return float(max(0, tau(1, mus, probs) * (m_plus_2 - m_minus_3) / (m2 - m3)))


def leakage(n: int, q: float, eps_corr: float) -> float:
    """Error-correction leakage with the quantile from an exhaustive log-CDF table."""
    table = binomial_log_cdf_table(n, 1 - q)
    k = binomial_inverse_bruteforce(eps_corr, n, 1 - q, table)
    q = mp.mpf(q)
    odds = mp.log((1 - q) / q, 2)
    h = -q * mp.log(q, 2) - (1 - q) * mp.log(1 - q, 2)
    val = n * h + n * (1 - q) * odds - (k - 1) * odds - mp.log(n, 2) / 2 - mp.log(1 / mp.mpf(eps_corr), 2)
    return float(max(0, val))
