"""Numerical primitives shared by the finite and asymptotic key-rate engines.

Everything here is a pure function of its arguments. Logarithms of
information quantities are base 2; the Chernoff confidence parameter uses the
natural logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

# Number of statistical estimates that share the secrecy budget.
SECURITY_SPLIT = 21

# Near-ties between CDF(k) and eps are settled exactly for blocks up to this size.
_EXACT_TIE_MAX_N = 4096

# Below this the incomplete-beta value is no longer trusted to full relative
# precision and the tail is summed term by term in log space instead.
_TINY = 1e-290


@dataclass(frozen=True)
class SecurityParams:
    """Composable security parameters of one protocol run.

    Attributes
    ----------
    eps_sec : float
        Secrecy failure probability.
    eps_corr : float
        Correctness failure probability.
    """

    eps_sec: float = 1e-9
    eps_corr: float = 1e-15

    def __post_init__(self) -> None:
        for name in ("eps_sec", "eps_corr"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name}={value} must lie in (0, 1)")

    @property
    def eps_est(self) -> float:
        """Failure probability allotted to each individual statistical bound."""
        return self.eps_sec / SECURITY_SPLIT


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with ``0 log 0 = 0``.

    Raises
    ------
    ValueError
        If ``x`` lies outside ``[0, 1]``.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log1p(-x) / math.log(2.0)


def _log_pmf(k: np.ndarray, n: int, p: float) -> np.ndarray:
    return (
        special.gammaln(n + 1)
        - special.gammaln(k + 1)
        - special.gammaln(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def _log_tail(k: int, n: int, p: float, lower: bool) -> float:
    """Log of P[X <= k] (lower) or P[X > k] (upper) by windowed log-space summation.

    Only used deep in a tail, where consecutive terms shrink geometrically,
    so a modest window away from ``k`` captures the sum to double precision.
    """
    width = 64
    while True:
        if lower:
            idx = np.arange(max(0, k - width), k + 1, dtype=float)
        else:
            idx = np.arange(k + 1, min(n, k + 1 + width) + 1, dtype=float)
        terms = _log_pmf(idx, n, p)
        edge = terms[0] if lower else terms[-1]
        covered = (idx[0] == 0) if lower else (idx[-1] == n)
        if covered or edge < terms.max() - 745.0:
            return float(special.logsumexp(terms))
        width *= 4


def binomial_log_cdf(k: int, n: int, p: float) -> float:
    """Natural log of the Binomial(n, p) CDF evaluated at integer ``k``."""
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    lower = float(special.bdtr(k, n, p))
    if lower > 0.5:
        return math.log1p(-float(special.bdtrc(k, n, p)))
    if lower > _TINY:
        return math.log(lower)
    return _log_tail(k, n, p, lower=True)


def _exact_cdf(k: int, n: int, p: float) -> Fraction:
    q = Fraction(p)
    return sum((Fraction(math.comb(n, i)) * q**i * (1 - q) ** (n - i) for i in range(k + 1)), Fraction(0))


def _cdf_reaches(k: int, n: int, p: float, eps: float, log_eps: float) -> bool:
    """``CDF(k) >= eps``, exact when the two are indistinguishable in double precision."""
    if k < 0:
        return False
    if k >= n:
        return True
    log_cdf = binomial_log_cdf(k, n, p)
    if abs(log_cdf - log_eps) > 1e-9 * max(1.0, abs(log_eps)) or n > _EXACT_TIE_MAX_N:
        return log_cdf >= log_eps
    return _exact_cdf(k, n, p) >= Fraction(eps)


def binomial_cdf_inverse(eps: float, n: int, p: float) -> int:
    """Generalized inverse of the Binomial(n, p) CDF.

    Returns the smallest integer ``k`` in ``[0, n]`` with ``CDF(k) >= eps``.
    The comparison is made on log probabilities, so block sizes of order
    ``1e8`` with failure probabilities far below machine epsilon are fine.
    When ``CDF(k)`` and ``eps`` agree to double precision on a moderate block
    the comparison is redone in exact rational arithmetic.

    Parameters
    ----------
    eps : float
        Target probability in (0, 1).
    n : int
        Number of trials, ``n >= 1``.
    p : float
        Success probability in (0, 1).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps={eps} must lie in (0, 1)")
    if int(n) != n or n < 1:
        raise ValueError(f"n={n} must be a positive integer")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p={p} must lie in (0, 1)")
    n = int(n)
    log_eps = math.log(eps)

    guess = float(special.bdtrik(eps, n, p))
    if math.isfinite(guess):
        k = min(max(int(math.floor(guess)), 0), n)
    else:
        k = int(round(n * p))

    step = 1
    if _cdf_reaches(k, n, p, eps, log_eps):
        # walk down to bracket, then bisect
        hi = k
        lo = k - step
        while lo >= 0 and _cdf_reaches(lo, n, p, eps, log_eps):
            hi = lo
            step *= 2
            lo = hi - step
        lo = max(lo, -1)
    else:
        lo = k
        hi = k + step
        while hi < n and not _cdf_reaches(hi, n, p, eps, log_eps):
            lo = hi
            step *= 2
            hi = lo + step
        hi = min(hi, n)
    # invariant: CDF(lo) < eps (or lo == -1), CDF(hi) >= eps
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _cdf_reaches(mid, n, p, eps, log_eps):
            hi = mid
        else:
            lo = mid
    return hi


def chernoff_deltas(y: float, eps: float) -> tuple[float, float]:
    """Inverse multiplicative Chernoff corrections for an observed count.

    With ``beta = ln(1/eps)``::

        delta_plus  = beta + sqrt(2 beta y + beta^2)
        delta_minus = beta / 2 + sqrt(2 beta y + beta^2 / 4)

    Returns
    -------
    tuple of float
        ``(delta_plus, delta_minus)``.
    """
    if y < 0:
        raise ValueError(f"observed count y={y} must be non-negative")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps={eps} must lie in (0, 1]")
    beta = -math.log(eps)
    delta_plus = beta + math.sqrt(2.0 * beta * y + beta * beta)
    delta_minus = 0.5 * beta + math.sqrt(2.0 * beta * y + 0.25 * beta * beta)
    return delta_plus, delta_minus


def gamma_term(a: float, b: float, c: float, d: float) -> float:
    """Statistical penalty added to the sampled phase-error ratio.

    ``gamma(a, b, c, d) = sqrt((c + d)(1 - b) b / (c d ln 2))
    * log2((c + d) / (c d (1 - b) b) * 21^2 / a^2)``

    ``a`` is the secrecy parameter, ``b`` the observed error ratio and ``c``,
    ``d`` the two sample sizes. The value at ``b`` in {0, 1} is the limit 0.
    """
    if c <= 0 or d <= 0:
        raise ValueError(f"sample sizes must be positive, got c={c}, d={d}")
    if not 0.0 < a < 1.0:
        raise ValueError(f"a={a} must lie in (0, 1)")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b={b} must lie in [0, 1]")
    if b == 0.0 or b == 1.0:
        return 0.0
    spread = (c + d) * (1.0 - b) * b / (c * d * math.log(2.0))
    # (c + d) / (c d) written as 1/c + 1/d to stay finite for huge samples
    arg_log2 = (
        math.log2(1.0 / c + 1.0 / d)
        - math.log2((1.0 - b) * b)
        + 2.0 * math.log2(SECURITY_SPLIT)
        - 2.0 * math.log2(a)
    )
    return math.sqrt(spread) * arg_log2
