"""Finite-block decoy-state key length for efficient and standard BB84.

Counts are corrected with inverse multiplicative Chernoff bounds, turned into
bounds on vacuum and single-photon events and single-photon bit errors, and
combined with the error-correction leakage into a secret key length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_math import (
    SECURITY_SPLIT,
    SecurityParams,
    binary_entropy,
    binomial_cdf_inverse,
    chernoff_deltas,
    gamma_term,
)
from .counts import EFFICIENT, STANDARD, ObservedCounts, SourceConfig

Q_MIN = 1e-6
BASES = ("X", "Z")


class InsufficientStatistics(ArithmeticError):
    """A decoy bound needed for the key is zero, so no key can be certified."""


@dataclass(frozen=True)
class CorrectedCounts:
    """Per-intensity event/error counts rescaled by ``exp(mu_j)/p_j``.

    ``*_plus`` and ``*_minus`` are upper and lower confidence values.
    """

    n_plus: np.ndarray
    n_minus: np.ndarray
    m_plus: np.ndarray
    m_minus: np.ndarray


@dataclass(frozen=True)
class DecoyEstimates:
    """Bounds for one key basis: vacuum and single-photon events, the
    single-photon bit errors measured in the complementary basis, and the
    resulting phase-error rate."""

    y0: float = 0.0
    y1: float = 0.0
    v1: float = 0.0
    phase_error: float = 0.5


@dataclass(frozen=True)
class KeyRateResult:
    key_length: int
    rate: float
    leakage: float
    estimates: dict[str, DecoyEstimates] = field(default_factory=dict)
    aborted: bool = False
    bracket: float = 0.0


def finite_corrected_counts(counts: ObservedCounts, src: SourceConfig, eps_est: float) -> dict[str, CorrectedCounts]:
    """Chernoff-corrected, intensity-rescaled counts for both bases.

    Lower values are clamped at zero.
    """
    gamma = src.gamma_factors
    out = {}
    for basis in BASES:
        bounds = []
        for observed in (counts.events(basis), counts.errors(basis)):
            plus = np.empty(3)
            minus = np.empty(3)
            for j, y in enumerate(observed):
                d_plus, d_minus = chernoff_deltas(float(y), eps_est)
                plus[j] = gamma[j] * (y + d_plus)
                minus[j] = max(0.0, gamma[j] * (y - d_minus))
            bounds.append((plus, minus))
        (n_plus, n_minus), (m_plus, m_minus) = bounds
        out[basis] = CorrectedCounts(n_plus, n_minus, m_plus, m_minus)
    return out


def asymptotic_corrected_counts(counts: ObservedCounts, src: SourceConfig) -> dict[str, CorrectedCounts]:
    """Rescaled counts with all statistical corrections removed."""
    gamma = src.gamma_factors
    out = {}
    for basis in BASES:
        n = gamma * counts.events(basis)
        m = gamma * counts.errors(basis)
        out[basis] = CorrectedCounts(n, n, m, m)
    return out


def poisson_tau(n: int, src: SourceConfig) -> float:
    """Probability that the source emits exactly ``n`` photons."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    return sum(math.exp(-mu) * mu**n * p for mu, p in zip(src.mu, src.probs)) / math.factorial(n)


def _check_decoys(src: SourceConfig) -> None:
    mu1, mu2, mu3 = src.mu
    if mu2 == mu3:
        raise ValueError("decoy intensities mu2 and mu3 must differ")
    if not mu1 > mu2 + mu3:
        raise ValueError("intensities must satisfy mu1 > mu2 + mu3")


def vacuum_bound(n_minus_mu3: float, n_plus_mu2: float, src: SourceConfig) -> float:
    """Lower bound on vacuum events in a basis, clamped at zero."""
    _check_decoys(src)
    _, mu2, mu3 = src.mu
    tau0 = poisson_tau(0, src)
    return max(0.0, tau0 * (mu2 * n_minus_mu3 - mu3 * n_plus_mu2) / (mu2 - mu3))


def single_photon_bound(corrected: CorrectedCounts, y0: float, src: SourceConfig) -> float:
    """Lower bound on single-photon events in a basis, clamped at zero."""
    _check_decoys(src)
    mu1, mu2, mu3 = src.mu
    tau0 = poisson_tau(0, src)
    tau1 = poisson_tau(1, src)
    curvature = (mu2**2 - mu3**2) / mu1**2
    inner = (
        corrected.n_minus[1]
        - corrected.n_plus[2]
        - curvature * (corrected.n_plus[0] - y0 / tau0)
    )
    denom = mu1 * (mu2 - mu3) - (mu2**2 - mu3**2)
    return max(0.0, tau1 * mu1 * inner / denom)


def bit_error_bound(
    m_plus_mu2: float, m_minus_mu3: float, src: SourceConfig, upper: float | None = None
) -> float:
    """Upper bound on single-photon bit errors, clamped to ``[0, upper]``."""
    _check_decoys(src)
    _, mu2, mu3 = src.mu
    v = max(0.0, poisson_tau(1, src) * (m_plus_mu2 - m_minus_mu3) / (mu2 - mu3))
    if upper is not None:
        v = min(v, upper)
    return v


def phase_error_rate(v1: float, y1_test: float, y1_key: float, eps_sec: float) -> float:
    """Single-photon phase-error rate of the key basis, clamped to ``[0, 1/2]``.

    ``v1`` and ``y1_test`` come from the complementary (test) basis,
    ``y1_key`` from the key basis.
    """
    if y1_test <= 0 or y1_key <= 0:
        raise InsufficientStatistics("no single-photon events certified")
    ratio = min(1.0, max(0.0, v1 / y1_test))
    phi = ratio + gamma_term(eps_sec, ratio, y1_test, y1_key)
    return min(0.5, max(0.0, phi))


def leakage_lambda_ec(n_x: int, q: float, eps_corr: float) -> float:
    """Bits revealed by error correction on a block of ``n_x`` bits at QBER ``q``.

    ``q`` is clamped into ``[Q_MIN, 1/2]``; an empty block leaks nothing.
    """
    n_x = int(n_x)
    if n_x < 1:
        return 0.0
    q = min(0.5, max(Q_MIN, q))
    odds = math.log2((1.0 - q) / q)
    quantile = binomial_cdf_inverse(eps_corr, n_x, 1.0 - q)
    leak = (
        n_x * binary_entropy(q)
        + n_x * (1.0 - q) * odds
        - (quantile - 1) * odds
        - 0.5 * math.log2(n_x)
        - math.log2(1.0 / eps_corr)
    )
    return max(0.0, leak)


def _qber(counts: ObservedCounts, basis: str) -> tuple[int, float]:
    n = int(counts.events(basis).sum())
    m = int(counts.errors(basis).sum())
    return n, (m / n if n else 0.5)


def basis_estimates(
    corrected: dict[str, CorrectedCounts], key: str, src: SourceConfig, eps_sec: float | None
) -> DecoyEstimates:
    """Decoy bounds for key basis ``key``; the other basis tests phase errors.

    ``eps_sec=None`` drops the statistical penalty on the phase error.
    """
    test = "Z" if key == "X" else "X"
    y0 = vacuum_bound(corrected[key].n_minus[2], corrected[key].n_plus[1], src)
    y1 = single_photon_bound(corrected[key], y0, src)
    y0_test = vacuum_bound(corrected[test].n_minus[2], corrected[test].n_plus[1], src)
    y1_test = single_photon_bound(corrected[test], y0_test, src)
    v1 = bit_error_bound(corrected[test].m_plus[1], corrected[test].m_minus[2], src, upper=y1_test)
    if eps_sec is None:
        if y1_test <= 0 or y1 <= 0:
            raise InsufficientStatistics("no single-photon events certified")
        phi = min(0.5, v1 / y1_test)
    else:
        phi = phase_error_rate(v1, y1_test, y1, eps_sec)
    return DecoyEstimates(y0, y1, v1, phi)


def _basis_key_terms(est: DecoyEstimates) -> float:
    return est.y0 + est.y1 * (1.0 - binary_entropy(est.phase_error))


def _penalty(sec: SecurityParams) -> float:
    return 6.0 * math.log2(SECURITY_SPLIT / sec.eps_sec) + math.log2(2.0 / sec.eps_corr)


def _finish(bracket: float, n_pulses: int, leakage: float, estimates: dict) -> KeyRateResult:
    length = max(0, math.floor(bracket))
    return KeyRateResult(length, length / n_pulses, leakage, estimates, False, bracket)


def _aborted() -> KeyRateResult:
    return KeyRateResult(0, 0.0, 0.0, {}, True, 0.0)


def key_rate_efficient(counts: ObservedCounts, src: SourceConfig, sec: SecurityParams = SecurityParams()) -> KeyRateResult:
    """Finite key length when X carries the key and Z tests phase errors."""
    corrected = finite_corrected_counts(counts, src, sec.eps_est)
    try:
        est = basis_estimates(corrected, "X", src, sec.eps_sec)
    except InsufficientStatistics:
        return _aborted()
    n_x, q_x = _qber(counts, "X")
    leak = leakage_lambda_ec(n_x, q_x, sec.eps_corr)
    bracket = _basis_key_terms(est) - leak - _penalty(sec)
    return _finish(bracket, counts.n_pulses, leak, {"X": est})


def key_rate_standard(counts: ObservedCounts, src: SourceConfig, sec: SecurityParams = SecurityParams()) -> KeyRateResult:
    """Finite key length when both bases carry key and test each other."""
    corrected = finite_corrected_counts(counts, src, sec.eps_est)
    try:
        estimates = {b: basis_estimates(corrected, b, src, sec.eps_sec) for b in BASES}
    except InsufficientStatistics:
        return _aborted()
    leak = 0.0
    for basis in BASES:
        n, q = _qber(counts, basis)
        leak += leakage_lambda_ec(n, q, sec.eps_corr)
    terms = sum(_basis_key_terms(e) for e in estimates.values())
    bracket = 0.5 * (terms - leak - 2.0 * _penalty(sec))
    return _finish(bracket, counts.n_pulses, leak, estimates)


def key_rate(counts: ObservedCounts, src: SourceConfig, sec: SecurityParams = SecurityParams()) -> KeyRateResult:
    """Dispatch on ``counts.protocol``."""
    if counts.protocol == EFFICIENT:
        return key_rate_efficient(counts, src, sec)
    if counts.protocol == STANDARD:
        return key_rate_standard(counts, src, sec)
    raise ValueError(f"unknown protocol {counts.protocol!r}")
