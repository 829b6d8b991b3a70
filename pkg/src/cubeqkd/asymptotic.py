"""Infinite-pass limit of the decoy-state key rates.

Per-pass estimates are the finite bounds with every Chernoff correction set
to zero; the phase error carries no statistical penalty and error correction
leaks exactly ``n_X h(Q)`` bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core_math import binary_entropy, chernoff_deltas
from .counts import EFFICIENT, STANDARD, ObservedCounts, SourceConfig
from .finite_key import (
    BASES,
    DecoyEstimates,
    InsufficientStatistics,
    KeyRateResult,
    asymptotic_corrected_counts,
    basis_estimates,
    poisson_tau,
)


@dataclass(frozen=True)
class AsymptoticEstimates:
    y0_inf: float
    y1_inf: float
    v1_inf: float
    phase_error_inf: float
    lambda_ec_inf: float


def _leakage_inf(counts: ObservedCounts, basis: str) -> float:
    n = float(counts.events(basis).sum())
    if n == 0:
        return 0.0
    q = min(0.5, float(counts.errors(basis).sum()) / n)
    return n * binary_entropy(q)


def asymptotic_yields(counts: ObservedCounts, src: SourceConfig, key: str = "X") -> AsymptoticEstimates:
    """Per-pass asymptotic bounds for key basis ``key``.

    Raises
    ------
    InsufficientStatistics
        If a single-photon bound vanishes.
    """
    est = basis_estimates(asymptotic_corrected_counts(counts, src), key, src, eps_sec=None)
    return AsymptoticEstimates(est.y0, est.y1, est.v1, est.phase_error, _leakage_inf(counts, key))


def vacuum_bound_per_pass(
    single_pass: ObservedCounts, src: SourceConfig, eps_est: float, passes: int, basis: str = "X"
) -> float:
    """Vacuum-event bound of ``passes`` aggregated identical passes, divided by ``passes``.

    Tends to the asymptotic vacuum estimate as ``passes`` grows, with a gap of
    order ``1 / sqrt(passes)``.
    """
    if passes < 1:
        raise ValueError("need at least one pass")
    _, mu2, mu3 = src.mu
    g = src.gamma_factors
    n = single_pass.events(basis).astype(float) * passes
    d_plus_2, _ = chernoff_deltas(n[1], eps_est)
    _, d_minus_3 = chernoff_deltas(n[2], eps_est)
    tau0 = poisson_tau(0, src)
    total = tau0 / (mu2 - mu3) * (mu2 * g[2] * (n[2] - d_minus_3) - mu3 * g[1] * (n[1] + d_plus_2))
    return total / passes


def _as_estimates(a: AsymptoticEstimates) -> DecoyEstimates:
    return DecoyEstimates(a.y0_inf, a.y1_inf, a.v1_inf, a.phase_error_inf)


def _result(bracket: float, counts: ObservedCounts, leak: float, estimates: dict) -> KeyRateResult:
    length = max(0, math.floor(bracket))
    return KeyRateResult(length, length / counts.n_pulses, leak, estimates, False, bracket)


def key_rate_efficient_inf(counts: ObservedCounts, src: SourceConfig) -> KeyRateResult:
    try:
        a = asymptotic_yields(counts, src, "X")
    except InsufficientStatistics:
        return KeyRateResult(0, 0.0, 0.0, {}, True, 0.0)
    bracket = a.y0_inf + a.y1_inf * (1.0 - binary_entropy(a.phase_error_inf)) - a.lambda_ec_inf
    return _result(bracket, counts, a.lambda_ec_inf, {"X": _as_estimates(a)})


def key_rate_standard_inf(counts: ObservedCounts, src: SourceConfig) -> KeyRateResult:
    try:
        per_basis = {b: asymptotic_yields(counts, src, b) for b in BASES}
    except InsufficientStatistics:
        return KeyRateResult(0, 0.0, 0.0, {}, True, 0.0)
    terms = sum(
        a.y0_inf + a.y1_inf * (1.0 - binary_entropy(a.phase_error_inf)) - a.lambda_ec_inf
        for a in per_basis.values()
    )
    leak = sum(a.lambda_ec_inf for a in per_basis.values())
    return _result(0.5 * terms, counts, leak, {b: _as_estimates(a) for b, a in per_basis.items()})


def key_rate_inf(counts: ObservedCounts, src: SourceConfig) -> KeyRateResult:
    if counts.protocol == EFFICIENT:
        return key_rate_efficient_inf(counts, src)
    if counts.protocol == STANDARD:
        return key_rate_standard_inf(counts, src)
    raise ValueError(f"unknown protocol {counts.protocol!r}")
