"""Channel transmittance to sifted detection and error counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EFFICIENT = "efficient"
STANDARD = "standard"
PROTOCOLS = (EFFICIENT, STANDARD)


@dataclass(frozen=True)
class SourceConfig:
    """Three-intensity weak coherent source and block length.

    ``mu`` and ``probs`` are ordered signal, decoy, weakest decoy. ``c_x`` is
    the probability of choosing the key basis X in the efficient protocol.
    """

    mu: tuple[float, float, float] = (0.7, 0.1, 0.0)
    probs: tuple[float, float, float] = (0.7, 0.2, 0.1)
    c_x: float = 0.7
    source_rate: float = 1e8
    block_time: float = 440.0

    def __post_init__(self) -> None:
        mu1, mu2, mu3 = self.mu
        if not (mu2 > mu3 >= 0.0 and mu1 > mu2 + mu3):
            raise ValueError(f"intensities {self.mu} violate mu1 > mu2 + mu3 and mu2 > mu3 >= 0")
        if any(p <= 0 for p in self.probs) or not math.isclose(sum(self.probs), 1.0, abs_tol=1e-12):
            raise ValueError(f"intensity probabilities {self.probs} must be positive and sum to 1")
        if not 0.0 < self.c_x < 1.0:
            raise ValueError(f"c_x={self.c_x} must lie in (0, 1)")
        if self.source_rate <= 0 or self.block_time <= 0:
            raise ValueError("source rate and block time must be positive")

    @property
    def n_pulses(self) -> int:
        return int(round(self.source_rate * self.block_time))

    @property
    def gamma_factors(self) -> np.ndarray:
        """``exp(mu_j) / p_j`` for each intensity."""
        return np.exp(np.asarray(self.mu)) / np.asarray(self.probs)


@dataclass(frozen=True)
class DetectorConfig:
    p_ec: float = 5e-7
    p_ap: float = 1e-3
    qber_intrinsic: float = 5e-3
    eta_det: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_ec", "p_ap", "qber_intrinsic", "eta_det"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"detector.{name}={value} must lie in [0, 1]")


@dataclass(frozen=True)
class ObservedCounts:
    """Sifted events ``n`` and errors ``m`` per basis, indexed by intensity."""

    n_x: np.ndarray
    n_z: np.ndarray
    m_x: np.ndarray
    m_z: np.ndarray
    n_pulses: int
    protocol: str = EFFICIENT

    def __post_init__(self) -> None:
        for name in ("n_x", "n_z", "m_x", "m_z"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (3,) or np.any(arr < 0):
                raise ValueError(f"{name} must hold three non-negative counts, got {arr}")
            object.__setattr__(self, name, arr)
        if np.any(self.m_x > self.n_x) or np.any(self.m_z > self.n_z):
            raise ValueError("error counts cannot exceed event counts")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")

    def events(self, basis: str) -> np.ndarray:
        return self.n_x if basis == "X" else self.n_z

    def errors(self, basis: str) -> np.ndarray:
        return self.m_x if basis == "X" else self.m_z

    def scaled(self, factor: int) -> "ObservedCounts":
        """Counts of ``factor`` identical blocks aggregated together."""
        return ObservedCounts(
            self.n_x * factor, self.n_z * factor, self.m_x * factor, self.m_z * factor,
            self.n_pulses * factor, self.protocol,
        )


def _click_probability(eta: float, mu: float, det: DetectorConfig) -> float:
    # -expm1 keeps precision when eta * mu is tiny
    return -math.expm1(-det.eta_det * eta * mu)


def expected_gain(eta: float, mu: float, det: DetectorConfig) -> float:
    """Detection probability per pulse, ``[1 - (1 - p_ec) exp(-eta_det eta mu)] (1 + p_ap)``."""
    signal = _click_probability(eta, mu, det)
    return (signal + det.p_ec * (1.0 - signal)) * (1.0 + det.p_ap)


def expected_error_fraction(eta: float, mu: float, det: DetectorConfig) -> float:
    """Fraction of detections that are bit errors."""
    gain = expected_gain(eta, mu, det)
    if gain == 0.0:
        return 0.0
    wrong = (1.0 + det.p_ap) * (0.5 * det.p_ec + det.qber_intrinsic * _click_probability(eta, mu, det))
    return wrong / gain


def sift_factors(protocol: str, c_x: float) -> tuple[float, float]:
    """Probability that both parties pick X (resp. Z) for one pulse."""
    if protocol == EFFICIENT:
        return c_x * c_x, (1.0 - c_x) ** 2
    if protocol == STANDARD:
        return 0.25, 0.25
    raise ValueError(f"unknown protocol {protocol!r}")


def expected_counts(eta: float, src: SourceConfig, det: DetectorConfig, protocol: str) -> dict[str, np.ndarray]:
    """Real-valued expected counts before rounding."""
    sx, sz = sift_factors(protocol, src.c_x)
    n_p = src.n_pulses
    gain = np.array([expected_gain(eta, mu, det) for mu in src.mu])
    err = np.array([expected_error_fraction(eta, mu, det) for mu in src.mu]) * gain
    weight = n_p * np.asarray(src.probs)
    return {
        "n_x": weight * sx * gain,
        "n_z": weight * sz * gain,
        "m_x": weight * sx * err,
        "m_z": weight * sz * err,
    }


def simulate_counts(
    eta: float,
    src: SourceConfig,
    det: DetectorConfig,
    protocol: str = EFFICIENT,
    mode: str = "expected",
    seed: int | np.random.SeedSequence | None = None,
) -> ObservedCounts:
    """Sifted counts for one block of ``src.n_pulses`` pulses.

    ``mode="expected"`` rounds the expectations to integers. ``mode="sampled"``
    draws the six (intensity, basis) event counts jointly from a multinomial
    over the block and then a binomial number of errors among each.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance {eta} must lie in [0, 1]")
    mean = expected_counts(eta, src, det, protocol)
    if mode == "expected":
        rounded = {k: np.rint(v).astype(np.int64) for k, v in mean.items()}
        # rounding may not push errors above events
        rounded["m_x"] = np.minimum(rounded["m_x"], rounded["n_x"])
        rounded["m_z"] = np.minimum(rounded["m_z"], rounded["n_z"])
        return ObservedCounts(n_pulses=src.n_pulses, protocol=protocol, **rounded)
    if mode != "sampled":
        raise ValueError(f"unknown counts mode {mode!r}")

    sx, sz = sift_factors(protocol, src.c_x)
    rng = np.random.default_rng(seed)
    gain = np.array([expected_gain(eta, mu, det) for mu in src.mu])
    err = np.array([expected_error_fraction(eta, mu, det) for mu in src.mu])
    # each pulse lands in exactly one (intensity, basis) sifted-click cell or none
    cells = np.concatenate([np.asarray(src.probs) * sx * gain, np.asarray(src.probs) * sz * gain])
    cells = np.minimum(cells, 1.0)
    rest = max(0.0, 1.0 - cells.sum())
    drawn = rng.multinomial(src.n_pulses, np.append(cells, rest))[:6]
    n_x, n_z = drawn[:3], drawn[3:]
    m_x = rng.binomial(n_x, err)
    m_z = rng.binomial(n_z, err)
    return ObservedCounts(n_x, n_z, m_x, m_z, src.n_pulses, protocol)
