"""Zenith sweeps, key-rate distributions and source-parameter search.

Every beam realization ``i`` draws its standard normals and uniform from its
own substream of the master seed. The same standardized draws are reused at
every zenith angle and weather scenario, so adjacent points of a curve differ
only through the physics and not through Monte Carlo noise.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .asymptotic import key_rate_inf
from .channel import (
    Pdt,
    beam_params_from_draws,
    build_pdt,
    estimate_beam_statistics,
    extinction_factor,
    slant_geometry,
    standard_draws,
    transmittance_samples,
)
from .config import RunConfig
from .counts import SourceConfig, simulate_counts
from .finite_key import key_rate

SWEEP_HEADER = ("zenith_deg", "protocol", "mode", "avg_key_rate", "mean_transmittance", "samples", "seed")
PDR_HEADER = ("zenith_deg", "rate", "probability")
PDR_DECIMALS = 5

# spawn-key prefix of the count-sampling streams, disjoint from the beam draws
_COUNTS_STREAM = 1


@dataclass(frozen=True)
class SweepRow:
    zenith_deg: float
    protocol: str
    mode: str
    avg_key_rate: float
    mean_transmittance: float
    samples: int
    seed: int
    scenario: str = ""


@dataclass(frozen=True)
class PdrRow:
    zenith_deg: float
    rate: float
    probability: float
    scenario: str = ""


@lru_cache(maxsize=4)
def _draws(seed: int, n: int) -> np.ndarray:
    draws = standard_draws(seed, n)
    draws.setflags(write=False)
    return draws


def channel_samples(cfg: RunConfig, scenario: str, zenith_deg: float, samples: int | None = None) -> np.ndarray:
    """Transmittances of ``samples`` beam realizations at one zenith angle."""
    n = cfg.samples if samples is None else samples
    geometry = slant_geometry(
        math.radians(zenith_deg),
        cfg.link.altitude,
        cfg.link.atmosphere_thickness,
        math.radians(cfg.link.zenith_max_deg),
    )
    weather = cfg.weather(scenario)
    stats = estimate_beam_statistics(geometry, cfg.optics, weather, cfg.provider, cfg.explicit, cfg.c_theta)
    beams = beam_params_from_draws(stats, _draws(cfg.seed, n), cfg.optics.beam_waist)
    chi = extinction_factor(geometry, weather)
    return transmittance_samples(beams, cfg.optics.aperture_radius, chi, cfg.quadrature)


def rate_at(
    eta: float,
    cfg: RunConfig,
    protocol: str | None = None,
    mode: str | None = None,
    source: SourceConfig | None = None,
    counts_seed: Sequence[int] | None = None,
) -> float:
    """Secret key rate per pulse of one block sent through a link of transmittance ``eta``."""
    protocol = protocol or cfg.protocol
    mode = mode or cfg.mode
    src = source or cfg.source
    seed = None
    if cfg.counts == "sampled":
        seed = np.random.SeedSequence(cfg.seed, spawn_key=(_COUNTS_STREAM, *(counts_seed or ())))
    counts = simulate_counts(eta, src, cfg.detector, protocol, cfg.counts, seed)
    if mode == "finite":
        return key_rate(counts, src, cfg.security).rate
    return key_rate_inf(counts, src).rate


def average_key_rate(pdt: Pdt, rate_fn: Callable[[float], float]) -> float:
    """``sum_i R(eta_i) P(eta_i)`` over bin centers; empty bins are skipped."""
    total = 0.0
    for center, prob in zip(*pdt.occupied()):
        total += rate_fn(float(center)) * float(prob)
    return total


def _sweep_task(args: tuple) -> list[SweepRow]:
    cfg, scenario, zi, zenith, combos = args
    eta = channel_samples(cfg, scenario, zenith)
    pdt = build_pdt(eta, cfg.bins)
    mean_eta = float(eta.mean())
    rows = []
    for protocol, mode in combos:
        def rate_fn(x: float, protocol=protocol, mode=mode) -> float:
            b = min(int(x * pdt.bin_count), pdt.bin_count - 1)
            return rate_at(x, cfg, protocol, mode, counts_seed=(zi, b))

        avg = average_key_rate(pdt, rate_fn)
        rows.append(SweepRow(float(zenith), protocol, mode, avg, mean_eta, cfg.samples, cfg.seed, scenario))
    return rows


def _run(tasks: list, fn: Callable, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        # map yields in submission order, whatever the completion order
        return list(pool.map(fn, tasks))


def sweep_rows(
    cfg: RunConfig,
    scenarios: Iterable[str] | None = None,
    protocols: Iterable[str] | None = None,
    modes: Iterable[str] | None = None,
) -> list[SweepRow]:
    """Average key rate over the PDT for every scenario, zenith, protocol and mode.

    Rows come back ordered by scenario, zenith, protocol, mode.
    """
    scenarios = list(scenarios or [cfg.scenario])
    combos = list(itertools.product(protocols or [cfg.protocol], modes or [cfg.mode]))
    for name in scenarios:
        cfg.weather(name)
    tasks = [
        (cfg, name, zi, float(z), combos)
        for name in scenarios
        for zi, z in enumerate(cfg.zenith_grid())
    ]
    return [row for rows in _run(tasks, _sweep_task, cfg.workers) for row in rows]


def zenith_sweep(cfg: RunConfig) -> list[SweepRow]:
    """Sweep of the configured scenario, protocol and mode."""
    return sweep_rows(cfg)


def _pdr_task(args: tuple) -> list[PdrRow]:
    cfg, scenario, zi, zenith, samples = args
    eta = channel_samples(cfg, scenario, zenith, samples)
    rates = np.array([rate_at(float(x), cfg, counts_seed=(zi, i)) for i, x in enumerate(eta)])
    values, counts = np.unique(np.round(rates, PDR_DECIMALS), return_counts=True)
    probs = counts / counts.sum()
    return [PdrRow(float(zenith), float(v), float(p), scenario) for v, p in zip(values, probs)]


def pdr_histogram(
    cfg: RunConfig, zeniths: Sequence[float], scenario: str | None = None, samples: int | None = None
) -> list[PdrRow]:
    """Distribution of per-realization key rates at each zenith angle.

    Each beam realization is treated as a full block at its own transmittance;
    rates are rounded to ``PDR_DECIMALS`` decimals before histogramming.
    """
    scenario = scenario or cfg.scenario
    cfg.weather(scenario)
    n = cfg.samples if samples is None else samples
    for z in zeniths:
        if not 0.0 <= z <= cfg.link.zenith_max_deg:
            raise ValueError(f"zenith {z} deg outside [0, {cfg.link.zenith_max_deg}]")
    tasks = [(cfg, scenario, zi, float(z), n) for zi, z in enumerate(zeniths)]
    return [row for rows in _run(tasks, _pdr_task, cfg.workers) for row in rows]


def _tie_key(src: SourceConfig) -> tuple:
    return (src.mu[0], src.mu[1], abs(src.c_x - 0.5), src.c_x)


def grid_search_source(
    cfg: RunConfig,
    mu1_grid: Sequence[float],
    mu2_grid: Sequence[float],
    cx_grid: Sequence[float],
    zenith_deg: float = 0.0,
    objective: Callable[[RunConfig, SourceConfig], float] | None = None,
) -> tuple[SourceConfig, float]:
    """Exhaustive search for the source settings maximizing the average key rate.

    ``mu3`` and the intensity probabilities are kept from ``cfg.source``.
    Infeasible combinations are skipped. Ties go to smaller ``mu1``, then
    smaller ``mu2``, then ``c_X`` closer to one half, then smaller ``c_X``.

    Raises
    ------
    ValueError
        If no grid point satisfies the intensity constraints.
    """
    base = cfg.source
    candidates = []
    for mu1, mu2, cx in itertools.product(mu1_grid, mu2_grid, cx_grid):
        try:
            candidates.append(replace(base, mu=(float(mu1), float(mu2), base.mu[2]), c_x=float(cx)))
        except ValueError:
            continue
    if not candidates:
        raise ValueError("no feasible (mu1, mu2, c_X) point in the search grid")

    if objective is None:
        pdt = build_pdt(channel_samples(cfg, cfg.scenario, zenith_deg), cfg.bins)

        def objective(c: RunConfig, src: SourceConfig) -> float:
            return average_key_rate(pdt, lambda x: rate_at(x, c, source=src))

    best, best_rate = None, -math.inf
    for src in sorted(candidates, key=_tie_key):
        value = objective(cfg, src)
        # strict improvement only, so the earlier (preferred) point wins ties
        if value > best_rate:
            best, best_rate = src, value
    return best, best_rate


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_sweep_csv(rows: Iterable[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow(
                [_fmt(r.zenith_deg), r.protocol, r.mode, _fmt(r.avg_key_rate), _fmt(r.mean_transmittance), r.samples, r.seed]
            )


def write_pdr_csv(rows: Iterable[PdrRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PDR_HEADER)
        for r in rows:
            writer.writerow([_fmt(r.zenith_deg), _fmt(r.rate), _fmt(r.probability)])
