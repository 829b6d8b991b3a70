import csv

import numpy as np
import pytest

from cubeqkd.channel import build_pdt
from cubeqkd.config import load_config
from cubeqkd.counts import EFFICIENT, STANDARD
from cubeqkd.pipeline import (
    PDR_HEADER,
    SWEEP_HEADER,
    SweepRow,
    average_key_rate,
    channel_samples,
    grid_search_source,
    pdr_histogram,
    rate_at,
    sweep_rows,
    write_pdr_csv,
    write_sweep_csv,
)


@pytest.fixture(scope="module")
def cfg():
    return load_config().with_overrides(samples=200, zenith_min=0.0, zenith_max=20.0, zenith_step=10.0)


class TestAverage:
    def test_single_bin(self):
        pdt = build_pdt([0.3, 0.3, 0.3], 10)
        assert average_key_rate(pdt, lambda x: 2.0 * x) == pytest.approx(0.7)

    def test_constant_rate(self):
        pdt = build_pdt(np.linspace(0, 1, 101), 7)
        assert average_key_rate(pdt, lambda x: 5.0) == pytest.approx(5.0, rel=1e-14)

    def test_only_occupied_bins_evaluated(self):
        seen = []
        pdt = build_pdt([0.01, 0.02, 0.9], 100)
        average_key_rate(pdt, lambda x: seen.append(x) or 0.0)
        assert len(seen) == 3

    def test_matches_direct_mean(self, cfg):
        # fine binning reproduces the per-sample mean of R(eta)
        eta = channel_samples(cfg, "Day-1", 30.0)
        direct = np.mean([rate_at(float(x), cfg) for x in eta])
        binned = average_key_rate(build_pdt(eta, cfg.bins), lambda x: rate_at(x, cfg))
        assert binned == pytest.approx(direct, rel=0.02)


class TestSweep:
    def test_single_sample_degenerate(self, cfg):
        c = cfg.with_overrides(samples=1, zenith_max=0.0)
        (row,) = sweep_rows(c)
        eta = channel_samples(c, "Day-1", 0.0)
        b = min(int(eta[0] * c.bins), c.bins - 1)
        assert row.avg_key_rate == pytest.approx(rate_at((b + 0.5) / c.bins, c), rel=1e-14)
        assert row.mean_transmittance == eta[0]

    def test_row_layout_and_order(self, cfg):
        rows = sweep_rows(cfg, ["Day-1", "Night-2"], [EFFICIENT, STANDARD], ["finite", "asymptotic"])
        assert len(rows) == 2 * 3 * 4
        keys = [(r.scenario, r.zenith_deg, r.protocol, r.mode) for r in rows]
        assert keys[:4] == [
            ("Day-1", 0.0, EFFICIENT, "finite"),
            ("Day-1", 0.0, EFFICIENT, "asymptotic"),
            ("Day-1", 0.0, STANDARD, "finite"),
            ("Day-1", 0.0, STANDARD, "asymptotic"),
        ]
        assert all(r.samples == 200 and r.seed == cfg.seed for r in rows)

    def test_deterministic_and_worker_invariant(self, cfg):
        a = sweep_rows(cfg, ["Day-1", "Day-3"], [EFFICIENT], ["finite"])
        b = sweep_rows(cfg, ["Day-1", "Day-3"], [EFFICIENT], ["finite"])
        c = sweep_rows(cfg.with_overrides(workers=3), ["Day-1", "Day-3"], [EFFICIENT], ["finite"])
        assert a == b == c

    def test_sampled_counts_reproducible(self, cfg):
        c = cfg.with_overrides(counts="sampled", samples=50, zenith_max=10.0)
        assert sweep_rows(c) == sweep_rows(c.with_overrides(workers=2))

    def test_seed_changes_result(self, cfg):
        a = sweep_rows(cfg.with_overrides(zenith_max=0.0))
        b = sweep_rows(cfg.with_overrides(zenith_max=0.0, seed=cfg.seed + 1))
        assert a[0].avg_key_rate != b[0].avg_key_rate

    def test_unknown_scenario(self, cfg):
        with pytest.raises(ValueError):
            sweep_rows(cfg, ["Fog-9"])

    def test_weather_ordering_at_zenith(self, cfg):
        order = ["Day-1", "Night-1", "Day-2", "Night-2", "Day-3", "Night-3"]
        c = cfg.with_overrides(zenith_max=0.0)
        rates = [r.avg_key_rate for r in sweep_rows(c, order)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_efficient_beats_standard_away_from_cutoff(self, cfg):
        c = cfg.with_overrides(zenith_max=40.0, zenith_step=20.0)
        rows = sweep_rows(c, ["Day-1"], [EFFICIENT, STANDARD], ["finite", "asymptotic"])
        by = {(r.zenith_deg, r.protocol, r.mode): r.avg_key_rate for r in rows}
        for z in (0.0, 20.0, 40.0):
            for mode in ("finite", "asymptotic"):
                assert by[(z, EFFICIENT, mode)] > by[(z, STANDARD, mode)] > 0


class TestPdr:
    def test_probabilities(self, cfg):
        rows = pdr_histogram(cfg, [0.0, 40.0])
        for z in (0.0, 40.0):
            probs = [r.probability for r in rows if r.zenith_deg == z]
            assert sum(probs) == pytest.approx(1.0, abs=1e-12)
            rates = [r.rate for r in rows if r.zenith_deg == z]
            assert rates == sorted(rates) and len(set(rates)) == len(rates)

    def test_worker_invariant(self, cfg):
        assert pdr_histogram(cfg, [0.0, 30.0]) == pdr_histogram(cfg.with_overrides(workers=2), [0.0, 30.0])

    def test_rejects_out_of_range(self, cfg):
        with pytest.raises(ValueError):
            pdr_histogram(cfg, [85.0])


class TestGridSearch:
    def test_single_point(self, cfg):
        best, rate = grid_search_source(cfg, [0.6], [0.1], [0.7], objective=lambda c, s: 1.0)
        assert best.mu[:2] == (0.6, 0.1) and best.c_x == 0.7 and rate == 1.0

    def test_picks_dominant_point(self, cfg):
        best, _ = grid_search_source(
            cfg, [0.5, 0.6, 0.7], [0.1, 0.2], [0.6, 0.8], objective=lambda c, s: -abs(s.mu[0] - 0.6) - abs(s.c_x - 0.8)
        )
        assert best.mu[0] == 0.6 and best.c_x == 0.8

    def test_ties_are_stable(self, cfg):
        best, _ = grid_search_source(cfg, [0.9, 0.5, 0.7], [0.2, 0.1], [0.9, 0.6, 0.4, 0.8], objective=lambda c, s: 0.0)
        assert best.mu[:2] == (0.5, 0.1) and best.c_x == 0.4
        best, _ = grid_search_source(cfg, [0.7], [0.1], [0.9, 0.6, 0.8], objective=lambda c, s: 0.0)
        assert best.c_x == 0.6

    def test_infeasible_grid(self, cfg):
        with pytest.raises(ValueError):
            grid_search_source(cfg, [0.1], [0.2], [0.7])

    def test_real_objective_prefers_biased_basis(self, cfg):
        c = cfg.with_overrides(samples=20)
        best, rate = grid_search_source(c, [0.7], [0.1], [0.5, 0.7])
        assert best.c_x == 0.7 and rate > 0


class TestCsv:
    def test_sweep_format(self, tmp_path):
        rows = [SweepRow(2.0, EFFICIENT, "finite", 1 / 3, 0.1, 10, 7)]
        path = tmp_path / "s.csv"
        write_sweep_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert lines[1] == "2,efficient,finite,0.33333333333333331,0.10000000000000001,10,7"
        parsed = list(csv.reader(lines))[1]
        assert float(parsed[3]) == 1 / 3

    def test_pdr_format(self, cfg, tmp_path):
        rows = pdr_histogram(cfg, [0.0])
        path = tmp_path / "p.csv"
        write_pdr_csv(rows, path)
        body = list(csv.reader(path.read_text().splitlines()))
        assert tuple(body[0]) == PDR_HEADER
        assert [float(r[2]) for r in body[1:]] == [r.probability for r in rows]
