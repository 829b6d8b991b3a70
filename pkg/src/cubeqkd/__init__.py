"""Finite-key and asymptotic decoy-state BB84 rates over a turbulent CubeSat downlink."""

from .asymptotic import asymptotic_yields, key_rate_efficient_inf, key_rate_standard_inf
from .channel import build_pdt, estimate_beam_statistics, sample_beam_params, slant_geometry, transmittance
from .config import ConfigError, RunConfig, load_config
from .core_math import SecurityParams, binary_entropy, binomial_cdf_inverse, chernoff_deltas, gamma_term
from .counts import DetectorConfig, ObservedCounts, SourceConfig, simulate_counts
from .finite_key import key_rate, key_rate_efficient, key_rate_standard
from .pipeline import average_key_rate, grid_search_source, pdr_histogram, sweep_rows, zenith_sweep

__version__ = "0.1.0"
