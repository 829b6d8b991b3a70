"""Downlink geometry, extinction and elliptical-beam transmittance.

The received beam is a Gaussian ellipse described by its centroid
``(x0, y0)``, semi-axes ``W1``, ``W2`` and orientation ``alpha``. Its power
inside a circular aperture of radius ``r_a`` is integrated in polar
coordinates centred on the aperture, with the polar axis pointing at the
beam centroid, using a fixed-order Gauss-Legendre rule in both directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

DEFAULT_ZENITH_MAX = math.radians(80.0)
DEFAULT_QUADRATURE = (64, 64)

# one sample consumes: x0, y0, theta1, theta2 (normal) and orientation (uniform)
DRAWS_PER_SAMPLE = 5


@dataclass(frozen=True)
class LinkGeometry:
    """Static slant link through a homogeneous atmospheric slab.

    Attributes
    ----------
    zenith_angle : float
        Zenith angle in radians.
    altitude : float
        Satellite altitude at zenith ``L'`` in meters.
    atmosphere_thickness : float
        Slab thickness ``h'`` in meters.
    """

    zenith_angle: float
    altitude: float
    atmosphere_thickness: float

    @property
    def secant(self) -> float:
        return 1.0 / math.cos(self.zenith_angle)

    @property
    def link_length(self) -> float:
        return self.altitude * self.secant

    @property
    def atmosphere_length(self) -> float:
        return self.atmosphere_thickness * self.secant


@dataclass(frozen=True)
class WeatherScenario:
    """One atmospheric condition.

    ``extinction_coeff`` is the zenith optical depth ``chi0`` used in
    ``exp(-chi0 sec(zenith))``.
    """

    name: str
    n0: float
    cn2: float
    extinction_coeff: float = 0.7

    def __post_init__(self) -> None:
        if self.n0 < 0:
            raise ValueError(f"{self.name}: n0={self.n0} must be non-negative")
        if self.cn2 <= 0:
            raise ValueError(f"{self.name}: Cn2={self.cn2} must be positive")
        if self.extinction_coeff < 0:
            raise ValueError(f"{self.name}: extinction coefficient must be non-negative")


@dataclass(frozen=True)
class OpticalConfig:
    """Transmitter and receiver optics (all SI units)."""

    beam_waist: float = 0.05
    aperture_radius: float = 0.5
    wavelength: float = 785e-9
    pointing_error: float = 2e-6

    def __post_init__(self) -> None:
        for name in ("beam_waist", "aperture_radius", "wavelength", "pointing_error"):
            if not getattr(self, name) > 0:
                raise ValueError(f"optics.{name} must be strictly positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.beam_waist**2 / self.wavelength


@dataclass(frozen=True)
class BeamStatistics:
    """Moments of the beam-parameter distribution.

    ``theta_i = ln(W_i^2 / W0^2)``; ``(x0, y0)`` are independent normals and
    ``(theta1, theta2)`` is bivariate normal with correlation ``corr_theta``.
    """

    mean_x0: float = 0.0
    mean_y0: float = 0.0
    var_x0: float = 0.0
    var_y0: float = 0.0
    mean_theta1: float = 0.0
    mean_theta2: float = 0.0
    var_theta1: float = 0.0
    var_theta2: float = 0.0
    corr_theta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("var_x0", "var_y0", "var_theta1", "var_theta2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not -1.0 <= self.corr_theta <= 1.0:
            raise ValueError("corr_theta must lie in [-1, 1]")


@dataclass(frozen=True)
class BeamParams:
    """A single received-beam realization (meters, radians)."""

    x0: float
    y0: float
    W1: float
    W2: float
    alpha: float

    def __post_init__(self) -> None:
        if not (self.W1 > 0 and self.W2 > 0):
            raise ValueError(f"semi-axes must be positive: {self}")


@dataclass(frozen=True)
class BeamSamples:
    """Column-oriented batch of beam realizations."""

    x0: np.ndarray
    y0: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    alpha: np.ndarray

    def __len__(self) -> int:
        return len(self.x0)

    def __getitem__(self, i: int) -> BeamParams:
        return BeamParams(
            float(self.x0[i]), float(self.y0[i]), float(self.W1[i]), float(self.W2[i]), float(self.alpha[i])
        )

    def __iter__(self) -> Iterator[BeamParams]:
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class Pdt:
    """Binned probability distribution of transmittance over ``[0, 1]``."""

    bin_count: int
    bin_centers: np.ndarray
    probabilities: np.ndarray
    raw_samples: np.ndarray | None = field(default=None, repr=False)

    def occupied(self) -> tuple[np.ndarray, np.ndarray]:
        """Centers and probabilities of the non-empty bins."""
        mask = self.probabilities > 0
        return self.bin_centers[mask], self.probabilities[mask]


def slant_geometry(
    zenith_angle: float,
    altitude: float,
    atmosphere_thickness: float,
    zenith_max: float = DEFAULT_ZENITH_MAX,
) -> LinkGeometry:
    """Secant-law link geometry; angles in radians."""
    if not 0.0 <= zenith_angle < math.pi / 2:
        raise ValueError(f"zenith angle {math.degrees(zenith_angle):g} deg must be in [0, 90)")
    if zenith_angle > zenith_max + 1e-12:
        raise ValueError(
            f"zenith angle {math.degrees(zenith_angle):g} deg exceeds the configured "
            f"maximum {math.degrees(zenith_max):g} deg"
        )
    if altitude <= 0 or atmosphere_thickness < 0 or atmosphere_thickness > altitude:
        raise ValueError("need 0 <= atmosphere thickness <= altitude")
    return LinkGeometry(zenith_angle, altitude, atmosphere_thickness)


def extinction_factor(geometry: LinkGeometry, scenario: WeatherScenario) -> float:
    return math.exp(-scenario.extinction_coeff * geometry.secant)


def diffraction_width(geometry: LinkGeometry, optics: OpticalConfig) -> float:
    """Vacuum Gaussian-beam radius after the full slant link."""
    return optics.beam_waist * math.hypot(1.0, geometry.link_length / optics.rayleigh_range)


def rytov_variance(geometry: LinkGeometry, optics: OpticalConfig, scenario: WeatherScenario) -> float:
    """Plane-wave Rytov variance accumulated over the atmospheric slab."""
    k = optics.wavenumber
    return 1.23 * scenario.cn2 * k ** (7.0 / 6.0) * geometry.atmosphere_length ** (11.0 / 6.0)


PROVIDERS = ("default-turbulence", "explicit")


def estimate_beam_statistics(
    geometry: LinkGeometry,
    optics: OpticalConfig,
    scenario: WeatherScenario,
    provider: str = "default-turbulence",
    explicit: Mapping[str, float] | None = None,
    c_theta: float = 1.0,
) -> BeamStatistics:
    """Beam-parameter moments from the selected provider.

    ``"explicit"`` echoes the moments given in ``explicit``. The
    ``"default-turbulence"`` estimator combines diffraction spreading, a
    Rytov-variance broadening term and pointing jitter ``(p_e L)^2``; beam
    wander is neglected in the downlink and the semi-axes are uncorrelated.
    ``c_theta`` scales the log-width fluctuations.
    """
    if provider == "explicit":
        return BeamStatistics(**dict(explicit or {}))
    if provider != "default-turbulence":
        raise ValueError(f"unknown beam-statistics provider {provider!r}; expected one of {PROVIDERS}")

    k = optics.wavenumber
    L = geometry.link_length
    w_d = diffraction_width(geometry, optics)
    sigma_r2 = rytov_variance(geometry, optics, scenario)
    fresnel = 2.0 * L / (k * w_d**2)
    broadening = 1.0 + 1.33 * sigma_r2 * fresnel ** (5.0 / 6.0)
    mean_theta = math.log((w_d / optics.beam_waist) ** 2 * broadening)
    var_theta = math.log1p(c_theta * sigma_r2 ** (6.0 / 5.0))
    var_xy = (optics.pointing_error * L) ** 2
    return BeamStatistics(
        mean_x0=0.0,
        mean_y0=0.0,
        var_x0=var_xy,
        var_y0=var_xy,
        mean_theta1=mean_theta,
        mean_theta2=mean_theta,
        var_theta1=var_theta,
        var_theta2=var_theta,
        corr_theta=0.0,
    )


def standard_draws(seed: int, n: int, start: int = 0) -> np.ndarray:
    """Per-sample standard draws, shape ``(n, 5)``.

    Columns 0-3 are standard normals, column 4 is uniform on ``[0, 1)``.
    Row ``i`` comes from its own stream keyed by ``(seed, start + i)``, so any
    slice of the sample index range is reproducible on its own.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    out = np.empty((n, DRAWS_PER_SAMPLE))
    for row in range(n):
        ss = np.random.SeedSequence(seed, spawn_key=(start + row,))
        rng = np.random.Generator(np.random.PCG64(ss))
        out[row, :4] = rng.standard_normal(4)
        out[row, 4] = rng.random()
    return out


def beam_params_from_draws(stats: BeamStatistics, draws: np.ndarray, beam_waist: float) -> BeamSamples:
    """Map standard draws onto beam realizations with the given moments."""
    z = np.asarray(draws, dtype=float)
    x0 = stats.mean_x0 + math.sqrt(stats.var_x0) * z[:, 0]
    y0 = stats.mean_y0 + math.sqrt(stats.var_y0) * z[:, 1]
    rho = stats.corr_theta
    theta1 = stats.mean_theta1 + math.sqrt(stats.var_theta1) * z[:, 2]
    theta2 = stats.mean_theta2 + math.sqrt(stats.var_theta2) * (
        rho * z[:, 2] + math.sqrt(max(0.0, 1.0 - rho * rho)) * z[:, 3]
    )
    W1 = beam_waist * np.exp(0.5 * theta1)
    W2 = beam_waist * np.exp(0.5 * theta2)
    # orientation is drawn relative to the centroid direction
    alpha = 0.5 * math.pi * z[:, 4] + np.arctan2(y0, x0)
    return BeamSamples(x0, y0, W1, W2, alpha)


def sample_beam_params(stats: BeamStatistics, seed: int, n: int, beam_waist: float) -> BeamSamples:
    """Draw ``n`` beam realizations, fully determined by ``seed``."""
    if n < 1:
        raise ValueError("need at least one sample")
    return beam_params_from_draws(stats, standard_draws(seed, n), beam_waist)


@lru_cache(maxsize=16)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _panels(lo: np.ndarray, hi: np.ndarray, nodes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map reference nodes onto ``[lo, hi]`` panels; adds a trailing node axis."""
    half = 0.5 * (hi - lo)
    return lo[..., None] + half[..., None] * (nodes + 1.0), half[..., None] * weights


def transmittance_batch(
    x0: np.ndarray,
    y0: np.ndarray,
    W1: np.ndarray,
    W2: np.ndarray,
    alpha: np.ndarray,
    aperture_radius: float,
    chi_ext: float,
    orders: tuple[int, int] = DEFAULT_QUADRATURE,
    chunk: int = 128,
) -> np.ndarray:
    """Vectorized aperture transmittance for arrays of beam parameters.

    The radial direction uses one Gauss-Legendre panel of order
    ``orders[0]``. At every radial node the angular integral is split into
    three panels of order ``orders[1]`` with breakpoints at the centroid
    direction and where the circle of radius rho crosses the beam's long
    axis, so the intensity ridge of a thin, strongly elliptical beam lands on
    clustered panel end nodes.
    """
    x0, y0, W1, W2, alpha = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (x0, y0, W1, W2, alpha))
    if aperture_radius <= 0:
        raise ValueError("aperture radius must be positive")
    n_rho, n_theta = orders
    t_r, w_r = _gauss_legendre(n_rho)
    t_t, w_t = _gauss_legendre(n_theta)
    two_pi = 2.0 * math.pi
    rho = 0.5 * aperture_radius * (t_r + 1.0)
    w_rho = 0.5 * aperture_radius * w_r * rho  # includes the polar Jacobian

    rho0 = np.hypot(x0, y0)
    phi = alpha - np.arctan2(y0, x0)
    inv1 = 1.0 / W1**2
    inv2 = 1.0 / W2**2
    c2 = np.cos(phi) ** 2
    s2 = np.sin(phi) ** 2
    a1 = c2 * inv1 + s2 * inv2
    a2 = s2 * inv1 + c2 * inv2
    a3 = (inv1 - inv2) * np.sin(2.0 * phi)
    # direction of the long axis relative to the centroid direction
    ridge = np.where(W1 >= W2, phi, phi + 0.5 * math.pi)
    offset = rho0 * np.sin(ridge)  # signed distance of the long axis from the centre

    out = np.empty_like(rho0)
    for lo in range(0, len(out), chunk):
        sl = slice(lo, lo + chunk)
        m = len(rho0[sl])
        arc = np.arcsin(np.clip(offset[sl, None] / rho[None, :], -1.0, 1.0))
        b1 = np.mod(ridge[sl, None] - arc, two_pi)
        b2 = np.mod(ridge[sl, None] + math.pi + arc, two_pi)
        b_lo = np.minimum(b1, b2)
        b_hi = np.maximum(b1, b2)
        t_lo = np.stack([np.zeros_like(b_lo), b_lo, b_hi], axis=-1)
        t_hi = np.stack([b_lo, b_hi, np.full_like(b_hi, two_pi)], axis=-1)
        theta, w_theta = _panels(t_lo, t_hi, t_t, w_t)
        theta = theta.reshape(m, n_rho, -1)  # (m, R, T)
        w_theta = w_theta.reshape(theta.shape)

        u = rho[None, :, None] * np.cos(theta) - rho0[sl, None, None]
        v = rho[None, :, None] * np.sin(theta)
        q = a1[sl, None, None] * u * u + a2[sl, None, None] * v * v + a3[sl, None, None] * u * v
        out[sl] = np.einsum("mrt,mrt,r->m", np.exp(-2.0 * q), w_theta, w_rho)
    eta = 2.0 * chi_ext / (math.pi * W1 * W2) * out
    if not np.all(np.isfinite(eta)):
        bad = int(np.flatnonzero(~np.isfinite(eta))[0])
        raise FloatingPointError(
            f"non-finite transmittance for beam x0={x0[bad]}, y0={y0[bad]}, "
            f"W1={W1[bad]}, W2={W2[bad]}, alpha={alpha[bad]}"
        )
    return np.clip(eta, 0.0, chi_ext)


def transmittance(
    v: BeamParams,
    aperture_radius: float,
    chi_ext: float,
    orders: tuple[int, int] = DEFAULT_QUADRATURE,
) -> float:
    """Fraction of the received power collected by the aperture, times ``chi_ext``."""
    return float(transmittance_batch(v.x0, v.y0, v.W1, v.W2, v.alpha, aperture_radius, chi_ext, orders)[0])


def transmittance_samples(
    samples: BeamSamples, aperture_radius: float, chi_ext: float, orders: tuple[int, int] = DEFAULT_QUADRATURE
) -> np.ndarray:
    return transmittance_batch(
        samples.x0, samples.y0, samples.W1, samples.W2, samples.alpha, aperture_radius, chi_ext, orders
    )


def build_pdt(samples: Sequence[float] | np.ndarray, bin_count: int, keep_samples: bool = False) -> Pdt:
    """Histogram transmittance samples into ``bin_count`` equal bins on ``[0, 1]``."""
    eta = np.asarray(samples, dtype=float).ravel()
    if eta.size == 0:
        raise ValueError("cannot build a PDT from an empty sample set")
    if bin_count < 1:
        raise ValueError("bin_count must be at least 1")
    if np.any((eta < 0) | (eta > 1)) or not np.all(np.isfinite(eta)):
        raise ValueError("transmittance samples must lie in [0, 1]")
    idx = np.minimum((eta * bin_count).astype(np.int64), bin_count - 1)
    counts = np.bincount(idx, minlength=bin_count)
    centers = (np.arange(bin_count) + 0.5) / bin_count
    probs = counts / eta.size
    return Pdt(bin_count, centers, probs, eta.copy() if keep_samples else None)
