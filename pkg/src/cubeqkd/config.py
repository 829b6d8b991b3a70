"""INI configuration loader.

Every physical parameter has a packaged default in ``data/default.ini``; a
user file only needs the keys it changes. Sections::

    [optics]      W0, r_a, lambda, p_e
    [link]        L_prime, h_prime, beta, zenith_max_deg
    [turbulence]  provider, c_theta, quad_rho, quad_theta
    [explicit]    mean_x0, var_x0, ..., corr_theta   (explicit provider only)
    [source]      mu1, mu2, mu3, p_mu1, p_mu2, p_mu3, c_X, f_s, T
    [detector]    p_ec, p_ap, QBER_I, eta_det
    [security]    eps_sec, eps_corr
    [run]         scenario, protocol, mode, counts, samples, bins, seed,
                  zenith_min, zenith_max, zenith_step, workers
    [scenario:NAME]  n0, Cn2, extinction_scale
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import PROVIDERS, OpticalConfig, WeatherScenario
from .core_math import SecurityParams
from .counts import PROTOCOLS, DetectorConfig, SourceConfig

MODES = ("finite", "asymptotic")
COUNT_MODES = ("expected", "sampled")
EXPLICIT_KEYS = (
    "mean_x0", "mean_y0", "var_x0", "var_y0",
    "mean_theta1", "mean_theta2", "var_theta1", "var_theta2", "corr_theta",
)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; the message names the file and key."""


@dataclass(frozen=True)
class LinkConfig:
    altitude: float = 400e3
    atmosphere_thickness: float = 20e3
    beta: float = 0.7
    zenith_max_deg: float = 80.0


@dataclass(frozen=True)
class RunConfig:
    """Everything a sweep, PDR or grid search needs."""

    optics: OpticalConfig = field(default_factory=OpticalConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    scenarios: dict[str, WeatherScenario] = field(default_factory=dict)
    source: SourceConfig = field(default_factory=SourceConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    security: SecurityParams = field(default_factory=SecurityParams)
    provider: str = "default-turbulence"
    explicit: dict[str, float] | None = None
    c_theta: float = 1.0
    quadrature: tuple[int, int] = (64, 64)
    scenario: str = "Day-1"
    protocol: str = "efficient"
    mode: str = "finite"
    counts: str = "expected"
    samples: int = 1000
    bins: int = 1000
    seed: int = 0
    zenith_min: float = 0.0
    zenith_max: float = 80.0
    zenith_step: float = 2.0
    workers: int = 1

    def __post_init__(self) -> None:
        validate(self)

    def zenith_grid(self) -> np.ndarray:
        """Zenith angles in degrees, inclusive of ``zenith_max`` when it lies on the grid."""
        count = int(math.floor((self.zenith_max - self.zenith_min) / self.zenith_step + 1e-9)) + 1
        return np.round(self.zenith_min + self.zenith_step * np.arange(count), 10)

    def weather(self, name: str | None = None) -> WeatherScenario:
        name = name or self.scenario
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(self.scenarios)}") from None

    def with_overrides(self, **changes) -> "RunConfig":
        """Copy with the non-``None`` entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def validate(cfg: RunConfig) -> None:
    def fail(msg: str) -> None:
        raise ConfigError(msg)

    if cfg.provider not in PROVIDERS:
        fail(f"[turbulence] provider={cfg.provider!r} not in {PROVIDERS}")
    if cfg.provider == "explicit":
        missing = [k for k in EXPLICIT_KEYS if k not in (cfg.explicit or {})]
        if missing:
            fail(f"[explicit] missing keys: {', '.join(missing)}")
    if cfg.protocol not in PROTOCOLS:
        fail(f"[run] protocol={cfg.protocol!r} not in {PROTOCOLS}")
    if cfg.mode not in MODES:
        fail(f"[run] mode={cfg.mode!r} not in {MODES}")
    if cfg.counts not in COUNT_MODES:
        fail(f"[run] counts={cfg.counts!r} not in {COUNT_MODES}")
    if cfg.samples < 1:
        fail(f"[run] samples={cfg.samples} must be >= 1")
    if cfg.bins < 1:
        fail(f"[run] bins={cfg.bins} must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        fail(f"[run] seed={cfg.seed} must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        fail(f"[run] workers={cfg.workers} must be >= 1")
    if min(cfg.quadrature) < 1:
        fail(f"[turbulence] quadrature orders {cfg.quadrature} must be positive")
    if cfg.zenith_step <= 0:
        fail(f"[run] zenith_step={cfg.zenith_step} must be positive")
    if not 0.0 <= cfg.zenith_min <= cfg.zenith_max <= cfg.link.zenith_max_deg:
        fail(
            f"[run] zenith grid [{cfg.zenith_min}, {cfg.zenith_max}] must lie within "
            f"[0, {cfg.link.zenith_max_deg}] (zenith_max_deg)"
        )
    if not 0.0 < cfg.link.zenith_max_deg < 90.0:
        fail(f"[link] zenith_max_deg={cfg.link.zenith_max_deg} must lie in (0, 90)")
    if cfg.c_theta < 0:
        fail(f"[turbulence] c_theta={cfg.c_theta} must be non-negative")
    if cfg.scenarios and cfg.scenario not in cfg.scenarios:
        fail(f"[run] scenario={cfg.scenario!r} is not defined; known: {', '.join(cfg.scenarios)}")


def _default_text() -> str:
    return resources.files("cubeqkd").joinpath("data/default.ini").read_text()


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, origin: str) -> None:
        self.parser = parser
        self.origin = origin

    def _where(self, section: str, key: str) -> str:
        return f"{self.origin}: [{section}] {key}"

    def float(self, section: str, key: str) -> float:
        raw = self.parser.get(section, key, fallback=None)
        if raw is None:
            raise ConfigError(f"{self._where(section, key)} is missing")
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{self._where(section, key)}={raw!r} is not a number") from None
        if not math.isfinite(value):
            raise ConfigError(f"{self._where(section, key)}={raw!r} must be finite")
        return value

    def int(self, section: str, key: str) -> int:
        raw = self.str(section, key)
        try:
            return int(raw)
        except ValueError:
            pass
        value = self.float(section, key)
        if value != int(value):
            raise ConfigError(f"{self._where(section, key)}={raw!r} must be an integer")
        return int(value)

    def str(self, section: str, key: str) -> str:
        raw = self.parser.get(section, key, fallback=None)
        if raw is None:
            raise ConfigError(f"{self._where(section, key)} is missing")
        return raw.strip()

    def build(self, section: str, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ConfigError as exc:
            raise ConfigError(f"{self.origin}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.origin}: [{section}] {exc}") from None


def load_config(path: str | Path | None = None) -> RunConfig:
    """Packaged defaults overlaid with the INI file at ``path`` (if any)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case: Cn2, QBER_I, W0
    parser.read_string(_default_text(), source="default.ini")
    origin = "default.ini"
    if path is not None:
        origin = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            parser.read_string(text, source=origin)
        except configparser.Error as exc:
            raise ConfigError(f"{origin}: {exc}") from None
    r = _Reader(parser, origin)

    optics = r.build(
        "optics", OpticalConfig,
        beam_waist=r.float("optics", "W0"),
        aperture_radius=r.float("optics", "r_a"),
        wavelength=r.float("optics", "lambda"),
        pointing_error=r.float("optics", "p_e"),
    )
    link = LinkConfig(
        altitude=r.float("link", "L_prime"),
        atmosphere_thickness=r.float("link", "h_prime"),
        beta=r.float("link", "beta"),
        zenith_max_deg=r.float("link", "zenith_max_deg"),
    )

    scenarios = {}
    for section in parser.sections():
        if not section.startswith("scenario:"):
            continue
        name = section.split(":", 1)[1].strip()
        scale = r.float(section, "extinction_scale") if parser.has_option(section, "extinction_scale") else 1.0
        scenarios[name] = r.build(
            section, WeatherScenario,
            name=name,
            n0=r.float(section, "n0"),
            cn2=r.float(section, "Cn2"),
            extinction_coeff=link.beta * scale,
        )

    source = r.build(
        "source", SourceConfig,
        mu=(r.float("source", "mu1"), r.float("source", "mu2"), r.float("source", "mu3")),
        probs=(r.float("source", "p_mu1"), r.float("source", "p_mu2"), r.float("source", "p_mu3")),
        c_x=r.float("source", "c_X"),
        source_rate=r.float("source", "f_s"),
        block_time=r.float("source", "T"),
    )
    detector = r.build(
        "detector", DetectorConfig,
        p_ec=r.float("detector", "p_ec"),
        p_ap=r.float("detector", "p_ap"),
        qber_intrinsic=r.float("detector", "QBER_I"),
        eta_det=r.float("detector", "eta_det"),
    )
    security = r.build(
        "security", SecurityParams,
        eps_sec=r.float("security", "eps_sec"),
        eps_corr=r.float("security", "eps_corr"),
    )
    explicit = None
    if parser.has_section("explicit"):
        explicit = {k: r.float("explicit", k) for k in EXPLICIT_KEYS if parser.has_option("explicit", k)}

    return r.build(
        "run", RunConfig,
        optics=optics,
        link=link,
        scenarios=scenarios,
        source=source,
        detector=detector,
        security=security,
        provider=r.str("turbulence", "provider"),
        explicit=explicit,
        c_theta=r.float("turbulence", "c_theta"),
        quadrature=(r.int("turbulence", "quad_rho"), r.int("turbulence", "quad_theta")),
        scenario=r.str("run", "scenario"),
        protocol=r.str("run", "protocol"),
        mode=r.str("run", "mode"),
        counts=r.str("run", "counts"),
        samples=r.int("run", "samples"),
        bins=r.int("run", "bins"),
        seed=r.int("run", "seed"),
        zenith_min=r.float("run", "zenith_min"),
        zenith_max=r.float("run", "zenith_max"),
        zenith_step=r.float("run", "zenith_step"),
        workers=r.int("run", "workers"),
    )
