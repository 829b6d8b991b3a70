"""Command-line entry point: ``cubeqkd {sweep,pdr,optimize,validate}``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .channel import transmittance_batch
from .config import MODES, ConfigError, RunConfig, load_config
from .counts import PROTOCOLS
from .finite_key import InsufficientStatistics
from .pipeline import (
    channel_samples,
    grid_search_source,
    pdr_histogram,
    sweep_rows,
    write_pdr_csv,
    write_sweep_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file overriding the packaged defaults")
    p.add_argument("--scenario", action="append", help="weather scenario; repeat or use 'all'")
    p.add_argument("--protocol", choices=[*PROTOCOLS, "all"])
    p.add_argument("--mode", choices=[*MODES, "all"])
    p.add_argument("--counts", choices=["expected", "sampled"], help="count model per transmittance")
    p.add_argument("--samples", type=int, help="beam realizations per zenith angle")
    p.add_argument("--bins", type=int, help="PDT bin count")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", type=Path, help="output CSV (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubeqkd", description="CubeSat decoy-state BB84 key-rate simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="average key rate versus zenith angle")
    _common(sweep)
    sweep.add_argument("--zenith-min", type=float)
    sweep.add_argument("--zenith-max", type=float)
    sweep.add_argument("--zenith-step", type=float)

    pdr = sub.add_parser("pdr", help="key-rate distribution at selected zenith angles")
    _common(pdr)
    pdr.add_argument("--zeniths", type=_float_list, default=[0.0, 40.0], help="comma-separated degrees")

    opt = sub.add_parser("optimize", help="grid search over mu1, mu2 and c_X")
    _common(opt)
    opt.add_argument("--zenith", type=float, default=0.0)
    opt.add_argument("--mu1", type=_float_list, default=[0.5, 0.6, 0.7, 0.8, 0.9])
    opt.add_argument("--mu2", type=_float_list, default=[0.05, 0.1, 0.15, 0.2, 0.25])
    opt.add_argument("--cx", type=_float_list, default=[0.5, 0.6, 0.7, 0.8, 0.9])

    val = sub.add_parser("validate", help="check a configuration and run a quadrature self-test")
    _common(val)
    return parser


def _scenarios(args: argparse.Namespace, cfg: RunConfig) -> list[str]:
    names = args.scenario or [cfg.scenario]
    if "all" in names:
        return list(cfg.scenarios)
    for name in names:
        cfg.weather(name)
    return names


def _configure(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    first = args.scenario[0] if args.scenario and args.scenario[0] != "all" else None
    return cfg.with_overrides(
        scenario=first,
        protocol=args.protocol if args.protocol != "all" else None,
        mode=args.mode if args.mode != "all" else None,
        counts=args.counts,
        samples=args.samples,
        bins=args.bins,
        seed=args.seed,
        workers=args.workers,
        zenith_min=getattr(args, "zenith_min", None),
        zenith_max=getattr(args, "zenith_max", None),
        zenith_step=getattr(args, "zenith_step", None),
    )


def _per_scenario_path(out: Path | None, scenario: str, many: bool) -> Path | None:
    if out is None or not many:
        return out
    return out.with_name(f"{out.stem}-{scenario}{out.suffix}")


def _emit(writer, rows, path: Path | None) -> None:
    if path is None:
        writer(rows, "/dev/stdout")
    else:
        writer(rows, path)


def _cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    scenarios = _scenarios(args, cfg)
    protocols = list(PROTOCOLS) if args.protocol == "all" else [cfg.protocol]
    modes = list(MODES) if args.mode == "all" else [cfg.mode]
    rows = sweep_rows(cfg, scenarios, protocols, modes)
    for name in scenarios:
        mine = [r for r in rows if r.scenario == name]
        _emit(write_sweep_csv, mine, _per_scenario_path(args.out, name, len(scenarios) > 1))
    return EXIT_OK


def _cmd_pdr(args: argparse.Namespace, cfg: RunConfig) -> int:
    scenarios = _scenarios(args, cfg)
    for name in scenarios:
        rows = pdr_histogram(cfg, args.zeniths, scenario=name)
        _emit(write_pdr_csv, rows, _per_scenario_path(args.out, name, len(scenarios) > 1))
    return EXIT_OK


def _cmd_optimize(args: argparse.Namespace, cfg: RunConfig) -> int:
    try:
        best, rate = grid_search_source(cfg, args.mu1, args.mu2, args.cx, zenith_deg=args.zenith)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    lines = [
        "[source]",
        f"mu1 = {best.mu[0]:.17g}",
        f"mu2 = {best.mu[1]:.17g}",
        f"mu3 = {best.mu[2]:.17g}",
        f"c_X = {best.c_x:.17g}",
        f"# avg_key_rate = {rate:.17g}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace, cfg: RunConfig) -> int:
    scenarios = _scenarios(args, cfg)
    # circular centered beam against the closed form
    r_a = cfg.optics.aperture_radius
    w = np.array([0.5 * r_a, r_a, 2.0 * r_a])
    zeros = np.zeros_like(w)
    got = transmittance_batch(zeros, zeros, w, w, zeros, r_a, 1.0, cfg.quadrature)
    want = 1.0 - np.exp(-2.0 * r_a**2 / w**2)
    err = float(np.max(np.abs(got - want)))
    if not err <= 1e-6:
        raise FloatingPointError(f"quadrature self-test error {err:.3e} exceeds 1e-6")
    for name in scenarios:
        eta = channel_samples(cfg, name, cfg.zenith_min, samples=min(cfg.samples, 16))
        if not np.all(np.isfinite(eta)):
            raise FloatingPointError(f"non-finite transmittance for scenario {name}")
    print(
        f"ok: {len(cfg.scenarios)} scenarios, zenith grid {cfg.zenith_min:g}-{cfg.zenith_max:g} "
        f"step {cfg.zenith_step:g} deg, quadrature self-test error {err:.1e}"
    )
    return EXIT_OK


COMMANDS = {"sweep": _cmd_sweep, "pdr": _cmd_pdr, "optimize": _cmd_optimize, "validate": _cmd_validate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, InsufficientStatistics, ZeroDivisionError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
