"""Command line front end.

Exit codes: 0 on success, 2 for configuration errors, 3 when a run finished
but more than 0.1% of posterior variances hit the numerical floor (results
written, treat with suspicion).
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .arfit import fit_yule_walker
from .equalize import complexity_probe, ilmmse_equalize, rilmmse_equalize
from .harness import PRESETS, ConfigError, ExperimentConfig, run_experiment
from .pulse import PulseSpec, isi_taps, noise_autocorr

_HEALTH_LIMIT = 1e-3


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("ftnsim")
    except Exception:
        return "unknown"


def _add_pulse_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=0.5, help="signalling interval in symbol times")
    p.add_argument("--alpha", type=float, default=0.3, help="pulse roll-off")
    p.add_argument("--half-span", type=float, default=8.0, help="pulse truncation, symbol times")
    p.add_argument("--half-length", type=int, default=15, help="one-sided tap count")


def cmd_taps(args) -> int:
    spec = PulseSpec(alpha=args.alpha, half_span=args.half_span)
    profile = isi_taps(spec, args.tau, args.half_length)
    if args.json:
        print(profile.to_json())
        return 0
    print(f"# tau={profile.tau:g} alpha={spec.alpha:g} half_span={spec.half_span:g}")
    for k in range(profile.half_length + 1):
        print(f"h[{k:3d}] = {profile.taps[profile.half_length + k]: .12f}")
    return 0


def cmd_arfit(args) -> int:
    spec = PulseSpec(alpha=args.alpha, half_span=args.half_span)
    profile = isi_taps(spec, args.tau, args.half_length)
    gamma = noise_autocorr(profile, args.n0, max_lag=args.order)
    model = fit_yule_walker(gamma.lags)
    if args.json:
        print(model.to_json())
        return 0
    print(f"# AR({model.order}) fit to noise lags at n0={args.n0:g}, tau={args.tau:g}")
    for i, c in enumerate(model.coeffs, start=1):
        print(f"psi[{i}] = {c: .12f}")
    print(f"innovation_var = {model.innovation_var:.12e}")
    print(f"stable = {model.is_stable()}")
    return 0


def _finish(result, out_dir, quiet) -> int:
    if out_dir is not None:
        csv_path, json_path = result.write(out_dir)
        if not quiet:
            print(f"wrote {csv_path} and {json_path}")
    if result.floored_frac > _HEALTH_LIMIT:
        print(
            f"warning: {100 * result.floored_frac:.3f}% of posterior variances "
            "hit the numerical floor",
            file=sys.stderr,
        )
        return 3
    return 0


def _progress(quiet):
    if quiet:
        return None

    def show(point):
        print(
            f"ebn0={point.ebn0_db:g} dB  ber={point.ber:.3e}  "
            f"errors={point.bit_errors}  frames={point.frames}  "
            f"({point.seconds:.1f} s)",
            flush=True,
        )

    return show


def cmd_ber(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
    try:
        config = ExperimentConfig.from_json(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config {args.config}: {exc}") from exc
    config = _apply_budget(config, args.scale)
    result = run_experiment(config, cache_dir=args.cache, progress=_progress(args.quiet))
    if args.out is None and not args.quiet:
        print(result.csv_text(), end="")
    return _finish(result, args.out, args.quiet)


def _apply_budget(config: ExperimentConfig, scale: float) -> ExperimentConfig:
    if scale == 1.0:
        return config
    if scale <= 0:
        raise ConfigError("--scale must be positive")
    return replace(
        config,
        min_errors=max(1, round(config.min_errors * scale)),
        max_frames=max(1, round(config.max_frames * scale)),
    )


def cmd_preset(args) -> int:
    factory = PRESETS[args.preset]
    overrides = {}
    if args.points:
        overrides["ebn0_db"] = tuple(float(x) for x in args.points.split(","))
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = _apply_budget(factory(args.arm, **overrides), args.scale)
    if not args.quiet:
        print(f"# {config.name}: {len(config.ebn0_db)} points, seed {config.seed}")
    result = run_experiment(config, cache_dir=args.cache, progress=_progress(args.quiet))
    if args.out is None and not args.quiet:
        print(result.csv_text(), end="")
    return _finish(result, args.out, args.quiet)


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",")]
    rng = np.random.default_rng(0)
    spec = PulseSpec(alpha=0.3, half_span=8.0)
    # full lag support; shorter profiles leave the block covariance indefinite
    profile = isi_taps(spec, 0.5, 31)
    half = 7
    c = profile.half_length
    taps = profile.taps[c - half : c + half + 1]
    gamma = noise_autocorr(profile, 0.5, max_lag=9)
    ar = fit_yule_walker(gamma.lags)

    def run_ri(n):
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        rilmmse_equalize(
            r, taps, -half, ar, np.zeros(n), np.ones(n), readout=args.readout
        )

    def run_i(n):
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ilmmse_equalize(
            r, taps, -half, noise_autocorr(profile, 0.5).lags, np.zeros(n), np.ones(n)
        )

    for label, runner in (("ri-lmmse", run_ri), ("i-lmmse", run_i)):
        secs = complexity_probe(runner, sizes, repeats=args.reps)
        slope = np.polyfit(np.log(sizes), np.log(secs), 1)[0]
        cells = "  ".join(f"{t * 1e3:9.2f}" for t in secs)
        print(f"{label:9s}  ms per call: {cells}   slope ~ N^{slope:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ftnsim",
        description="Link simulation of iterative LMMSE equalization for "
        "faster-than-Nyquist signalling",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("taps", help="print the ISI tap profile of an rRC pulse")
    _add_pulse_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_taps)

    p = sub.add_parser("arfit", help="fit an AR model to the colored-noise lags")
    _add_pulse_args(p)
    p.add_argument("--n0", type=float, default=0.5, help="noise level N0")
    p.add_argument("--order", type=int, default=9, help="AR order")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_arfit)

    p = sub.add_parser("ber", help="run an experiment described by a JSON config")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    _add_run_args(p)
    p.set_defaults(fn=cmd_ber)

    for preset in sorted(PRESETS):
        p = sub.add_parser(preset, help=f"run the {preset} stock experiment")
        p.add_argument("--arm", default=_default_arm(preset))
        _add_run_args(p)
        p.add_argument("--points", default=None, help="comma-separated Eb/N0 grid override")
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(fn=cmd_preset, preset=preset)

    p = sub.add_parser("bench", help="time both equalizers over block sizes")
    p.add_argument("--sizes", default="256,512,1024,2048")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--readout", default="block", choices=("center", "block"))
    p.set_defaults(fn=cmd_bench)
    return ap


def _default_arm(preset: str) -> str:
    return "recalculated" if preset == "fig4" else "ftn"


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="directory for CSV + JSON results")
    p.add_argument("--cache", default=None, help="directory for cached results")
    p.add_argument("--scale", type=float, default=1.0, help="budget factor on min_errors/max_frames")
    p.add_argument("--quiet", action="store_true")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
