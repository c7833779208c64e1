"""Shared bits for the experiment scripts."""

from dataclasses import replace


def apply_scale(config, scale: float):
    """Shrink the stopping rules by ``scale`` for quick desk runs."""
    if scale == 1.0:
        return config
    if scale <= 0:
        raise SystemExit("--scale must be positive")
    return replace(
        config,
        min_errors=max(1, round(config.min_errors * scale)),
        max_frames=max(1, round(config.max_frames * scale)),
    )


def point_printer(point):
    print(
        f"  {point.ebn0_db:5.2f} dB  ber {point.ber:.3e}  "
        f"errors {point.bit_errors}  frames {point.frames}  ({point.seconds:.1f} s)",
        flush=True,
    )
