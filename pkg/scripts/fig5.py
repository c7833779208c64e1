"""BPSK waterfall at tau=0.5: sliding-window receiver vs the tau=1 baseline.

Runs the stock arms and writes one CSV/JSON pair per arm.  The full budget
takes a while at the high-SNR end; use --scale to shrink the stopping rules
for a quick pass (--scale 0.1 is enough to see the waterfall take shape).
The i-lmmse arm is the full block equalizer and is quadratic in block
length, so it is off by default.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ftnsim.harness import fig5_config, run_experiment  # noqa: E402
from _common import apply_scale, point_printer  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arms", default="ftn,reference", help="comma list: ftn,reference,ilmmse")
    ap.add_argument("--scale", type=float, default=1.0, help="stopping-rule budget factor")
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    for arm in args.arms.split(","):
        overrides = {} if args.seed is None else {"seed": args.seed}
        config = apply_scale(fig5_config(arm.strip(), **overrides), args.scale)
        print(f"# {config.name}  ({len(config.ebn0_db)} points)", flush=True)
        result = run_experiment(config, progress=point_printer)
        csv_path, _ = result.write(args.out)
        print(f"# wrote {csv_path}", flush=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
