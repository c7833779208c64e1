"""Wall-clock scaling of the two equalizers over block length.

The sliding-window receiver should come out near N^1 and the full block
solver near N^2.  Constellation size is also swept for the sliding-window
receiver: the per-symbol work is constellation-free, so the timings should
sit on top of each other.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ftnsim.arfit import fit_yule_walker  # noqa: E402
from ftnsim.equalize import complexity_probe, ilmmse_equalize, rilmmse_equalize  # noqa: E402
from ftnsim.pulse import PulseSpec, isi_taps, noise_autocorr  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,512,1024,2048")
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    spec = PulseSpec(alpha=0.3, half_span=8.0)
    # full lag support; shorter profiles leave the block covariance indefinite
    profile = isi_taps(spec, 0.5, 31)
    half = 7
    c = profile.half_length
    taps = profile.taps[c - half : c + half + 1]
    ar = fit_yule_walker(noise_autocorr(profile, 0.5, max_lag=9).lags)
    full_lags = noise_autocorr(profile, 0.5).lags

    def run_ri(n):
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        rilmmse_equalize(r, taps, -half, ar, np.zeros(n), np.ones(n), readout="block")

    def run_i(n):
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ilmmse_equalize(r, taps, -half, full_lags, np.zeros(n), np.ones(n))

    header = "  ".join(f"{n:>9d}" for n in sizes)
    print(f"{'':9s}  block len: {header}")
    for label, runner in (("ri-lmmse", run_ri), ("i-lmmse", run_i)):
        secs = complexity_probe(runner, sizes, repeats=args.reps)
        slope = np.polyfit(np.log(sizes), np.log(secs), 1)[0]
        cells = "  ".join(f"{t * 1e3:9.2f}" for t in secs)
        print(f"{label:9s}  ms per call: {cells}   slope ~ N^{slope:.2f}", flush=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
