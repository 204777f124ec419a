"""Single-threaded filter throughput harness.

Run as ``python3 -m iroco.bench``; prints a JSON result to stdout.  BLAS
thread pools are pinned to one thread before numpy loads, so the measured
rate reflects what a single core sustains.
"""

import argparse
import json
import os
import sys


def _limit_threads() -> None:
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ.setdefault(var, "1")


_limit_threads()

import time  # noqa: E402

import numpy as np  # noqa: E402

from .datamodel import OBS_DIM, PoseState  # noqa: E402
from .denkf.filtering import filter_step, init_ensemble  # noqa: E402
from .denkf.models import build_filter_models  # noqa: E402


def measure_throughput(
    n_members: int = 32,
    window: int = 5,
    width_div: int = 1,
    seconds: float = 2.0,
    seed: int = 0,
    warmup_steps: int = 25,
) -> dict:
    """Steady-state filter steps per second on synthetic observations."""
    rng = np.random.default_rng(seed)
    models = build_filter_models(window=window, dropout=0.1, width_div=width_div, rng=rng)
    ens = init_ensemble(PoseState.rest(), n_members, window, 0.05, rng)
    raw = rng.normal(scale=0.3, size=(window, OBS_DIM))

    for _ in range(warmup_steps):
        ens, _, _ = filter_step(ens, raw, models, rng)

    steps = 0
    start = time.perf_counter()
    while True:
        ens, _, _ = filter_step(ens, raw, models, rng)
        steps += 1
        elapsed = time.perf_counter() - start
        if elapsed >= seconds:
            break
    return {
        "hz": steps / elapsed,
        "steps": steps,
        "elapsed_s": elapsed,
        "n_members": n_members,
        "window": window,
        "width_div": width_div,
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="Measure single-threaded filter throughput.")
    ap.add_argument("--ensemble", type=int, default=32, help="ensemble size")
    ap.add_argument("--window", type=int, default=5, help="history window length")
    ap.add_argument("--width-div", type=int, default=1, help="hidden width divisor")
    ap.add_argument("--seconds", type=float, default=2.0, help="timed duration")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    result = measure_throughput(
        n_members=args.ensemble,
        window=args.window,
        width_div=args.width_div,
        seconds=args.seconds,
        seed=args.seed,
    )
    json.dump(result, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
