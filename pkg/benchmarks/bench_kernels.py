"""Time the compiled detection kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--pairs 2000000] [--repeats 5]

Both backends receive the same pre-drawn uniforms, so the comparison also
checks that their tallies agree exactly.
"""

import argparse
import time

import numpy as np

from homscope import _kernels_py
from homscope.detectors import DetectorBank

try:
    from homscope._ext import detect as _compiled
except ImportError:
    _compiled = None


def best_time(func, args, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        result = func(*args)
        times.append(time.perf_counter() - start)
    return min(times), result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    bank = DetectorBank(tuple(rng.uniform(0.3, 1.0, 8)))
    codes = rng.integers(0, 4, args.pairs).astype(np.int8)
    uniforms = rng.random((args.pairs, 6))
    kernel_args = (
        codes, uniforms, np.array([0.9, 0.8]), bank.cumulative_ratios,
        np.asarray(bank.efficiencies),
    )

    t_py, ref = best_time(_kernels_py.detect_pairs, kernel_args, args.repeats)
    print(f"numpy    {t_py * 1e3:9.2f} ms  {args.pairs / t_py / 1e6:7.2f} Mpairs/s")
    if _compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return
    t_c, got = best_time(_compiled.detect_pairs, kernel_args, args.repeats)
    same = all(np.array_equal(a, b) for a, b in zip(ref, got))
    print(f"cython   {t_c * 1e3:9.2f} ms  {args.pairs / t_c / 1e6:7.2f} Mpairs/s")
    print(f"speedup  {t_py / t_c:9.2f}x   identical tallies: {same}")


if __name__ == "__main__":
    main()
