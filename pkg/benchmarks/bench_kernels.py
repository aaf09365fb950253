"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both implementations are imported directly, so ``BAFORMER_NUMBA`` has no
effect here.  The first numba call of each kernel is made before timing
starts so compilation is excluded.
"""

import argparse
import timeit

import numpy as np

from baformer.kernels import _numba, _numpy


def cases(rng):
    T, M, K = 2000, 20, 10
    pm = rng.random((M, T))
    cuts = np.sort(rng.choice(np.arange(1, T), 60, replace=False))
    starts = np.concatenate([[0], cuts]).astype(np.int64)
    ends = np.concatenate([cuts, [T]]).astype(np.int64)
    labels = rng.integers(0, K, T).astype(np.int64)
    pb = rng.random(T)
    a = rng.integers(0, 5, 300).astype(np.int64)
    b = rng.integers(0, 5, 300).astype(np.int64)
    seg = (rng.integers(0, K, 61).astype(np.int64), starts + 1, ends)
    gseg = (rng.integers(0, K, 61).astype(np.int64), starts + 1, ends)
    return {
        "hungarian 20x20": ("hungarian", (rng.random((20, 20)),)),
        "hungarian 20x60": ("hungarian", (rng.random((20, 60)),)),
        "levenshtein 300x300": ("levenshtein", (a, b)),
        "span_winners M=20 T=2000": ("span_winners", (pm, starts, ends)),
        "span_majority T=2000": ("span_majority", (labels, starts, ends, K)),
        "peak_indices T=2000": ("peak_indices", (pb, 0.0)),
        "nms_indices T=2000": ("nms_indices", (pb, 8, 0.05)),
        "f1_counts 61 segments": ("f1_counts", (*seg, *gseg, 0.5)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numba (us)':>12}{'numpy (us)':>12}{'speedup':>9}")
    for label, (name, call_args) in cases(rng).items():
        fast, slow = getattr(_numba, name), getattr(_numpy, name)
        fast(*call_args)
        times = []
        for fn in (fast, slow):
            best = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
            times.append(best * 1e6)
        print(f"{label:<28}{times[0]:>12.1f}{times[1]:>12.1f}{times[1] / times[0]:>8.1f}x")


if __name__ == "__main__":
    main()
