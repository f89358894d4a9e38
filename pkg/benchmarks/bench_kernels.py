"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Sizes cover the desk-scale defaults (batch 64, queue 512) and the paper-scale
profile (batch 256, queue 4096 with 20% hard negatives; kNN over 10k points).
"""

import argparse
import timeit

import numpy as np

from mohn import kernels
from mohn.memory_bank import hard_negative_count


def cases(rng):
    for batch, queue in ((64, 512), (256, 4096)):
        sims = rng.uniform(-1, 1, (batch, queue))
        f_n = hard_negative_count(0.2, queue)
        yield f"select_smallest  B={batch:<4} K={queue:<5} F_N={f_n}", "select_smallest", (sims, f_n)
        logits = rng.standard_normal((batch, queue + 1)) * 5
        yield f"softmax_xent     B={batch:<4} M={queue + 1}", "softmax_xent_rows", (logits,)
    sims = rng.uniform(-1, 1, (500, 10_000))
    labels = rng.integers(0, 10, 10_000)
    yield "knn_vote         Q=500  N=10000 k=200", "knn_vote", (sims, labels, 200, 0.1, 10)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    names = [b.NAME for b in backends]
    print(f"{'kernel':<40}" + "".join(f"{n + ' (ms)':>16}" for n in names)
          + ("   speedup" if len(backends) > 1 else ""))
    for label, fn, fargs in cases(rng):
        times = []
        for b in backends:
            f = getattr(b, fn)
            f(*fargs)
            t = min(timeit.repeat(lambda: f(*fargs), number=1, repeat=args.repeat))
            times.append(t * 1e3)
        line = f"{label:<40}" + "".join(f"{t:>16.3f}" for t in times)
        if len(times) > 1:
            line += f"   {times[0] / times[1]:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
