"""Timing of the solvers on growing inputs.

Two sweeps: parameterized telescoping on random towers (one Pi, optional x,
one Sigma) for d = 1..4 right-hand sides, and telescoping of nested harmonic
sums of growing depth m (each has a telescoper in its own tower).  Results go
to stdout as CSV.

    python3 scripts/benchmark.py [--instances 40] [--depth 4]
"""
import argparse
import csv
import os
import random
import statistics
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from oracles import random_element, random_tower  # noqa: E402

from ring_telescope.pt_solver import solve_pt  # noqa: E402
from ring_telescope.summation_api import telescope  # noqa: E402


def pt_sweep(instances, writer):
    for d in range(1, 5):
        times, dims = [], []
        for seed in range(instances):
            rng = random.Random(1000 * d + seed)
            T = random_tower(rng)
            fs = [random_element(rng, T) for _ in range(d)]
            t0 = time.perf_counter()
            B = solve_pt(fs, T)
            times.append(time.perf_counter() - t0)
            dims.append(len(B))
        writer.writerow(["pt", d, instances, f"{statistics.median(times):.4f}",
                         f"{max(times):.4f}", f"{statistics.mean(dims):.2f}"])


def nested_sum(depth):
    """H^{(depth)}: Sum(i1,1,k,1/i1*Sum(i2,1,i1,1/i2*...))."""
    names = [f"i{j}" for j in range(1, depth + 1)]
    body = "1"
    for j in reversed(range(depth)):
        upper = "k" if j == 0 else names[j - 1]
        body = f"Sum({names[j]},1,{upper},{body}/{names[j]})"
    return body


def depth_sweep(depth, writer):
    for m in range(1, depth + 1):
        summand = nested_sum(m)
        t0 = time.perf_counter()
        r = telescope(summand, "k", ())
        elapsed = time.perf_counter() - t0
        writer.writerow(["nested", m, 1, f"{elapsed:.4f}", f"{elapsed:.4f}", "1" if r else "0"])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=40)
    parser.add_argument("--depth", type=int, default=4)
    args = parser.parse_args()
    writer = csv.writer(sys.stdout)
    writer.writerow(["sweep", "size", "instances", "median_s", "max_s", "mean_dim_or_found"])
    pt_sweep(args.instances, writer)
    depth_sweep(args.depth, writer)


if __name__ == "__main__":
    main()
