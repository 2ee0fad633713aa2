"""Benchmark the compiled lattice kernels against the numpy fallback.

Runs the production-sized workload (T=128 positions, L=37 labels) through
log-partition, full NLL gradients, and Viterbi on both backends and
prints per-call times plus the speedup.

Usage: python benchmarks/bench_crf.py [--repeats 50]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clintag import _crf_numpy

try:
    from clintag import _crf_cy
except ImportError:
    _crf_cy = None

T, L = 128, 37


def make_instance(seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    return (
        np.ascontiguousarray(rng.normal(size=(T, L))),
        np.ascontiguousarray(rng.normal(size=(L, L))),
        np.ascontiguousarray(rng.normal(size=L)),
        np.ascontiguousarray(rng.normal(size=L)),
    )


def nll_pipeline(kernels, emissions, trans, start, end):
    alphas = kernels.forward_alphas(emissions, trans, start)
    betas = kernels.backward_betas(emissions, trans, end)
    log_z = kernels.log_partition_from_alphas(alphas, end)
    kernels.transition_expectations(emissions, trans, alphas, betas, log_z)
    return log_z


WORKLOADS = {
    "log_partition": lambda k, e, t, s, z: k.log_partition_from_alphas(
        k.forward_alphas(e, t, s), z
    ),
    "nll_gradients": nll_pipeline,
    "viterbi": lambda k, e, t, s, z: k.viterbi_path(e, t, s, z),
}


def time_backend(kernels, workload, instances, repeats: int) -> float:
    fn = WORKLOADS[workload]
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        for emissions, trans, start, end in instances:
            fn(kernels, emissions, trans, start, end)
        best = min(best, (time.perf_counter() - started) / len(instances))
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--instances", type=int, default=10)
    args = parser.parse_args()

    instances = [make_instance(seed) for seed in range(args.instances)]

    # Agreement check before timing anything.
    for emissions, trans, start, end in instances:
        z_np = nll_pipeline(_crf_numpy, emissions, trans, start, end)
        if _crf_cy is not None:
            z_cy = nll_pipeline(_crf_cy, emissions, trans, start, end)
            assert abs(z_np - z_cy) < 1e-10, "backends disagree"

    print(f"workload: T={T}, L={L}, {args.instances} instances, best of {args.repeats}")
    print(f"{'kernel':<16} {'numpy':>12} {'cython':>12} {'speedup':>9}")
    for workload in WORKLOADS:
        numpy_time = time_backend(_crf_numpy, workload, instances, args.repeats)
        if _crf_cy is None:
            print(f"{workload:<16} {numpy_time * 1e6:>10.1f}us {'n/a':>12} {'n/a':>9}")
            continue
        cython_time = time_backend(_crf_cy, workload, instances, args.repeats)
        print(
            f"{workload:<16} {numpy_time * 1e6:>10.1f}us {cython_time * 1e6:>10.1f}us "
            f"{numpy_time / cython_time:>8.1f}x"
        )
    if _crf_cy is None:
        print("compiled extension not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
