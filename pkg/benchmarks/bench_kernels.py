"""Compare the compiled likelihood kernel against the numpy fallback.

Usage:
    PYTHONPATH=src python3 benchmarks/bench_kernels.py [--actors N]
        [--events M] [--repeats K]

Builds one synthetic model dataset, then times `cox_expected_pass` at the
three accumulation levels (value / gradient / Hessian) on every available
backend. The two backends implement the same contract; results agree to
roundoff (asserted here as a guard against benchmarking different math).
"""

import argparse
import time

import numpy as np

from remfrail._kernels import available_backends
from remfrail.likelihood import Parameters, eta_table
from remfrail.model_data import RiskPolicy, build_model_data
from remfrail.simulate import SimulationConfig, simulate
from remfrail.strata import TriadicKind

WANT_NAMES = {0: "value", 1: "gradient", 2: "hessian"}


def build_case(n_actors: int, n_events: int, seed: int = 0):
    config = SimulationConfig(n_actors, n_events, 0.9, 1.3, seed=seed)
    history, _ = simulate(config)
    data = build_model_data(history, TriadicKind.TRANSITIVE, RiskPolicy.full())
    rng = np.random.default_rng(seed)
    params = Parameters(np.empty(0), rng.normal(0, 0.7, n_actors),
                        rng.normal(0, 0.7, n_actors))
    return data, eta_table(data, params)


def time_backend(module, data, eta, want: int, repeats: int) -> float:
    args = (data.indptr, data.risk_dyads, data.event_dyads, data.n_actors,
            eta, None, want)
    module.cox_expected_pass(*args)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        module.cox_expected_pass(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--actors", type=int, default=50)
    parser.add_argument("--events", type=int, default=3000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    data, eta = build_case(args.actors, args.events)
    nnz = len(data.risk_dyads)
    print(f"case: {args.actors} actors, {args.events} events, "
          f"{nnz:,} risk-set entries\n")

    backends = available_backends()
    if "cython" in backends and "numpy" in backends:
        a = backends["cython"].cox_expected_pass(
            data.indptr, data.risk_dyads, data.event_dyads, data.n_actors,
            eta, None, 2)
        b = backends["numpy"].cox_expected_pass(
            data.indptr, data.risk_dyads, data.event_dyads, data.n_actors,
            eta, None, 2)
        np.testing.assert_allclose(a.logdenos, b.logdenos, rtol=1e-12)
        np.testing.assert_allclose(a.M, b.M, rtol=1e-10, atol=1e-14)
        print("backend agreement check: ok\n")

    header = f"{'backend':<8} {'pass':<9} {'best time':>12} {'entries/s':>14}"
    print(header)
    print("-" * len(header))
    timings: dict[tuple[str, int], float] = {}
    for name, module in sorted(backends.items()):
        for want in (0, 1, 2):
            seconds = time_backend(module, data, eta, want, args.repeats)
            timings[(name, want)] = seconds
            print(f"{name:<8} {WANT_NAMES[want]:<9} {seconds * 1e3:>10.2f}ms "
                  f"{nnz / seconds:>14.3g}")
    if ("cython", 2) in timings and ("numpy", 2) in timings:
        ratio = timings[("numpy", 2)] / timings[("cython", 2)]
        print(f"\ncompiled speedup on the hessian pass: {ratio:.1f}x")


if __name__ == "__main__":
    main()
