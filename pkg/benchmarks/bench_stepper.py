#!/usr/bin/env python3
"""Benchmark the step kernel: compiled extension vs pure-Python fallback.

Runs the per-step simulation loop (control, stage cost, plant step,
rank-one design update) on the shipped benchmark scenario without episode
boundaries, and reports steps/second for every available backend.

Usage: python benchmarks/bench_stepper.py [--steps N]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from certlq.config import load_config
from certlq.kernel import available_backends
from certlq.riccati import solve_gare


def make_workload(steps: int):
    cfg = load_config("example")
    spec = cfg.spec
    sol = solve_gare(spec.truth, spec.cost, cfg.solver)
    rng = np.random.default_rng(0)
    n, m1, m2 = spec.dims.n, spec.dims.m1, spec.dims.m2
    d = spec.dims.d
    s = steps**-0.5
    return dict(
        x=np.array(spec.x0),
        V=np.eye(d),
        S=np.zeros((n, d)),
        chol=np.eye(d),
        logdet=0.0,
        A=spec.truth.A,
        B1=spec.truth.B1,
        B2=spec.truth.B2,
        K=sol.K,
        L=sol.L,
        Q=spec.cost.Q,
        Ru=spec.cost.Ru,
        Rv=spec.cost.Rv,
        w=0.01 * rng.standard_normal((steps, n)),
        eta=math.sqrt(s) * rng.standard_normal((steps, m1)),
        zeta=math.sqrt(s) * rng.standard_normal((steps, m2)),
        steps=steps,
    )


def bench(step_chunk, wl) -> tuple[float, float]:
    x = wl["x"].copy()
    V = wl["V"].copy()
    S = wl["S"].copy()
    chol = wl["chol"].copy()
    cost = np.zeros(wl["steps"])
    xnorm = np.zeros(wl["steps"])
    t0 = time.perf_counter()
    # logdet_start far above reach: pure stepping, no episode triggers
    steps, status, logdet = step_chunk(
        x, V, S, chol, wl["logdet"], 1e308,
        wl["A"], wl["B1"], wl["B2"], wl["K"], wl["L"], wl["Q"], wl["Ru"], wl["Rv"],
        wl["w"], wl["eta"], wl["zeta"], 0, wl["steps"], 1e12, cost, xnorm,
    )
    elapsed = time.perf_counter() - t0
    assert steps == wl["steps"] and status == 0
    return elapsed, float(cost.sum())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200_000)
    args = ap.parse_args()

    wl = make_workload(args.steps)
    backends = available_backends()
    results = {}
    for name, fn in backends.items():
        elapsed, checksum = bench(fn, wl)
        results[name] = (elapsed, checksum)
        print(f"{name:>9}: {args.steps / elapsed:>12,.0f} steps/s "
              f"({elapsed:.3f} s for {args.steps:,} steps)")
    if len(results) == 2:
        checks = {round(c, 9) for _, c in results.values()}
        assert len(checks) == 1, "backends disagree on the cost checksum"
        speedup = results["python"][0] / results["compiled"][0]
        print(f"speedup (compiled vs python): {speedup:.1f}x  "
              f"[identical cost checksum {results['python'][1]:.6f}]")
    else:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
