"""Benchmark the compiled kernel core against the numpy fallback.

Times the three hot operations on fitter-shaped workloads and an end-to-end
EM fit.  Run:

    python benchmarks/bench_kernels.py [--threads N]

The fallback is forced by re-importing polymix with POLYMIX_BACKEND=numpy in
a subprocess, so both paths run the exact public code.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

WORKLOADS = [
    # label, n, C, D, ops (the density grid never materializes an n x C matrix)
    ("e-step n=2000 C=600 D=12", 2000, 600, 12,
     ("mixture_logpdf", "responsibilities", "weighted_sqdist")),
    ("e-step n=500 C=1000 D=12", 500, 1000, 12,
     ("mixture_logpdf", "responsibilities", "weighted_sqdist")),
    ("density grid n=50000 C=4000 D=2", 50_000, 4000, 2,
     ("mixture_logpdf",)),
]


def time_kernels():
    from polymix import kernels

    rng = np.random.default_rng(0)
    out = {"backend": kernels.BACKEND, "ops": {}}
    for label, n, C, D, ops in WORKLOADS:
        X = rng.standard_normal((n, D))
        means = rng.standard_normal((C, D))
        sigma2 = rng.uniform(0.05, 0.5, C)
        logw = np.log(np.full(C, 1.0 / C))
        timings = {}
        reps = 3
        for op in ops:
            if op == "weighted_sqdist":
                W = rng.uniform(size=(n, C))
                args = (X, means, W)
                # compare the compiled scalar loop against the BLAS form even
                # though production always dispatches to BLAS (it wins)
                fn = (kernels.weighted_sqdist_compiled
                      if kernels.using_compiled() else kernels.weighted_sqdist)
            else:
                args = (X, means, sigma2, logw)
                fn = getattr(kernels, op)
            fn(*args)  # warm up
            t0 = time.perf_counter()
            for _ in range(reps):
                fn(*args)
            timings[op] = (time.perf_counter() - t0) / reps
        out["ops"][label] = timings
    from polymix.em import EMConfig, fit_em
    from polymix.simulate import make_setting, simulate

    truth = make_setting(2, seed=1)
    data = simulate(truth, 1000, seed=1)
    t0 = time.perf_counter()
    fit_em(data, truth.K, truth.d, atoms_M=200,
           config=EMConfig(restarts=2), seed=1, alpha=truth.alpha)
    out["ops"]["fit_em setting2 n=1000"] = {"fit": time.perf_counter() - t0}
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--_emit-json", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    os.environ["POLYMIX_THREADS"] = str(args.threads)

    if args._emit_json:
        print(json.dumps(time_kernels()))
        return

    results = {}
    for backend in ("compiled", "numpy"):
        env = dict(os.environ)
        if backend == "numpy":
            env["POLYMIX_BACKEND"] = "numpy"
        else:
            env.pop("POLYMIX_BACKEND", None)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--_emit-json",
             "--threads", str(args.threads)],
            capture_output=True, text=True, env=env, check=True,
        )
        results[backend] = json.loads(proc.stdout)
        if results[backend]["backend"] != backend:
            print(f"note: requested {backend}, got {results[backend]['backend']} "
                  "(extension not built?)")

    print(f"\nthreads = {args.threads}")
    print(f"{'workload / op':52s} {'compiled':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label in results["numpy"]["ops"]:
        for op, t_np in results["numpy"]["ops"][label].items():
            t_c = results["compiled"]["ops"][label][op]
            print(f"{label + ' ' + op:52s} {t_c*1e3:9.1f}ms {t_np*1e3:9.1f}ms "
                  f"{t_np / t_c:7.2f}x")


if __name__ == "__main__":
    main()
