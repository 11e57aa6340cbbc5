"""Compare the compiled and pure-Python bivariate fit backends.

Runs the per-covariate nine-parameter fits over a simulated trial fold with
each backend (in separate processes, so the import-time backend selection is
honest) and reports per-fit timings plus the largest coefficient
disagreement.  Usage::

    python3 benchmarks/benchmark_backends.py [--n 400] [--covariates 100]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

import numpy as np

WORKER = """
import json, sys, time
import numpy as np
from sigtrial._backend import backend_name
from sigtrial.bivglm import fit_covariate_matrix

args = json.loads(sys.argv[1])
rng = np.random.default_rng(args["seed"])
n, j = args["n"], args["covariates"]
t = rng.integers(0, 2, n)
X = rng.normal(0.0, 1.0, (n, j))
eta1 = -1.1 + 0.9 * t * X[:, 0]
eta2 = -1.1 + 0.6 * t * X[:, 1] + 0.3 * X[:, 0]
y1 = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta1))).astype(np.int64)
y2 = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta2))).astype(np.int64)

fit_covariate_matrix(X[:, :2], t, y1, y2)  # warm-up
best = float("inf")
for _ in range(args["repeats"]):
    t0 = time.perf_counter()
    betas = fit_covariate_matrix(X, t, y1, y2)
    best = min(best, time.perf_counter() - t0)
np.save(args["out"], betas)
print(json.dumps({"backend": backend_name(), "seconds": best}))
"""


def run_backend(force_python, args, out):
    env = dict(os.environ)
    env.pop("SIGTRIAL_BACKEND", None)
    if force_python:
        env["SIGTRIAL_BACKEND"] = "python"
    payload = {"n": args.n, "covariates": args.covariates,
               "repeats": args.repeats, "seed": args.seed, "out": out}
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, json.dumps(payload)],
        env=env, capture_output=True, text=True, check=True,
    )
    info = json.loads(proc.stdout)
    return info["backend"], info["seconds"], np.load(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--covariates", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=20260826)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        results = {}
        for force in (False, True):
            out = os.path.join(tmp, f"betas_{int(force)}.npy")
            name, secs, betas = run_backend(force, args, out)
            results[name] = (secs, betas)
            print(f"{name:>10}: {secs:8.3f} s total, "
                  f"{secs / args.covariates * 1000:7.3f} ms/fit")

    if len(results) == 2:
        (fast, (tf, bf)), (slow, (ts, bs)) = sorted(
            results.items(), key=lambda kv: kv[1][0]
        )
        print(f"max |coef| disagreement: {np.max(np.abs(bf - bs)):.3e}")
        print(f"speedup ({fast} over {slow}): {ts / tf:.1f}x")
    else:
        print("compiled backend unavailable; only the python backend was timed")


if __name__ == "__main__":
    main()
