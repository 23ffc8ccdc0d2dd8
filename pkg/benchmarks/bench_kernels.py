"""Compare the numba kernels with their numpy fallbacks.

Two views:

* kernel micro-benchmarks, calling both implementations in this process
  (the JIT variants are compiled once before timing);
* stage timings (Nilsimsa digests of 2,000 ~1.5 kB texts, one logistic-regression
  fit on 2,000 documents) in fresh subprocesses with and without
  ``NEWSFLOW_NO_NUMBA=1``, so the switch is exercised the way users set it.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from newsflow import kernels
from newsflow._accel import USE_NUMBA

STAGE_SCRIPT = r"""
import json, time
from newsflow.corpus import labeled_docs
from newsflow.dedup import nilsimsa_digest
from newsflow.events import fit_text_model
docs = labeled_docs("layoffs", 2000, seed=0)
texts = [d["text"] for d in docs]
nilsimsa_digest(b"warm up the kernels")
t = time.perf_counter()
for text in texts:
    nilsimsa_digest((text * 3).encode("utf-8"))
codes = time.perf_counter() - t
t = time.perf_counter()
fit_text_model(texts, [d["label"] for d in docs], "layoffs")
fit = time.perf_counter() - t
print(json.dumps({"nilsimsa_2000_docs": codes, "logreg_fit_2000": fit}))
"""


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def micro(repeat):
    rng = np.random.default_rng(0)
    blob = rng.integers(32, 127, size=2048, dtype=np.uint8)
    n, d, nnz_row = 2000, 5000, 40
    indptr = np.arange(0, (n + 1) * nnz_row, nnz_row, dtype=np.int64)
    indices = rng.integers(0, d, size=n * nnz_row).astype(np.int64)
    data = rng.random(n * nnz_row)
    w, v = rng.normal(size=d), rng.normal(size=n)
    cases = {
        "nilsimsa accumulate, 2 kB": (
            lambda: kernels.nilsimsa_accumulate_jit(blob),
            lambda: kernels.nilsimsa_accumulate_numpy(blob)),
        "CSR X @ w, 2000x5000": (
            lambda: kernels.csr_matvec_jit(indptr, indices, data, w),
            lambda: kernels.csr_matvec_numpy(indptr, indices, data, w)),
        "CSR X.T @ v, 2000x5000": (
            lambda: kernels.csr_rmatvec_jit(indptr, indices, data, v, d),
            lambda: kernels.csr_rmatvec_numpy(indptr, indices, data, v, d)),
    }
    rows = []
    for name, (jit, ref) in cases.items():
        assert np.allclose(jit(), ref())  # also triggers compilation
        rows.append((name, best_of(jit, repeat), best_of(ref, repeat)))
    return rows


def stages():
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, NEWSFLOW_NO_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", STAGE_SCRIPT], env=env,
                              capture_output=True, text=True)
        if proc.returncode:
            sys.exit(f"stage run ({label}) failed:\n{proc.stderr}")
        out[label] = json.loads(proc.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20, help="timing repetitions (best is kept)")
    args = ap.parse_args(argv)
    if not USE_NUMBA:
        print("note: NEWSFLOW_NO_NUMBA is set, so the 'numba' column runs interpreted loops")
    print(f"{'kernel':32} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, jit, ref in micro(args.repeat):
        print(f"{name:32} {jit * 1e3:10.3f} {ref * 1e3:10.3f} {ref / jit:8.1f}x")
    print()
    res = stages()
    print(f"{'stage':32} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for key in res["numba"]:
        a, b = res["numba"][key], res["numpy"][key]
        print(f"{key:32} {a:10.3f} {b:10.3f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
