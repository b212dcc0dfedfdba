"""Time the numba and pure-numpy kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--docs 20000] [--queries 200]

Each variant is called directly (the env flag only picks the default), so
one process measures both. The numba variant is warmed up before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from citerag import kernels
from citerag._accel import USE_NUMBA


def synthetic_index(rng, n_docs, n_terms, avg_df):
    offsets = [0]
    docs, tfs = [], []
    for _ in range(n_terms):
        df = max(1, min(n_docs, int(rng.exponential(avg_df))))
        docs.append(np.sort(rng.choice(n_docs, size=df, replace=False)))
        tfs.append(rng.integers(1, 6, size=df).astype(np.float64))
        offsets.append(offsets[-1] + df)
    post_docs = np.concatenate(docs).astype(np.int64)
    post_tfs = np.concatenate(tfs)
    df = np.diff(offsets)
    idf = np.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
    doc_len = rng.integers(50, 400, size=n_docs).astype(np.float64)
    return np.asarray(offsets, dtype=np.int64), post_docs, post_tfs, idf, doc_len


def timed(fn, calls):
    t0 = time.perf_counter()
    for args in calls:
        fn(*args)
    return time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=20000)
    ap.add_argument("--terms", type=int, default=5000)
    ap.add_argument("--avg-df", type=float, default=200.0)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--lcs-pairs", type=int, default=300)
    ap.add_argument("--lcs-len", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    offsets, post_docs, post_tfs, idf, doc_len = synthetic_index(
        rng, args.docs, args.terms, args.avg_df)
    avgdl = float(doc_len.mean())
    bm25_calls = [(rng.integers(0, args.terms, size=int(rng.integers(3, 12))).astype(np.int64),
                   offsets, post_docs, post_tfs, idf, doc_len, avgdl, 0.9, 0.4, args.docs)
                  for _ in range(args.queries)]
    lcs_calls = [(rng.integers(0, 50, size=args.lcs_len).astype(np.int64),
                  rng.integers(0, 50, size=args.lcs_len).astype(np.int64))
                 for _ in range(args.lcs_pairs)]

    kernels._bm25_accumulate_jit(*bm25_calls[0])
    kernels._lcs_length_jit(*lcs_calls[0])
    s1, _ = kernels._bm25_accumulate_jit(*bm25_calls[0])
    s2, _ = kernels._bm25_accumulate_numpy(*bm25_calls[0])
    assert np.allclose(s1, s2, rtol=0, atol=1e-9)

    print(f"numba active by default: {USE_NUMBA}")
    print(f"{'kernel':<16}{'numba s':>10}{'numpy s':>10}{'speedup':>10}")
    for name, jit, ref, calls in (
            ("bm25_accumulate", kernels._bm25_accumulate_jit, kernels._bm25_accumulate_numpy,
             bm25_calls),
            ("lcs_length", kernels._lcs_length_jit, kernels._lcs_length_numpy, lcs_calls)):
        t_jit, t_np = timed(jit, calls), timed(ref, calls)
        print(f"{name:<16}{t_jit:>10.3f}{t_np:>10.3f}{t_np / t_jit:>9.1f}x")


if __name__ == "__main__":
    main()
