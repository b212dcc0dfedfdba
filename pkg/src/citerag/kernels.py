"""Hot numeric loops: BM25 accumulation over postings and token LCS.

Each kernel exists twice, a numba loop version and a vectorised numpy
version. ``bm25_accumulate`` and ``lcs_length`` dispatch on
:data:`citerag._accel.USE_NUMBA`; both variants are importable directly so
tests and the benchmark can compare them.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


@njit
def _bm25_accumulate_jit(term_ids, term_offsets, post_docs, post_tfs, idf, doc_len,
                         avgdl, k1, b, n_docs):
    scores = np.zeros(n_docs, dtype=np.float64)
    hits = np.zeros(n_docs, dtype=np.bool_)
    for q in range(term_ids.shape[0]):
        t = term_ids[q]
        w = idf[t]
        for p in range(term_offsets[t], term_offsets[t + 1]):
            d = post_docs[p]
            tf = post_tfs[p]
            norm = k1 * (1.0 - b + b * doc_len[d] / avgdl)
            scores[d] += w * tf * (k1 + 1.0) / (tf + norm)
            hits[d] = True
    return scores, hits


def _bm25_accumulate_numpy(term_ids, term_offsets, post_docs, post_tfs, idf, doc_len,
                           avgdl, k1, b, n_docs):
    scores = np.zeros(n_docs, dtype=np.float64)
    hits = np.zeros(n_docs, dtype=np.bool_)
    for t in term_ids:
        lo, hi = term_offsets[t], term_offsets[t + 1]
        docs = post_docs[lo:hi]
        tf = post_tfs[lo:hi]
        norm = k1 * (1.0 - b + b * doc_len[docs] / avgdl)
        # doc ids are unique inside one postings list, so fancy += is safe
        scores[docs] += idf[t] * tf * (k1 + 1.0) / (tf + norm)
        hits[docs] = True
    return scores, hits


@njit
def _lcs_length_jit(a, b):
    n = b.shape[0]
    prev = np.zeros(n + 1, dtype=np.int64)
    cur = np.zeros(n + 1, dtype=np.int64)
    for i in range(a.shape[0]):
        ai = a[i]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[n]


def _lcs_length_numpy(a, b):
    n = b.shape[0]
    prev = np.zeros(n + 1, dtype=np.int64)
    for ai in a:
        # cur[j] = max(cur[j-1], prev[j], prev[j-1] + match); the cur[j-1]
        # term is a running maximum, so one accumulate finishes the row
        cand = np.maximum(prev[1:], prev[:-1] + (b == ai))
        prev = np.concatenate(([0], np.maximum.accumulate(cand)))
    return int(prev[n])


def bm25_accumulate(term_ids, term_offsets, post_docs, post_tfs, idf, doc_len,
                    avgdl, k1, b, n_docs):
    """Sum BM25 term contributions for the query terms ``term_ids``.

    Returns ``(scores, hits)``; ``hits[d]`` is true when document ``d``
    matched at least one query term.
    """
    fn = _bm25_accumulate_jit if USE_NUMBA else _bm25_accumulate_numpy
    return fn(np.asarray(term_ids, dtype=np.int64), term_offsets, post_docs, post_tfs,
              idf, doc_len, float(avgdl), float(k1), float(b), int(n_docs))


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two integer arrays."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return 0
    if USE_NUMBA:
        return int(_lcs_length_jit(a, b))
    return _lcs_length_numpy(a, b)
