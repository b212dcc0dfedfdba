"""Retriever configurations compared in the retriever ablation.

* ``Bm25Retriever``          lexical only
* ``SemanticOnlyRetriever``  scorer over a deep BM25 pool (no dense ANN index)
* ``RrfRetriever``           RRF of lexical and semantic rankings
* ``HierarchicalRetriever``  BM25 first stage, scorer rerank, cut to k
"""
from __future__ import annotations

import logging
import threading
from collections import Counter

from ..corpus import Corpus
from .bm25 import Bm25Params, InvertedIndex
from .fusion import rrf_fuse
from .rerank import RerankError, rerank
from .types import RankedHit, Retriever, Scorer

logger = logging.getLogger(__name__)

DEFAULT_FIRST_STAGE_DEPTH = 100


class Bm25Retriever:
    label = "bm25"

    def __init__(self, index: InvertedIndex, params: Bm25Params = Bm25Params()):
        self.index = index
        self.params = params

    def retrieve(self, query: str, k: int) -> list[RankedHit]:
        return self.index.search(query, k, self.params)


def hierarchical_retrieve(index: InvertedIndex, corpus: Corpus, query: str,
                          first_stage_depth: int, k: int, scorer: Scorer,
                          params: Bm25Params = Bm25Params()) -> list[RankedHit]:
    """BM25 top ``first_stage_depth``, reranked by ``scorer``, truncated to ``k``."""
    if k > first_stage_depth:
        raise ValueError(f"k={k} exceeds first_stage_depth={first_stage_depth}")
    pool = index.search(query, first_stage_depth, params)
    if not pool:
        return []
    reranked = rerank(query, pool, scorer, corpus, index.include_title)
    return [RankedHit(h.doc_id, h.score, h.rank) for h in reranked[:k]]


class HierarchicalRetriever:
    """Two-stage retriever.

    When the scorer fails the BM25 order is used instead (logged), unless
    ``strict`` is set, in which case :class:`RerankError` propagates.
    """

    label = "bm25+rerank"

    def __init__(self, index: InvertedIndex, corpus: Corpus, scorer: Scorer,
                 first_stage_depth: int = DEFAULT_FIRST_STAGE_DEPTH,
                 params: Bm25Params = Bm25Params(), strict: bool = False):
        self.index = index
        self.corpus = corpus
        self.scorer = scorer
        self.first_stage_depth = first_stage_depth
        self.params = params
        self.strict = strict

    def retrieve(self, query: str, k: int) -> list[RankedHit]:
        depth = max(self.first_stage_depth, k)
        try:
            return hierarchical_retrieve(self.index, self.corpus, query, depth, k,
                                         self.scorer, self.params)
        except RerankError as exc:
            if self.strict:
                raise
            logger.warning("rerank failed, using BM25 order: %s", exc)
            return exc.candidates[:k]


class SemanticOnlyRetriever(HierarchicalRetriever):
    """Scorer-only ranking, realised over a deep BM25 pool."""

    label = "semantic-over-bm25-pool"

    def __init__(self, index, corpus, scorer, pool_depth: int = 1000,
                 params: Bm25Params = Bm25Params(), strict: bool = False):
        super().__init__(index, corpus, scorer, pool_depth, params, strict)


class RrfRetriever:
    """Fuse BM25 and semantic rankings with reciprocal rank fusion."""

    label = "rrf-2"

    def __init__(self, lexical: Retriever, semantic: Retriever, k_rrf: int = 60,
                 depth: int = DEFAULT_FIRST_STAGE_DEPTH):
        self.lexical = lexical
        self.semantic = semantic
        self.k_rrf = k_rrf
        self.depth = depth

    def retrieve(self, query: str, k: int) -> list[RankedHit]:
        depth = max(self.depth, k)
        lists = [self.lexical.retrieve(query, depth), self.semantic.retrieve(query, depth)]
        return rrf_fuse(lists, self.k_rrf, limit=k)


class CountingRetriever:
    """Pass-through retriever that counts calls under a shared label."""

    def __init__(self, inner: Retriever, counter: Counter, key: str,
                 lock: threading.Lock | None = None):
        self.inner = inner
        self.counter = counter
        self.key = key
        self._lock = lock or threading.Lock()

    def retrieve(self, query: str, k: int) -> list[RankedHit]:
        with self._lock:
            self.counter[self.key] += 1
        return self.inner.retrieve(query, k)
