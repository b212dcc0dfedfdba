"""Semantic reranking behind a pluggable scorer.

Two scorers ship here: a remote cross-encoder reached over HTTP, and a
deterministic token-overlap scorer used when no model server is around.
"""
from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import httpx

from ..corpus import Corpus
from ..text import tokenize
from .bm25 import document_text
from .types import RankedHit, Scorer, rank_hits

logger = logging.getLogger(__name__)


class ScorerError(Exception):
    pass


class RerankError(Exception):
    """Scorer failed. ``candidates`` is the untouched input list for fallback."""

    def __init__(self, message: str, candidates: list[RankedHit]):
        super().__init__(message)
        self.candidates = candidates


class LexicalOverlapScorer:
    """Jaccard overlap of query and passage token sets."""

    def __init__(self, stem: bool = False):
        self.stem = stem

    def score(self, query: str, passages: Sequence[tuple[str, str]]) -> list[float]:
        q = set(tokenize(query, self.stem))
        out = []
        for _, text in passages:
            p = set(tokenize(text, self.stem))
            union = q | p
            out.append(len(q & p) / len(union) if union else 0.0)
        return out


class CallableScorer:
    """Wrap ``fn(query, passages) -> scores``."""

    def __init__(self, fn: Callable[[str, Sequence[tuple[str, str]]], list[float]]):
        self.fn = fn

    def score(self, query, passages):
        return list(self.fn(query, passages))


class HttpCrossEncoderScorer:
    """Client for a cross-encoder server.

    Each batch is sent as ``POST {"query": str, "passages": [str, ...]}`` and
    must answer ``{"scores": [float, ...]}`` with one score per passage.
    Batches run concurrently up to ``max_concurrency``. When ``log_path`` is
    set every request/response pair is appended there as one JSON line.
    """

    def __init__(self, url: str, batch_size: int = 32, max_concurrency: int = 4,
                 timeout: float = 30.0, log_path: str | Path | None = None,
                 client: httpx.Client | None = None):
        self.url = url
        self.batch_size = batch_size
        self.max_concurrency = max_concurrency
        self._client = client or httpx.Client(timeout=timeout)
        self._log_path = Path(log_path) if log_path else None
        self._log_lock = threading.Lock()

    def _post(self, query: str, texts: list[str]) -> list[float]:
        payload = {"query": query, "passages": texts}
        try:
            resp = self._client.post(self.url, json=payload)
            resp.raise_for_status()
            scores = resp.json()["scores"]
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
            raise ScorerError(f"rerank endpoint {self.url} failed: {exc}") from exc
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise ScorerError(f"rerank endpoint returned {scores!r} for {len(texts)} passages")
        try:
            scores = [float(s) for s in scores]
        except (TypeError, ValueError) as exc:
            raise ScorerError(f"non-numeric rerank score: {exc}") from exc
        if self._log_path is not None:
            line = json.dumps({"request": payload, "response": {"scores": scores}},
                              ensure_ascii=False)
            with self._log_lock, open(self._log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return scores

    def score(self, query: str, passages: Sequence[tuple[str, str]]) -> list[float]:
        texts = [text for _, text in passages]
        batches = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(batches) <= 1 or self.max_concurrency <= 1:
            results = [self._post(query, b) for b in batches]
        else:
            with ThreadPoolExecutor(min(self.max_concurrency, len(batches))) as pool:
                results = list(pool.map(lambda b: self._post(query, b), batches))
        return [s for batch in results for s in batch]


class ReplayScorer:
    """Serve scores from a log written by :class:`HttpCrossEncoderScorer`."""

    def __init__(self, log_path: str | Path):
        self._table: dict[str, list[float]] = {}
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                self._table[self._key(rec["request"]["query"], rec["request"]["passages"])] = \
                    rec["response"]["scores"]
        self.batch_size = None

    @staticmethod
    def _key(query: str, texts: list[str]) -> str:
        return json.dumps([query, texts], ensure_ascii=False)

    def score(self, query, passages):
        texts = [t for _, t in passages]
        try:
            return list(self._table[self._key(query, texts)])
        except KeyError:
            raise ScorerError("rerank replay miss") from None


def rerank(query: str, candidates: list[RankedHit], scorer: Scorer, corpus: Corpus,
           include_title: bool = True) -> list[RankedHit]:
    """Reorder ``candidates`` by scorer score, descending, ties by doc_id."""
    if not candidates:
        raise ValueError("rerank needs at least one candidate")
    passages = [(h.doc_id, document_text(corpus.get_document(h.doc_id), include_title))
                for h in candidates]
    try:
        scores = scorer.score(query, passages)
    except Exception as exc:
        raise RerankError(str(exc), list(candidates)) from exc
    if len(scores) != len(candidates):
        raise RerankError(f"scorer returned {len(scores)} scores for {len(candidates)} "
                          "candidates", list(candidates))
    return rank_hits(zip((h.doc_id for h in candidates), scores))
