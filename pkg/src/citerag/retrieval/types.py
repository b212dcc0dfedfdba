from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence


@dataclass(frozen=True)
class RankedHit:
    doc_id: str
    score: float
    rank: int


def rank_hits(scored: Iterable[tuple[str, float]], limit: int | None = None) -> list[RankedHit]:
    """Order ``(doc_id, score)`` pairs by descending score, ties by ascending doc_id."""
    ordered = sorted(scored, key=lambda p: (-p[1], p[0]))
    if limit is not None:
        ordered = ordered[:limit]
    return [RankedHit(doc_id, float(score), i) for i, (doc_id, score) in enumerate(ordered, 1)]


class Retriever(Protocol):
    def retrieve(self, query: str, k: int) -> list[RankedHit]: ...


class Scorer(Protocol):
    """Relevance scorer used for reranking. One score per candidate, same order."""

    def score(self, query: str, passages: Sequence[tuple[str, str]]) -> list[float]: ...
