from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from .types import RankedHit, rank_hits


def rrf_fuse(rankings: Sequence[Sequence[RankedHit]], k_rrf: int = 60,
             limit: int | None = None) -> list[RankedHit]:
    """Reciprocal rank fusion: score(d) = sum over lists of 1 / (k_rrf + rank)."""
    if not rankings:
        raise ValueError("rrf_fuse needs at least one ranking")
    if k_rrf < 1:
        raise ValueError(f"k_rrf must be positive, got {k_rrf}")
    fused: dict[str, float] = defaultdict(float)
    for ranking in rankings:
        for hit in ranking:
            fused[hit.doc_id] += 1.0 / (k_rrf + hit.rank)
    return rank_hits(fused.items(), limit)
