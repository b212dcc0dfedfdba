from .bm25 import Bm25Params, IndexBuildError, InvertedIndex, bm25_search, build_index, document_text
from .fusion import rrf_fuse
from .rerank import (CallableScorer, HttpCrossEncoderScorer, LexicalOverlapScorer, RerankError,
                     ReplayScorer, ScorerError, rerank)
from .retrievers import (Bm25Retriever, CountingRetriever, HierarchicalRetriever, RrfRetriever,
                         SemanticOnlyRetriever, hierarchical_retrieve)
from .types import RankedHit, Retriever, Scorer, rank_hits

__all__ = [
    "Bm25Params", "Bm25Retriever", "CallableScorer", "CountingRetriever", "HierarchicalRetriever",
    "HttpCrossEncoderScorer", "IndexBuildError", "InvertedIndex", "LexicalOverlapScorer",
    "RankedHit", "RerankError", "ReplayScorer", "Retriever", "RrfRetriever", "Scorer",
    "ScorerError", "SemanticOnlyRetriever", "bm25_search", "build_index", "document_text",
    "hierarchical_retrieve", "rank_hits", "rerank", "rrf_fuse",
]
