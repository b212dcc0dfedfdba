"""Cited answers to biomedical yes/no questions over a trusted abstract corpus."""
from .answer import (CitedAnswer, CitedStatement, PolarAnswer, Statement, extract_polar_answer,
                     parse_inline_citations, segment_statements)
from .corpus import Corpus, CorpusStats, Document, DocumentNotFound, ingest_documents
from .pipeline import (CitationPipeline, GenerationMode, PipelineConfig, SeekStrategy, merge_dedup,
                       preset_config)

__version__ = "0.1.0"

__all__ = [
    "CitationPipeline", "CitedAnswer", "CitedStatement", "Corpus", "CorpusStats", "Document",
    "DocumentNotFound", "GenerationMode", "PipelineConfig", "PolarAnswer", "SeekStrategy",
    "Statement", "extract_polar_answer", "ingest_documents", "merge_dedup",
    "parse_inline_citations", "preset_config", "segment_statements",
]
