"""Okapi BM25 over a compressed inverted index.

Score of document ``d`` for query tokens ``q_1..q_m`` (repeats included)::

    sum_i idf(q_i) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)
"""
from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..corpus import Document
from ..kernels import bm25_accumulate
from ..text import tokenize
from .types import RankedHit

META_FILE = "meta.json"
VOCAB_FILE = "vocab.json"
DOC_IDS_FILE = "doc_ids.json"
_ARRAYS = ("term_offsets", "post_docs", "post_tfs", "doc_len")


class IndexBuildError(Exception):
    """Raised for unusable indices (empty corpus, missing files)."""


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


def document_text(doc: Document, include_title: bool = True) -> str:
    """Text that is indexed and shown to rerankers for ``doc``."""
    if include_title and doc.title:
        return doc.title + " " + doc.abstract_text
    return doc.abstract_text


class InvertedIndex:
    def __init__(self, vocab: list[str], doc_ids: list[str], term_offsets: np.ndarray,
                 post_docs: np.ndarray, post_tfs: np.ndarray, doc_len: np.ndarray,
                 include_title: bool = True, stem: bool = False):
        self.vocab = vocab
        self.term_index = {t: i for i, t in enumerate(vocab)}
        self.doc_ids = doc_ids
        self.term_offsets = term_offsets
        self.post_docs = post_docs
        self.post_tfs = post_tfs
        self.doc_len = doc_len
        self.include_title = include_title
        self.stem = stem
        self.n_docs = len(doc_ids)
        self.avgdl = float(doc_len.mean()) if self.n_docs else 0.0
        df = np.diff(term_offsets).astype(np.float64)
        self.idf = np.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)
        # position of each doc in ascending doc_id order, for tie-breaks
        order = sorted(range(self.n_docs), key=doc_ids.__getitem__)
        self._id_rank = np.empty(self.n_docs, dtype=np.int64)
        self._id_rank[order] = np.arange(self.n_docs)

    @classmethod
    def build(cls, documents: Iterable[Document], include_title: bool = True,
              stem: bool = False) -> "InvertedIndex":
        doc_ids: list[str] = []
        lengths: list[int] = []
        postings: dict[str, list[tuple[int, int]]] = {}
        for d, doc in enumerate(documents):
            tokens = tokenize(document_text(doc, include_title), stem=stem)
            doc_ids.append(doc.doc_id)
            lengths.append(len(tokens))
            for term, tf in Counter(tokens).items():
                postings.setdefault(term, []).append((d, tf))
        if not doc_ids:
            raise IndexBuildError("cannot index a corpus with zero documents")

        vocab = sorted(postings)
        offsets = np.zeros(len(vocab) + 1, dtype=np.int64)
        for i, term in enumerate(vocab):
            offsets[i + 1] = offsets[i] + len(postings[term])
        post_docs = np.empty(offsets[-1], dtype=np.int64)
        post_tfs = np.empty(offsets[-1], dtype=np.float64)
        for i, term in enumerate(vocab):
            plist = postings[term]
            post_docs[offsets[i]:offsets[i + 1]] = [p[0] for p in plist]
            post_tfs[offsets[i]:offsets[i + 1]] = [p[1] for p in plist]
        return cls(vocab, doc_ids, offsets, post_docs, post_tfs,
                   np.asarray(lengths, dtype=np.float64), include_title, stem)

    def save(self, index_dir: str | os.PathLike) -> None:
        path = Path(index_dir)
        path.mkdir(parents=True, exist_ok=True)
        meta = {
            "format": 1,
            "document_count": self.n_docs,
            "avgdl": self.avgdl,
            "include_title": self.include_title,
            "stem": self.stem,
        }
        (path / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
        (path / VOCAB_FILE).write_text(json.dumps(self.vocab, ensure_ascii=False),
                                       encoding="utf-8")
        (path / DOC_IDS_FILE).write_text(json.dumps(self.doc_ids, ensure_ascii=False),
                                         encoding="utf-8")
        for name in _ARRAYS:
            np.save(path / f"{name}.npy", getattr(self, name), allow_pickle=False)

    @classmethod
    def load(cls, index_dir: str | os.PathLike) -> "InvertedIndex":
        path = Path(index_dir)
        try:
            meta = json.loads((path / META_FILE).read_text(encoding="utf-8"))
            vocab = json.loads((path / VOCAB_FILE).read_text(encoding="utf-8"))
            doc_ids = json.loads((path / DOC_IDS_FILE).read_text(encoding="utf-8"))
            arrays = {n: np.load(path / f"{n}.npy", allow_pickle=False) for n in _ARRAYS}
        except OSError as exc:
            raise IndexBuildError(f"no index at {path}: {exc}") from exc
        return cls(vocab, doc_ids, include_title=meta["include_title"], stem=meta["stem"],
                   **arrays)

    def query_terms(self, query: str) -> list[int]:
        ids = (self.term_index.get(t) for t in tokenize(query, stem=self.stem))
        return [i for i in ids if i is not None]

    def score_all(self, query: str, params: Bm25Params = Bm25Params()):
        """Dense ``(scores, hits)`` arrays over every indexed document."""
        return bm25_accumulate(self.query_terms(query), self.term_offsets, self.post_docs,
                               self.post_tfs, self.idf, self.doc_len, self.avgdl,
                               params.k1, params.b, self.n_docs)

    def search(self, query: str, n: int, params: Bm25Params = Bm25Params()) -> list[RankedHit]:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        terms = self.query_terms(query)
        if not terms:
            return []
        scores, hits = bm25_accumulate(terms, self.term_offsets, self.post_docs,
                                       self.post_tfs, self.idf, self.doc_len, self.avgdl,
                                       params.k1, params.b, self.n_docs)
        cand = np.flatnonzero(hits)
        order = cand[np.lexsort((self._id_rank[cand], -scores[cand]))][:n]
        return [RankedHit(self.doc_ids[d], float(scores[d]), i)
                for i, d in enumerate(order, 1)]


def build_index(corpus: Iterable[Document], include_title: bool = True,
                stem: bool = False) -> InvertedIndex:
    return InvertedIndex.build(corpus, include_title=include_title, stem=stem)


def bm25_search(index: InvertedIndex, query: str, n: int,
                params: Bm25Params = Bm25Params()) -> list[RankedHit]:
    return index.search(query, n, params)

