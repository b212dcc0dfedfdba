"""Document store for the trusted abstract corpus.

A corpus lives in one directory::

    documents.jsonl   accepted records, one JSON object per line
    offsets.json      doc_id -> [byte offset, byte length] into documents.jsonl
    stats.json        CorpusStats of the ingest run

Records are stored verbatim. Text normalisation belongs to the tokenizers.
"""
from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

logger = logging.getLogger(__name__)

DOCUMENTS_FILE = "documents.jsonl"
OFFSETS_FILE = "offsets.json"
STATS_FILE = "stats.json"


class CorpusError(Exception):
    pass


class DocumentNotFound(CorpusError, KeyError):
    def __init__(self, doc_id: str):
        super().__init__(doc_id)
        self.doc_id = doc_id

    def __str__(self) -> str:
        return f"unknown doc_id {self.doc_id!r}"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract_text: str

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "title": self.title, "abstract": self.abstract_text}


@dataclass(frozen=True)
class CorpusStats:
    document_count: int
    rejected_count: int
    byte_size: int


def parse_record(line: str) -> Document:
    """Parse one corpus line. Raises ``ValueError`` describing the defect."""
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for key in ("doc_id", "title", "abstract"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
        if not isinstance(obj[key], str):
            raise ValueError(f"field {key!r} is not a string")
    if not obj["doc_id"]:
        raise ValueError("empty doc_id")
    if not obj["abstract"]:
        raise ValueError("empty abstract")
    return Document(obj["doc_id"], obj["title"], obj["abstract"])


def ingest_documents(source: str | os.PathLike | IO[str] | Iterable[str],
                     store_dir: str | os.PathLike) -> CorpusStats:
    """Validate ``source`` records and persist the accepted ones to ``store_dir``.

    Malformed lines and repeated doc_ids are skipped and counted in
    ``rejected_count``; the first record for a doc_id wins. An unreadable
    source raises ``CorpusError``.
    """
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)

    if isinstance(source, (str, os.PathLike)):
        try:
            handle = open(source, "r", encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot read corpus source {source}: {exc}") from exc
    else:
        handle = source

    offsets: dict[str, list[int]] = {}
    rejected = 0
    pos = 0
    try:
        with open(store / DOCUMENTS_FILE, "wb") as out:
            for lineno, line in enumerate(handle, 1):
                try:
                    doc = parse_record(line)
                except (ValueError, json.JSONDecodeError) as exc:
                    rejected += 1
                    logger.warning("corpus line %d rejected: %s", lineno, exc)
                    continue
                if doc.doc_id in offsets:
                    rejected += 1
                    logger.warning("corpus line %d rejected: duplicate doc_id %s",
                                   lineno, doc.doc_id)
                    continue
                data = (json.dumps(doc.to_record(), ensure_ascii=False) + "\n").encode("utf-8")
                out.write(data)
                offsets[doc.doc_id] = [pos, len(data)]
                pos += len(data)
    except UnicodeDecodeError as exc:
        raise CorpusError(f"corpus source is not valid UTF-8: {exc}") from exc
    finally:
        if handle is not source:
            handle.close()

    stats = CorpusStats(document_count=len(offsets), rejected_count=rejected, byte_size=pos)
    with open(store / OFFSETS_FILE, "w", encoding="utf-8") as fh:
        json.dump(offsets, fh, ensure_ascii=False, separators=(",", ":"))
    with open(store / STATS_FILE, "w", encoding="utf-8") as fh:
        json.dump(asdict(stats), fh, indent=2)
    if rejected:
        logger.warning("ingest rejected %d record(s)", rejected)
    return stats


class Corpus:
    """Read-only view of an ingested corpus directory.

    Lookups use ``os.pread`` against one shared descriptor, so a ``Corpus``
    may be read from many threads at once.
    """

    def __init__(self, store_dir: str | os.PathLike):
        self.path = Path(store_dir)
        try:
            with open(self.path / OFFSETS_FILE, encoding="utf-8") as fh:
                self._offsets: dict[str, list[int]] = json.load(fh)
            self._fd = os.open(self.path / DOCUMENTS_FILE, os.O_RDONLY)
        except OSError as exc:
            raise CorpusError(f"no corpus at {self.path}: {exc}") from exc
        # insertion order of offsets.json is ingest order
        self._ids = list(self._offsets)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._offsets

    def __iter__(self) -> Iterator[Document]:
        for doc_id in self._ids:
            yield self.get_document(doc_id)

    def __del__(self):
        fd = getattr(self, "_fd", None)
        if fd is not None:
            try:
                os.close(fd)
            except OSError:
                pass

    @property
    def doc_ids(self) -> list[str]:
        return list(self._ids)

    def get_document(self, doc_id: str) -> Document:
        loc = self._offsets.get(doc_id)
        if loc is None:
            raise DocumentNotFound(doc_id)
        raw = os.pread(self._fd, loc[1], loc[0])
        obj = json.loads(raw.decode("utf-8"))
        return Document(obj["doc_id"], obj["title"], obj["abstract"])

    def stats(self) -> CorpusStats:
        with open(self.path / STATS_FILE, encoding="utf-8") as fh:
            return CorpusStats(**json.load(fh))


def open_corpus(store_dir: str | os.PathLike) -> Corpus:
    return Corpus(store_dir)


def ingest_text(text: str, store_dir: str | os.PathLike) -> CorpusStats:
    """Convenience wrapper for in-memory sources."""
    return ingest_documents(io.StringIO(text), store_dir)
