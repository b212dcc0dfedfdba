"""Loaders for BioASQ yes/no and PubMedQA.

Accepted shapes
---------------
bioasq_yn
    The official BioASQ JSON (``{"questions": [...]}``) or JSON lines of the
    same question objects. Fields used: ``id``, ``body``, ``exact_answer``,
    ``documents`` (PubMed URLs or bare PMIDs), ``ideal_answer`` (string or
    list; the first entry is the ROUGE reference). Non-yes/no questions are
    skipped when ``type`` is present.
pubmedqa
    The official ``ori_pqal.json`` mapping ``pmid -> {QUESTION,
    final_decision, LONG_ANSWER, ...}``, or JSON lines carrying the same keys
    plus ``id``. The source PMID becomes the single gold document.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..answer import PolarAnswer

DATASETS = ("bioasq_yn", "pubmedqa")


class DatasetError(ValueError):
    pass


@dataclass
class QAItem:
    question_id: str
    question: str
    gold_polar: PolarAnswer
    gold_doc_ids: list[str] = field(default_factory=list)
    gold_long_answer: str | None = None


def _records(path: Path) -> list[tuple[str, dict]]:
    """(locator, record) pairs from a JSON document or a JSON-lines file."""
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict) and "questions" in data:
        return [(f"questions[{i}]", q) for i, q in enumerate(data["questions"])]
    if isinstance(data, dict) and data and all(isinstance(v, dict) for v in data.values()):
        return [(f"key {k}", {"id": k, **v}) for k, v in data.items()]
    if isinstance(data, list):
        return [(f"item {i}", q) for i, q in enumerate(data)]
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append((f"line {lineno}", json.loads(line)))
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path} line {lineno}: invalid JSON ({exc})") from exc
    return out


def _require(rec: dict, key: str, where: str, path: Path):
    value = rec.get(key)
    if value is None or (isinstance(value, str) and not value.strip()):
        raise DatasetError(f"{path} {where}: missing field {key!r}")
    return value


def _polar(value, where: str, path: Path, allowed: tuple[str, ...]) -> PolarAnswer:
    if isinstance(value, list) and value:
        value = value[0]
    if not isinstance(value, str) or value.strip().lower() not in allowed:
        raise DatasetError(f"{path} {where}: answer {value!r} not in {allowed}")
    return PolarAnswer(value.strip().lower())


_PMID = re.compile(r"(\d+)\s*/?\s*$")


def _pmid(ref: str) -> str:
    m = _PMID.search(str(ref))
    return m.group(1) if m else str(ref)


def load_dataset(name: str, path: str | Path) -> list[QAItem]:
    path = Path(path)
    if name not in DATASETS:
        raise DatasetError(f"unknown dataset {name!r}; expected one of {DATASETS}")
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    items = []
    for where, rec in _records(path):
        if not isinstance(rec, dict):
            raise DatasetError(f"{path} {where}: record is not an object")
        if name == "bioasq_yn":
            if rec.get("type", "yesno") != "yesno":
                continue
            qid = str(_require(rec, "id", where, path))
            question = _require(rec, "body", where, path)
            polar = _polar(_require(rec, "exact_answer", where, path), where, path, ("yes", "no"))
            docs = [_pmid(d) for d in rec.get("documents") or []]
            ideal = rec.get("ideal_answer")
            if isinstance(ideal, list):
                ideal = ideal[0] if ideal else None
            items.append(QAItem(qid, question, polar, docs, ideal))
        else:
            qid = str(_require(rec, "id", where, path))
            question = _require(rec, "QUESTION", where, path)
            polar = _polar(_require(rec, "final_decision", where, path), where, path,
                           ("yes", "no", "maybe"))
            items.append(QAItem(qid, question, polar, [qid], rec.get("LONG_ANSWER")))
    return items
