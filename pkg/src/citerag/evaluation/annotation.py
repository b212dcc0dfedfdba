"""Human annotation round trip.

Export writes one JSON line per judgment to make:

* a ``recall`` row per statement (``citation_doc_id`` empty): do all the
  citations together fully support it? ``full`` or ``not_full``.
* a ``precision`` row per citation: does this abstract alone support the
  statement? ``full``, ``partial`` or ``none``.

Import checks every row is filled with an allowed token. Machine judgments
use the same row format, so agreement is a join on the row key.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from ..answer import CitedAnswer
from ..corpus import Corpus
from .judge import AttributionLabel, Judge
from .kappa import cohens_kappa
from .metrics import evidence_text

RECALL_TOKENS = ("full", "not_full")
PRECISION_TOKENS = ("full", "partial", "none")


class AnnotationError(ValueError):
    pass


def _rows(answers: Sequence[CitedAnswer], corpus: Corpus) -> list[dict]:
    rows = []
    for ans in answers:
        for i, st in enumerate(ans.statements):
            rows.append({"question_id": ans.question_id, "statement_index": i,
                         "kind": "recall", "citation_doc_id": "", "statement": st.text,
                         "citations": list(st.citations), "judgment": ""})
            for doc_id in st.citations:
                doc = corpus.get_document(doc_id)
                rows.append({"question_id": ans.question_id, "statement_index": i,
                             "kind": "precision", "citation_doc_id": doc_id,
                             "statement": st.text, "title": doc.title, "judgment": ""})
    return rows


def _write(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def annotation_export(answers: Sequence[CitedAnswer], corpus: Corpus, path: str | Path) -> int:
    """Write blank annotation rows; returns the row count."""
    rows = _rows(answers, corpus)
    _write(rows, path)
    return len(rows)


def row_key(row: dict) -> tuple[str, int, str]:
    return row["question_id"], int(row["statement_index"]), row["citation_doc_id"]


def annotation_import(path: str | Path) -> dict[tuple[str, int, str], str]:
    """Validated ``{(question_id, statement_index, citation_doc_id): judgment}``."""
    out: dict[tuple[str, int, str], str] = {}
    unfilled = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                key = row_key(row)
                judgment = row["judgment"]
            except (ValueError, KeyError, TypeError) as exc:
                raise AnnotationError(f"{path} line {lineno}: malformed row ({exc})") from exc
            where = f"line {lineno} ({key[0]}, statement {key[1]}" + \
                (f", doc {key[2]})" if key[2] else ")")
            if not isinstance(judgment, str) or not judgment.strip():
                unfilled.append(where)
                continue
            token = judgment.strip().lower()
            allowed = PRECISION_TOKENS if key[2] else RECALL_TOKENS
            if token not in allowed:
                raise AnnotationError(f"{path} {where}: judgment {judgment!r} not in {allowed}")
            if key in out:
                raise AnnotationError(f"{path} {where}: duplicate row")
            out[key] = token
    if unfilled:
        raise AnnotationError(f"{path}: {len(unfilled)} unfilled judgment(s): "
                              + "; ".join(unfilled))
    return out


def machine_annotations(answers: Sequence[CitedAnswer], judge: Judge, corpus: Corpus,
                        path: str | Path | None = None) -> dict[tuple[str, int, str], str]:
    """Fill the annotation rows with ``judge``; optionally write them to ``path``."""
    rows = _rows(answers, corpus)
    for row in rows:
        if row["kind"] == "recall":
            if not row["citations"]:
                row["judgment"] = "not_full"
                continue
            evidence = evidence_text([corpus.get_document(c) for c in row["citations"]])
            label = judge.judge(row["statement"], evidence)
            row["judgment"] = "full" if label is AttributionLabel.FULL else "not_full"
        else:
            evidence = evidence_text([corpus.get_document(row["citation_doc_id"])])
            row["judgment"] = judge.judge(row["statement"], evidence).token
    if path is not None:
        _write(rows, path)
    return {row_key(r): r["judgment"] for r in rows}


def agreement(human: dict, machine: dict, binary_precision: bool = False) -> dict:
    """Cohen's kappa of recall rows and of precision rows over shared keys."""
    shared = sorted(set(human) & set(machine))
    rec = [k for k in shared if not k[2]]
    prec = [k for k in shared if k[2]]

    def lab(table, k):
        v = table[k]
        if binary_precision and k[2]:
            return v != "none"
        return v

    out = {"recall_items": len(rec), "precision_items": len(prec),
           "recall_kappa": None, "precision_kappa": None}
    if rec:
        out["recall_kappa"] = cohens_kappa([human[k] for k in rec], [machine[k] for k in rec])
    if prec:
        out["precision_kappa"] = cohens_kappa([lab(human, k) for k in prec],
                                              [lab(machine, k) for k in prec])
    return out
