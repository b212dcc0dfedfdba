"""Answer and citation metrics.

Citation recall is per statement: 1 when the concatenated cited abstracts
fully support it, else 0 (a statement with no citations scores 0). An
answer's recall is the mean over its statements. Citation precision is per
citation: 1 when that abstract alone fully or partially supports the
statement. An answer's precision pools every judged citation in it; an
answer with no citations at all has no precision.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from ..answer import CitedAnswer, PolarAnswer, parse_inline_citations
from ..corpus import Corpus, Document
from ..kernels import lcs_length
from ..text import tokenize
from .judge import AttributionLabel, Judge


def evidence_text(docs: Sequence[Document]) -> str:
    """Cited abstracts in citation order, each headed by its title, blank-line separated."""
    return "\n\n".join(f"{d.title}\n{d.abstract_text}" if d.title else d.abstract_text
                       for d in docs)


def judge_attribution(judge: Judge, statement: str, evidence: str) -> AttributionLabel:
    if not statement.strip() or not evidence.strip():
        raise ValueError("statement and evidence must be non-empty")
    return judge.judge(statement, evidence)


def citation_recall(statement: str, citations: Sequence[str], judge: Judge,
                    corpus: Corpus) -> int:
    if not citations:
        return 0
    docs = [corpus.get_document(c) for c in citations]
    label = judge_attribution(judge, statement, evidence_text(docs))
    return int(label is AttributionLabel.FULL)


def citation_precision(statement: str, citations: Sequence[str], judge: Judge,
                       corpus: Corpus) -> tuple[int, int]:
    """``(supportive, judged)`` counts for one statement's citations."""
    supportive = 0
    for c in citations:
        label = judge_attribution(judge, statement, evidence_text([corpus.get_document(c)]))
        supportive += label > 0
    return supportive, len(citations)


def f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def em_accuracy(predicted: PolarAnswer, gold: PolarAnswer) -> int:
    if gold is PolarAnswer.UNKNOWN:
        raise ValueError("gold answer must be yes, no or maybe")
    return int(predicted is not PolarAnswer.UNKNOWN and predicted is gold)


def rouge_l(candidate: str, reference: str) -> tuple[float, float, float]:
    """Token-level ROUGE-L ``(precision, recall, f)``."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0, 0.0, 0.0
    vocab: dict[str, int] = {}
    a = [vocab.setdefault(t, len(vocab)) for t in cand]
    b = [vocab.setdefault(t, len(vocab)) for t in ref]
    lcs = lcs_length(a, b)
    p, r = lcs / len(cand), lcs / len(ref)
    return p, r, f1(p, r)


@dataclass
class QuestionScore:
    question_id: str
    em: int
    rouge_l: float | None
    citation_recall: float
    citation_precision: float | None
    citation_f1: float | None
    statement_count: int
    citation_count: int
    zero_citation_statements: int
    statement_recalls: list[int]
    statement_precisions: list[tuple[int, int]]

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "em": self.em,
            "rouge_l": self.rouge_l,
            "citation_recall": self.citation_recall,
            "citation_precision": self.citation_precision,
            "citation_f1": self.citation_f1,
            "statement_count": self.statement_count,
            "citation_count": self.citation_count,
            "zero_citation_statements": self.zero_citation_statements,
            "statement_recalls": self.statement_recalls,
            "statement_precisions": [list(p) for p in self.statement_precisions],
        }


def score_answer(answer: CitedAnswer, gold_polar: PolarAnswer, judge: Judge, corpus: Corpus,
                 reference: str | None = None, precision_mode: str = "micro",
                 judge_workers: int = 1) -> QuestionScore:
    """Score one answer. ``precision_mode`` is ``micro`` (pool citations) or
    ``statement`` (mean of per-statement precision)."""
    if precision_mode not in ("micro", "statement"):
        raise ValueError(f"unknown precision_mode {precision_mode!r}")
    jobs: list[tuple[str, int, str]] = []
    for i, st in enumerate(answer.statements):
        if st.citations:
            docs = [corpus.get_document(c) for c in st.citations]
            jobs.append(("recall", i, evidence_text(docs)))
            jobs.extend(("precision", i, evidence_text([d])) for d in docs)

    def run(job):
        return judge_attribution(judge, answer.statements[job[1]].text, job[2])

    if judge_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(judge_workers) as pool:
            labels = list(pool.map(run, jobs))
    else:
        labels = [run(j) for j in jobs]

    recalls = [0] * len(answer.statements)
    precs = [[0, 0] for _ in answer.statements]
    for (kind, i, _), label in zip(jobs, labels):
        if kind == "recall":
            recalls[i] = int(label is AttributionLabel.FULL)
        else:
            precs[i][0] += label > 0
            precs[i][1] += 1

    n = len(answer.statements)
    recall = sum(recalls) / n if n else 0.0
    judged = sum(p[1] for p in precs)
    if judged == 0:
        precision = None
    elif precision_mode == "micro":
        precision = sum(p[0] for p in precs) / judged
    else:
        per = [p[0] / p[1] for p in precs if p[1]]
        precision = sum(per) / len(per)
    body = parse_inline_citations(answer.raw_text, None).clean_text
    rl = rouge_l(body, reference)[2] if reference is not None else None
    return QuestionScore(
        question_id=answer.question_id,
        em=em_accuracy(answer.polar, gold_polar),
        rouge_l=rl,
        citation_recall=recall,
        citation_precision=precision,
        citation_f1=None if precision is None else f1(precision, recall),
        statement_count=n,
        citation_count=judged,
        zero_citation_statements=sum(1 for st in answer.statements if not st.citations),
        statement_recalls=recalls,
        statement_precisions=[tuple(p) for p in precs],
    )
