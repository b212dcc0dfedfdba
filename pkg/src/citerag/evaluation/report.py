"""Run-level evaluation report."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..answer import CitedAnswer
from ..corpus import Corpus
from .datasets import QAItem
from .judge import Judge
from .metrics import QuestionScore, f1, score_answer


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


@dataclass
class EvalReport:
    scores: list[QuestionScore]
    judge: str
    config: dict = field(default_factory=dict)
    precision_mode: str = "micro"
    missing: list[str] = field(default_factory=list)

    @property
    def aggregates(self) -> dict:
        s = self.scores
        recall = _mean(q.citation_recall for q in s)
        precision = _mean(q.citation_precision for q in s)
        return {
            "questions": len(s),
            "em": _mean(q.em for q in s),
            "rouge_l": _mean(q.rouge_l for q in s),
            "citation_recall": recall,
            "citation_precision": precision,
            # mean of per-question F1
            "citation_f1": _mean(q.citation_f1 for q in s),
            # F1 of the mean precision and mean recall
            "citation_f1_corpus": (f1(precision, recall)
                                   if precision is not None and recall is not None else None),
            "statements": sum(q.statement_count for q in s),
            "citations": sum(q.citation_count for q in s),
            "zero_citation_statements": sum(q.zero_citation_statements for q in s),
        }

    def to_record(self) -> dict:
        return {
            "judge": self.judge,
            "precision_mode": self.precision_mode,
            "config": self.config,
            "aggregates": self.aggregates,
            "missing_answers": self.missing,
            "per_question": [q.to_record() for q in self.scores],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def table(self) -> str:
        """Markdown table in percent: Acc EM, ROUGE-L, Recall, Precision, F1."""
        a = self.aggregates

        def pct(v):
            return "/" if v is None else f"{100 * v:.2f}"

        lines = [
            "| Acc (EM) | ROUGE-L | Recall | Precision | F1 | F1 (corpus) |",
            "|---:|---:|---:|---:|---:|---:|",
            f"| {pct(a['em'])} | {pct(a['rouge_l'])} | {pct(a['citation_recall'])} | "
            f"{pct(a['citation_precision'])} | {pct(a['citation_f1'])} | "
            f"{pct(a['citation_f1_corpus'])} |",
            "",
            f"questions: {a['questions']}, statements: {a['statements']}, "
            f"citations: {a['citations']}, zero-citation statements: "
            f"{a['zero_citation_statements']} (scored as recall 0, no precision)",
            f"judge: {self.judge}; precision pooling: {self.precision_mode}",
        ]
        if self.missing:
            lines.append(f"unanswered questions: {len(self.missing)}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "eval_report.md").write_text(self.table(), encoding="utf-8")


def evaluate_run(answers: Sequence[CitedAnswer], items: Sequence[QAItem], judge: Judge,
                 corpus: Corpus, config: dict | None = None, precision_mode: str = "micro",
                 judge_workers: int = 1) -> EvalReport:
    """Score every answered question, in dataset order."""
    by_id = {a.question_id: a for a in answers}
    scores, missing = [], []
    for item in items:
        answer = by_id.get(item.question_id)
        if answer is None:
            missing.append(item.question_id)
            continue
        scores.append(score_answer(answer, item.gold_polar, judge, corpus,
                                   reference=item.gold_long_answer,
                                   precision_mode=precision_mode, judge_workers=judge_workers))
    return EvalReport(scores, getattr(judge, "name", type(judge).__name__), config or {},
                      precision_mode, missing)
