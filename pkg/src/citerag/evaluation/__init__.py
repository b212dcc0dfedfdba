from .annotation import (AnnotationError, agreement, annotation_export, annotation_import,
                         machine_annotations)
from .datasets import DATASETS, DatasetError, QAItem, load_dataset
from .judge import AttributionLabel, Judge, LLMJudge, ScriptedJudge, parse_judgment
from .kappa import cohens_kappa
from .metrics import (QuestionScore, citation_precision, citation_recall, em_accuracy,
                      evidence_text, f1, judge_attribution, rouge_l, score_answer)
from .report import EvalReport, evaluate_run

__all__ = [
    "AnnotationError", "AttributionLabel", "DATASETS", "DatasetError", "EvalReport", "Judge",
    "LLMJudge", "QAItem", "QuestionScore", "ScriptedJudge", "agreement", "annotation_export",
    "annotation_import", "citation_precision", "citation_recall", "cohens_kappa",
    "em_accuracy", "evaluate_run", "evidence_text", "f1", "judge_attribution", "load_dataset",
    "machine_annotations", "parse_judgment", "rouge_l", "score_answer",
]
