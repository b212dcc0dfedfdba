"""Answer generation and citation seeking.

A run is one generation mode plus zero, one or two citation passes:

* pass 1 (inline): the model cites shortlist documents as ``[n]`` while it
  answers; markers are mapped back to doc_ids.
* pass 2 (seek): every statement is given citations after generation by one
  of the seeking strategies.

``MULTI_PASS`` runs both passes and merges them, pass-1 citations first.
The named presets reproduce the baselines: ``medrag`` (RAG, no citations),
``prg`` (RAG, pass 1 only), ``pgc`` (CoT, pass 2 with LLM rerank) and
``multipass`` (RAG, both passes).
"""
from __future__ import annotations

import enum
import json
import logging
import re
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .answer import (CitedAnswer, CitedStatement, extract_polar_answer, parse_inline_citations,
                     segment_statements)
from .corpus import Corpus, Document
from .evaluation.datasets import QAItem
from .llm import (ChatClient, GenerationConfig, LLMError, PromptTemplate, estimate_tokens,
                  format_documents, load_template)
from .retrieval import CountingRetriever, RankedHit, Retriever, Scorer, document_text

logger = logging.getLogger(__name__)


class GenerationMode(str, enum.Enum):
    COT = "cot"
    RAG = "rag"
    RAG_ORACLE = "rag-oracle"


class SeekStrategy(str, enum.Enum):
    NONE = "none"
    PRE_GEN_SHORTLIST_LLM_RERANK = "pre-gen-shortlist-llm-rerank"
    RE_RETRIEVAL_ONLY = "retriever-only"
    RE_RETRIEVAL_NLI_RERANK = "re-retrieval-nli-rerank"
    RE_RETRIEVAL_LLM_RERANK = "re-retrieval-llm-rerank"
    MULTI_PASS = "multi-pass"


class ConfigurationError(ValueError):
    pass


class QuestionError(Exception):
    def __init__(self, question_id: str, cause: BaseException):
        super().__init__(f"{question_id}: {type(cause).__name__}: {cause}")
        self.question_id = question_id
        self.cause = cause


@dataclass
class PipelineConfig:
    generation_mode: GenerationMode = GenerationMode.RAG
    seek_strategy: SeekStrategy = SeekStrategy.MULTI_PASS
    # ask for inline [n] citations during generation; MULTI_PASS forces it on
    inline_citations: bool = False
    # strategy used for pass 2 of MULTI_PASS
    multipass_second_pass: SeekStrategy = SeekStrategy.RE_RETRIEVAL_ONLY
    shortlist_k: int = 32
    per_statement_k: int = 3
    nli_threshold: float = 0.5
    workers: int = 4
    fail_fast: bool = False
    answer_llm: GenerationConfig = field(default_factory=GenerationConfig)
    rerank_llm: GenerationConfig = field(
        default_factory=lambda: GenerationConfig(max_tokens=64))
    templates: dict[str, str] = field(default_factory=lambda: {
        "cot": "cot_answer", "rag": "rag_answer", "rag_nocite": "rag_answer_nocite",
        "select": "select_citations"})

    def __post_init__(self):
        self.generation_mode = GenerationMode(self.generation_mode)
        self.seek_strategy = SeekStrategy(self.seek_strategy)
        self.multipass_second_pass = SeekStrategy(self.multipass_second_pass)

    @property
    def first_pass(self) -> bool:
        return self.inline_citations or self.seek_strategy is SeekStrategy.MULTI_PASS

    @property
    def second_pass(self) -> SeekStrategy:
        if self.seek_strategy is SeekStrategy.MULTI_PASS:
            return self.multipass_second_pass
        return self.seek_strategy

    def validate(self) -> None:
        if self.shortlist_k < 1 or self.per_statement_k < 1:
            raise ConfigurationError("shortlist_k and per_statement_k must be positive")
        if self.multipass_second_pass in (SeekStrategy.MULTI_PASS, SeekStrategy.NONE):
            raise ConfigurationError("multipass_second_pass must be a single seek strategy")
        needs_shortlist = self.first_pass or \
            self.second_pass is SeekStrategy.PRE_GEN_SHORTLIST_LLM_RERANK
        if needs_shortlist and self.generation_mode is GenerationMode.COT:
            raise ConfigurationError(
                f"{self.seek_strategy.value} with inline={self.inline_citations} needs a "
                "pre-generation shortlist; CoT mode has none")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, GenerationConfig):
                value = asdict(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        preset = data.pop("preset", None)
        base = preset_config(preset).to_dict() if preset else {}
        for key, value in data.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                base[key] = {**base[key], **value}
            else:
                base[key] = value
        for key in ("answer_llm", "rerank_llm"):
            if isinstance(base.get(key), dict):
                base[key] = GenerationConfig(**base[key])
        known = {f.name for f in fields(cls)}
        unknown = set(base) - known
        if unknown:
            raise ConfigurationError(f"unknown pipeline keys: {sorted(unknown)}")
        return cls(**base)


PRESETS = {
    "medrag": dict(generation_mode=GenerationMode.RAG, seek_strategy=SeekStrategy.NONE),
    "prg": dict(generation_mode=GenerationMode.RAG, seek_strategy=SeekStrategy.NONE,
                inline_citations=True),
    "pgc": dict(generation_mode=GenerationMode.COT,
                seek_strategy=SeekStrategy.RE_RETRIEVAL_LLM_RERANK),
    "multipass": dict(generation_mode=GenerationMode.RAG, seek_strategy=SeekStrategy.MULTI_PASS),
}


def preset_config(name: str, **overrides) -> PipelineConfig:
    try:
        base = dict(PRESETS[name.lower()])
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") \
            from None
    base.update(overrides)
    return PipelineConfig(**base)


def merge_dedup(pass1: Sequence[str], pass2: Sequence[str]) -> list[str]:
    """Pass-1 citations in order, then unseen pass-2 citations."""
    return list(dict.fromkeys([*pass1, *pass2]))


@dataclass
class QuestionResult:
    answer: CitedAnswer
    stages: dict


class CitationPipeline:
    """Runs one :class:`PipelineConfig` over questions.

    ``counters`` tracks ``pregen_retrievals``, ``statement_retrievals`` and
    ``llm_calls`` across every question the pipeline has processed.
    """

    def __init__(self, config: PipelineConfig, corpus: Corpus, retriever: Retriever,
                 llm: ChatClient, nli_scorer: Scorer | None = None,
                 gold_support: dict[str, list[str]] | None = None,
                 include_title: bool = True):
        config.validate()
        if config.second_pass is SeekStrategy.RE_RETRIEVAL_NLI_RERANK and nli_scorer is None:
            raise ConfigurationError("NLI rerank needs an nli_scorer")
        self.config = config
        self.corpus = corpus
        self.llm = llm
        self.nli_scorer = nli_scorer
        self.gold_support = gold_support or {}
        self.include_title = include_title
        self.counters: Counter = Counter()
        self._lock = threading.Lock()
        self.pregen_retriever = CountingRetriever(retriever, self.counters,
                                                  "pregen_retrievals", self._lock)
        self.statement_retriever = CountingRetriever(retriever, self.counters,
                                                     "statement_retrievals", self._lock)
        self._templates: dict[str, PromptTemplate] = {
            k: load_template(v) for k, v in config.templates.items()}

    # -- llm ------------------------------------------------------------
    def _complete(self, system: str, user: str, cfg: GenerationConfig) -> str:
        with self._lock:
            self.counters["llm_calls"] += 1
        return self.llm.complete(system, user, cfg)

    def _fit_documents(self, template: PromptTemplate, question: str,
                       docs: list[Document]) -> tuple[list[Document], int]:
        budget = self.config.answer_llm.context_tokens
        if budget is None:
            return docs, 0
        shown = list(docs)
        while shown:
            system, user = template.render({"question": question,
                                            "documents": format_documents(shown)})
            if estimate_tokens(system) + estimate_tokens(user) + \
                    self.config.answer_llm.max_tokens <= budget:
                break
            shown.pop()
        dropped = len(docs) - len(shown)
        if dropped:
            logger.info("dropped %d shortlist document(s) to fit %d tokens", dropped, budget)
        return shown, dropped

    # -- generation -----------------------------------------------------
    def generate_answer(self, item: QAItem) -> tuple[str, list[Document], dict]:
        cfg = self.config
        info: dict = {}
        if cfg.generation_mode is GenerationMode.COT:
            system, user = self._templates["cot"].render({"question": item.question})
            return self._complete(system, user, cfg.answer_llm), [], info

        if cfg.generation_mode is GenerationMode.RAG_ORACLE:
            gold = self.gold_support.get(item.question_id) or item.gold_doc_ids
            missing = [d for d in gold if d not in self.corpus]
            if not gold or missing:
                raise ConfigurationError(
                    f"{item.question_id}: oracle mode needs gold documents in the corpus "
                    f"(missing: {missing or 'all'})")
            docs = [self.corpus.get_document(d) for d in gold[:cfg.shortlist_k]]
        else:
            hits = self.pregen_retriever.retrieve(item.question, cfg.shortlist_k)
            docs = [self.corpus.get_document(h.doc_id) for h in hits]

        template = self._templates["rag" if cfg.first_pass else "rag_nocite"]
        docs, dropped = self._fit_documents(template, item.question, docs)
        info["truncated_documents"] = dropped
        system, user = template.render({"question": item.question,
                                        "documents": format_documents(docs)})
        return self._complete(system, user, cfg.answer_llm), docs, info

    # -- citation passes ------------------------------------------------
    @staticmethod
    def first_pass_citations(markers_per_statement: Sequence[Sequence[int]],
                             shortlist: Sequence[Document]) -> list[list[str]]:
        out = []
        for markers in markers_per_statement:
            ids = [shortlist[i - 1].doc_id for i in markers if 1 <= i <= len(shortlist)]
            out.append(merge_dedup(ids, []))
        return out

    def _llm_select(self, statement: str, pool: list[Document]) -> list[str] | None:
        system, user = self._templates["select"].render(
            {"statement": statement, "documents": format_documents(pool)})
        reply = self._complete(system, user, self.config.rerank_llm)
        picked = parse_inline_citations(reply, len(pool)).markers
        if not picked:
            return None
        return merge_dedup([pool[i - 1].doc_id for i in picked], [])

    def _nli_select(self, statement: str, pool: list[Document]) -> list[str]:
        passages = [(d.doc_id, document_text(d, self.include_title)) for d in pool]
        scores = self.nli_scorer.score(statement, passages)
        kept = [(d.doc_id, s) for d, s in zip(pool, scores) if s >= self.config.nli_threshold]
        kept.sort(key=lambda p: (-p[1], p[0]))
        return [doc_id for doc_id, _ in kept]

    def second_pass_citations(self, statement: str, shortlist: Sequence[Document],
                              strategy: SeekStrategy | None = None) -> tuple[list[str], dict]:
        strategy = strategy or self.config.second_pass
        k = self.config.per_statement_k
        log: dict = {"strategy": strategy.value}
        if strategy is SeekStrategy.NONE or not statement.strip():
            return [], log

        if strategy is SeekStrategy.PRE_GEN_SHORTLIST_LLM_RERANK:
            pool = list(shortlist)
        else:
            hits: list[RankedHit] = self.statement_retriever.retrieve(statement, k)
            pool = [self.corpus.get_document(h.doc_id) for h in hits]
        log["pool"] = [d.doc_id for d in pool]
        fallback = [d.doc_id for d in pool[:k]]
        if not pool or strategy is SeekStrategy.RE_RETRIEVAL_ONLY:
            return fallback, log

        try:
            if strategy is SeekStrategy.RE_RETRIEVAL_NLI_RERANK:
                chosen = self._nli_select(statement, pool)
            else:
                chosen = self._llm_select(statement, pool)
                if chosen is None:
                    raise ValueError("no document indices in rerank reply")
        except (LLMError, ValueError) as exc:
            logger.warning("citation rerank failed (%s); using retriever order", exc)
            log["fallback"] = str(exc)
            return fallback, log
        except Exception as exc:  # scorer backends raise their own types
            logger.warning("citation rerank failed (%s); using retriever order", exc)
            log["fallback"] = f"{type(exc).__name__}: {exc}"
            return fallback, log
        return chosen[:k], log

    # -- orchestration --------------------------------------------------
    def run(self, item: QAItem) -> QuestionResult:
        cfg = self.config
        raw, shortlist, gen_info = self.generate_answer(item)
        size = len(shortlist) if cfg.first_pass else None
        statements = segment_statements(raw, size)
        if cfg.first_pass:
            pass1 = self.first_pass_citations([s.markers for s in statements], shortlist)
        else:
            pass1 = [[] for _ in statements]

        pass2, seek_logs = [], []
        for st in statements:
            cites, log = self.second_pass_citations(st.text, shortlist)
            pass2.append(cites)
            seek_logs.append(log)

        final = [merge_dedup(a, b) for a, b in zip(pass1, pass2)]
        answer = CitedAnswer(
            question_id=item.question_id,
            raw_text=raw,
            polar=extract_polar_answer(raw),
            statements=[CitedStatement(st.text, cites) for st, cites in zip(statements, final)],
        )
        stages = {
            "question_id": item.question_id,
            "question": item.question,
            "shortlist": [d.doc_id for d in shortlist],
            "raw_answer": raw,
            "statements": [st.text for st in statements],
            "dropped_markers": sum(st.dropped_markers for st in statements),
            "pass1": pass1,
            "seek": seek_logs,
            "pass2": pass2,
            "final": final,
            **gen_info,
        }
        return QuestionResult(answer, stages)

    def run_many(self, items: Sequence[QAItem]) -> tuple[list[QuestionResult | None],
                                                           list[QuestionError]]:
        """Process ``items`` on a bounded worker pool, preserving input order."""
        errors: list[QuestionError] = []

        def work(item: QAItem):
            try:
                return self.run(item)
            except Exception as exc:
                err = QuestionError(item.question_id, exc)
                if self.config.fail_fast:
                    raise err from exc
                logger.error("question failed: %s", err)
                return err

        workers = max(1, self.config.workers)
        if workers == 1:
            outcomes = [work(i) for i in items]
        else:
            with ThreadPoolExecutor(workers) as pool:
                outcomes = list(pool.map(work, items))
        results: list[QuestionResult | None] = []
        for out in outcomes:
            if isinstance(out, QuestionError):
                errors.append(out)
                results.append(None)
            else:
                results.append(out)
        return results, errors


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def write_run(run_dir: str | Path, results: Sequence[QuestionResult | None],
              errors: Sequence[QuestionError], counters: Counter | None = None) -> None:
    """Write ``answers.jsonl``, ``stages/<qid>.json`` and ``errors.jsonl``."""
    run_dir = Path(run_dir)
    (run_dir / "stages").mkdir(parents=True, exist_ok=True)
    with open(run_dir / "answers.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            if res is not None:
                fh.write(res.answer.to_json() + "\n")
    for res in results:
        if res is None:
            continue
        name = _UNSAFE.sub("_", res.answer.question_id) + ".json"
        (run_dir / "stages" / name).write_text(
            json.dumps(res.stages, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8")
    with open(run_dir / "errors.jsonl", "w", encoding="utf-8") as fh:
        for err in errors:
            fh.write(json.dumps({"question_id": err.question_id, "error": str(err.cause),
                                 "type": type(err.cause).__name__}, sort_keys=True) + "\n")
    if counters is not None:
        (run_dir / "counters.json").write_text(
            json.dumps(dict(sorted(counters.items())), indent=2) + "\n", encoding="utf-8")


def read_answers(run_dir: str | Path) -> list[CitedAnswer]:
    path = Path(run_dir) / "answers.jsonl"
    with open(path, encoding="utf-8") as fh:
        return [CitedAnswer.from_record(json.loads(line)) for line in fh if line.strip()]
