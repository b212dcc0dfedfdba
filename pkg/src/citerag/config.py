"""Run configuration: one YAML (or JSON) file, ``${VAR}`` interpolation, flag overrides.

Relative paths resolve against ``workdir``. Example::

    corpus: corpus
    index: index
    retrieval:
      retriever: hierarchical      # bm25 | hierarchical | semantic | rrf
      first_stage_depth: 100
      scorer: {kind: lexical}      # lexical | http | replay
    llm:
      mode: replay                 # live | record | replay
      transcripts: transcripts.jsonl
    pipeline:
      preset: multipass
      answer_llm: {model_name: llama-3-8b-instruct, endpoint_url: "${LLM_URL:-http://localhost:8000/v1}"}
    judge:
      kind: llm
      llm: {model_name: mistral-7b-instruct}
    dataset: {name: bioasq_yn, path: data/bioasq.json}
    output: runs/multipass
"""
from __future__ import annotations

import copy
import json
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .corpus import Corpus
from .evaluation.judge import AttributionLabel, Judge, LLMJudge, ScriptedJudge
from .llm import (GenerationConfig, HttpChatClient, RecordingClient, ReplayClient,
                  TranscriptStore)
from .pipeline import CitationPipeline, ConfigurationError, PipelineConfig
from .retrieval import (Bm25Params, Bm25Retriever, HierarchicalRetriever, HttpCrossEncoderScorer,
                        InvertedIndex, LexicalOverlapScorer, ReplayScorer, RrfRetriever,
                        SemanticOnlyRetriever)

_ENV = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")


def interpolate(value: Any) -> Any:
    """Replace ``${VAR}`` / ``${VAR:-default}`` in every string of a nested structure."""
    if isinstance(value, str):
        def sub(m):
            if m.group(1) in os.environ:
                return os.environ[m.group(1)]
            if m.group(2) is not None:
                return m.group(2)
            raise ConfigurationError(f"environment variable {m.group(1)} is not set")
        return _ENV.sub(sub, value)
    if isinstance(value, dict):
        return {k: interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [interpolate(v) for v in value]
    return value


def deep_update(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_update(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class ScorerSettings:
    kind: str = "lexical"
    url: str | None = None
    batch_size: int = 32
    concurrency: int = 4
    log: str | None = None


@dataclass
class RetrievalSettings:
    retriever: str = "hierarchical"
    k1: float = 0.9
    b: float = 0.4
    include_title: bool = True
    stem: bool = False
    first_stage_depth: int = 100
    semantic_pool_depth: int = 1000
    k_rrf: int = 60
    scorer: ScorerSettings = field(default_factory=ScorerSettings)


@dataclass
class LLMSettings:
    mode: str = "live"
    transcripts: str | None = None
    max_retries: int = 5
    base_delay: float = 1.0
    concurrency: int = 4
    rate_per_second: float | None = None


@dataclass
class JudgeSettings:
    kind: str = "llm"
    llm: GenerationConfig = field(default_factory=lambda: GenerationConfig(max_tokens=64))
    # scripted judge: JSON lines {statement, evidence, label}
    table: str | None = None


@dataclass
class EvalSettings:
    precision_mode: str = "micro"
    judge_workers: int = 1


@dataclass
class RunConfig:
    workdir: str = "."
    corpus: str = "corpus"
    index: str = "index"
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    llm: LLMSettings = field(default_factory=LLMSettings)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    judge: JudgeSettings = field(default_factory=JudgeSettings)
    nli_scorer: ScorerSettings | None = None
    dataset: dict = field(default_factory=dict)
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    output: str = "run"

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict, workdir: str | None = None) -> "RunConfig":
        data = interpolate(dict(data))
        known = {"workdir", "corpus", "index", "retrieval", "llm", "pipeline", "judge",
                 "nli_scorer", "dataset", "evaluation", "output"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            retrieval = dict(data.get("retrieval") or {})
            retrieval["scorer"] = ScorerSettings(**(retrieval.get("scorer") or {}))
            judge = dict(data.get("judge") or {})
            if isinstance(judge.get("llm"), dict):
                judge["llm"] = GenerationConfig(**{"max_tokens": 64, **judge["llm"]})
            nli = data.get("nli_scorer")
            cfg = cls(
                workdir=workdir or data.get("workdir", "."),
                corpus=data.get("corpus", "corpus"),
                index=data.get("index", "index"),
                retrieval=RetrievalSettings(**retrieval),
                llm=LLMSettings(**(data.get("llm") or {})),
                pipeline=PipelineConfig.from_dict(data.get("pipeline") or {}),
                judge=JudgeSettings(**judge),
                nli_scorer=ScorerSettings(**nli) if nli else None,
                dataset=dict(data.get("dataset") or {}),
                evaluation=EvalSettings(**(data.get("evaluation") or {})),
                output=data.get("output", "run"),
            )
        except TypeError as exc:
            raise ConfigurationError(f"bad config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None,
             workdir: str | None = None) -> "RunConfig":
        data: dict = {}
        if path is not None:
            try:
                data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
            except OSError as exc:
                raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigurationError(f"config {path} is not a mapping")
        if overrides:
            data = deep_update(data, overrides)
        return cls.from_dict(data, workdir=workdir)

    def validate(self) -> None:
        if self.retrieval.retriever not in ("bm25", "hierarchical", "semantic", "rrf"):
            raise ConfigurationError(f"unknown retriever {self.retrieval.retriever!r}")
        if self.retrieval.scorer.kind not in ("lexical", "http", "replay"):
            raise ConfigurationError(f"unknown scorer kind {self.retrieval.scorer.kind!r}")
        if self.retrieval.scorer.kind in ("http",) and not self.retrieval.scorer.url:
            raise ConfigurationError("http scorer needs a url")
        if self.llm.mode not in ("live", "record", "replay"):
            raise ConfigurationError(f"unknown llm mode {self.llm.mode!r}")
        if self.llm.mode != "live" and not self.llm.transcripts:
            raise ConfigurationError(f"llm mode {self.llm.mode} needs a transcripts path")
        if self.judge.kind not in ("llm", "scripted"):
            raise ConfigurationError(f"unknown judge kind {self.judge.kind!r}")
        if self.judge.kind == "scripted" and not self.judge.table:
            raise ConfigurationError("scripted judge needs a table path")
        if self.evaluation.precision_mode not in ("micro", "statement"):
            raise ConfigurationError("precision_mode must be micro or statement")
        Bm25Params(self.retrieval.k1, self.retrieval.b)
        self.pipeline.validate()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pipeline"] = self.pipeline.to_dict()
        return out

    def snapshot(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def reproducibility_fields(self) -> dict:
        """Config sections that determine results (no output locations)."""
        d = self.to_dict()
        return {k: d[k] for k in ("retrieval", "pipeline", "judge", "nli_scorer", "evaluation")}

    def path(self, rel: str | None) -> Path | None:
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() else Path(self.workdir) / p


class Services:
    """Lazily built corpus, index, clients and judge for one RunConfig."""

    def __init__(self, config: RunConfig, llm=None, judge: Judge | None = None):
        self.config = config
        self._llm = llm
        self._judge = judge
        self._corpus = None
        self._index = None
        self._retriever = None

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = Corpus(self.config.path(self.config.corpus))
        return self._corpus

    @property
    def index(self) -> InvertedIndex:
        if self._index is None:
            self._index = InvertedIndex.load(self.config.path(self.config.index))
        return self._index

    def _scorer(self, s: ScorerSettings):
        if s.kind == "lexical":
            return LexicalOverlapScorer(stem=self.config.retrieval.stem)
        if s.kind == "replay":
            return ReplayScorer(self.config.path(s.log))
        return HttpCrossEncoderScorer(s.url, batch_size=s.batch_size,
                                      max_concurrency=s.concurrency,
                                      log_path=self.config.path(s.log))

    @property
    def retriever(self):
        if self._retriever is None:
            r = self.config.retrieval
            params = Bm25Params(r.k1, r.b)
            bm25 = Bm25Retriever(self.index, params)
            if r.retriever == "bm25":
                self._retriever = bm25
            else:
                scorer = self._scorer(r.scorer)
                if r.retriever == "hierarchical":
                    self._retriever = HierarchicalRetriever(self.index, self.corpus, scorer,
                                                            r.first_stage_depth, params)
                else:
                    semantic = SemanticOnlyRetriever(self.index, self.corpus, scorer,
                                                     r.semantic_pool_depth, params)
                    self._retriever = semantic if r.retriever == "semantic" else \
                        RrfRetriever(bm25, semantic, r.k_rrf, r.first_stage_depth)
        return self._retriever

    @property
    def llm(self):
        if self._llm is None:
            s = self.config.llm
            if s.mode == "replay":
                self._llm = ReplayClient(TranscriptStore(self.config.path(s.transcripts)))
            else:
                http = HttpChatClient(max_retries=s.max_retries, base_delay=s.base_delay,
                                      max_concurrency=s.concurrency,
                                      rate_per_second=s.rate_per_second)
                self._llm = http if s.mode == "live" else RecordingClient(
                    http, TranscriptStore(self.config.path(s.transcripts)))
        return self._llm

    @property
    def judge(self) -> Judge:
        if self._judge is None:
            j = self.config.judge
            if j.kind == "llm":
                self._judge = LLMJudge(self.llm, j.llm)
            else:
                table = {}
                with open(self.config.path(j.table), encoding="utf-8") as fh:
                    for line in fh:
                        if line.strip():
                            rec = json.loads(line)
                            table[(rec["statement"], rec["evidence"])] = \
                                AttributionLabel.from_token(rec["label"])
                self._judge = ScriptedJudge(table, name=f"scripted:{j.table}")
        return self._judge

    def pipeline(self) -> CitationPipeline:
        nli = self._scorer(self.config.nli_scorer) if self.config.nli_scorer else None
        return CitationPipeline(self.config.pipeline, self.corpus, self.retriever, self.llm,
                                nli_scorer=nli, include_title=self.config.retrieval.include_title)
