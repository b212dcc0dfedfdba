from __future__ import annotations

import io
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from citerag.corpus import Corpus, ingest_documents  # noqa: E402
from citerag.evaluation import LLMJudge, load_dataset  # noqa: E402
from citerag.llm import GenerationConfig, RecordingClient, ReplayClient, TranscriptStore  # noqa: E402
from citerag.pipeline import CitationPipeline, preset_config  # noqa: E402
from citerag.retrieval import HierarchicalRetriever, InvertedIndex, LexicalOverlapScorer  # noqa: E402

import world  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

PRESET_NAMES = ("multipass", "prg", "pgc", "medrag")
JUDGE_CFG = GenerationConfig(model_name="judge-model", max_tokens=64)


@pytest.fixture
def small_corpus(tmp_path) -> Corpus:
    lines = [
        {"doc_id": "A", "title": "Alpha", "abstract": "aspirin reduces fever in adults"},
        {"doc_id": "B", "title": "Beta", "abstract": "chlorotoxin is a peptide from scorpion venom"},
        {"doc_id": "C", "title": "Gamma", "abstract": "fever and pain respond to ibuprofen and rest"},
    ]
    src = "".join(json.dumps(x) + "\n" for x in lines)
    ingest_documents(io.StringIO(src), tmp_path / "small")
    return Corpus(tmp_path / "small")


class World:
    """Ingested fixture corpus, index, dataset and a recorded transcript store."""

    def __init__(self, root: Path):
        self.root = root
        paths = world.write_world(root)
        self.dataset_path = paths["dataset"]
        self.corpus_dir = root / "corpus"
        self.index_dir = root / "index"
        ingest_documents(paths["corpus_src"], self.corpus_dir)
        self.corpus = Corpus(self.corpus_dir)
        index = InvertedIndex.build(self.corpus)
        index.save(self.index_dir)
        self.index = InvertedIndex.load(self.index_dir)
        self.items = load_dataset("bioasq_yn", self.dataset_path)
        self.transcripts = root / "transcripts.jsonl"
        self.scripted = world.ScriptedChat()
        self._record()

    def retriever(self):
        return HierarchicalRetriever(self.index, self.corpus, LexicalOverlapScorer(),
                                     first_stage_depth=100)

    def pipeline(self, preset: str, llm=None, **overrides) -> CitationPipeline:
        cfg = preset_config(preset, **{"workers": 1, **overrides})
        if llm is None:
            llm = ReplayClient(TranscriptStore(self.transcripts))
        return CitationPipeline(cfg, self.corpus, self.retriever(), llm)

    def judge(self) -> LLMJudge:
        return LLMJudge(ReplayClient(TranscriptStore(self.transcripts)), JUDGE_CFG,
                        name="replay-judge")

    def _record(self):
        from citerag.evaluation import evaluate_run

        recorder = RecordingClient(self.scripted, TranscriptStore(self.transcripts))
        for name in PRESET_NAMES:
            pipe = self.pipeline(name, llm=recorder)
            results, errors = pipe.run_many(self.items)
            assert not errors, errors
            judge = LLMJudge(recorder, JUDGE_CFG, name="replay-judge")
            evaluate_run([r.answer for r in results], self.items, judge, self.corpus)


@pytest.fixture(scope="session")
def fixture_world(tmp_path_factory) -> World:
    return World(tmp_path_factory.mktemp("world"))


ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or report.failed:
        ACCEPTANCE_RESULTS[crit[0]] = ("PASS" if report.passed else "FAIL", crit[1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, title = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")
