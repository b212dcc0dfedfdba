import json

import httpx
import pytest

from citerag.corpus import Document
from citerag.retrieval import (CallableScorer, HierarchicalRetriever, HttpCrossEncoderScorer,
                               InvertedIndex, LexicalOverlapScorer, RankedHit, RerankError,
                               ReplayScorer, RrfRetriever, ScorerError, hierarchical_retrieve,
                               rerank, rrf_fuse)


class MemCorpus:
    def __init__(self, docs):
        self.docs = {d.doc_id: d for d in docs}

    def get_document(self, doc_id):
        return self.docs[doc_id]

    def __iter__(self):
        return iter(self.docs.values())


def graded_world():
    # doc dNN contains "alpha" NN times, so BM25 rank follows NN descending
    docs = [Document(f"d{i:02d}", "", " ".join(["alpha"] * i + ["pad"] * (12 - i)))
            for i in range(1, 9)]
    return InvertedIndex.build(docs), MemCorpus(docs)


def rank_scorer(index, query, sign):
    base = {h.doc_id: h.rank for h in index.search(query, 1000)}
    return CallableScorer(lambda q, passages: [sign * base[d] for d, _ in passages])


def test_identity_scorer_keeps_bm25_order():
    index, corpus = graded_world()
    got = hierarchical_retrieve(index, corpus, "alpha", 5, 5, rank_scorer(index, "alpha", -1))
    assert [h.doc_id for h in got] == [h.doc_id for h in index.search("alpha", 5)]


def test_inverting_scorer_over_depth_five():
    index, corpus = graded_world()
    bm25 = index.search("alpha", 5)
    got = hierarchical_retrieve(index, corpus, "alpha", 5, 2, rank_scorer(index, "alpha", 1))
    assert [h.doc_id for h in got] == [bm25[4].doc_id, bm25[3].doc_id]
    assert [h.rank for h in got] == [1, 2]


def test_fewer_docs_than_k():
    docs = [Document("x", "", "alpha"), Document("y", "", "alpha beta")]
    index, corpus = InvertedIndex.build(docs), MemCorpus(docs)
    got = hierarchical_retrieve(index, corpus, "alpha", 10, 3, LexicalOverlapScorer())
    assert sorted(h.doc_id for h in got) == ["x", "y"]


def test_k_above_depth_rejected():
    index, corpus = graded_world()
    with pytest.raises(ValueError):
        hierarchical_retrieve(index, corpus, "alpha", 2, 3, LexicalOverlapScorer())


def test_single_candidate_passes_through():
    index, corpus = graded_world()
    pool = index.search("alpha", 1)
    assert [h.doc_id for h in rerank("alpha", pool, LexicalOverlapScorer(), corpus)] == \
        [pool[0].doc_id]


def test_failing_scorer_carries_candidates():
    index, corpus = graded_world()
    pool = index.search("alpha", 4)

    def boom(q, p):
        raise RuntimeError("model server down")

    with pytest.raises(RerankError) as info:
        rerank("alpha", pool, CallableScorer(boom), corpus)
    assert info.value.candidates == pool


def test_wrong_score_count_is_rerank_error():
    index, corpus = graded_world()
    pool = index.search("alpha", 3)
    with pytest.raises(RerankError):
        rerank("alpha", pool, CallableScorer(lambda q, p: [1.0]), corpus)


def test_retriever_falls_back_unless_strict():
    index, corpus = graded_world()
    bad = CallableScorer(lambda q, p: [])
    lenient = HierarchicalRetriever(index, corpus, bad, first_stage_depth=5)
    assert lenient.retrieve("alpha", 3) == index.search("alpha", 5)[:3]
    with pytest.raises(RerankError):
        HierarchicalRetriever(index, corpus, bad, 5, strict=True).retrieve("alpha", 3)


def test_lexical_scorer_is_jaccard():
    s = LexicalOverlapScorer().score("a b c", [("1", "b c d"), ("2", "x")])
    assert s == [pytest.approx(2 / 4), 0.0]


def test_rrf_hand_computed():
    a = [RankedHit("A", 9.0, 1), RankedHit("B", 8.0, 2)]
    b = [RankedHit("B", 0.9, 1), RankedHit("A", 0.8, 2)]
    fused = rrf_fuse([a, b], k_rrf=60)
    assert {h.doc_id: h.score for h in fused} == pytest.approx(
        {"A": 1 / 61 + 1 / 62, "B": 1 / 62 + 1 / 61}, abs=1e-12)
    assert [h.doc_id for h in fused] == ["A", "B"]


def test_rrf_document_in_one_list_only():
    fused = rrf_fuse([[RankedHit("A", 1, 1)], [RankedHit("B", 1, 1), RankedHit("C", 1, 2)]],
                     k_rrf=60, limit=2)
    assert [(h.doc_id, h.score) for h in fused] == [("A", 1 / 61), ("B", 1 / 61)]


def test_rrf_retriever_fuses_both_lists():
    index, corpus = graded_world()
    from citerag.retrieval import Bm25Retriever
    inv = HierarchicalRetriever(index, corpus, rank_scorer(index, "alpha", 1), 8)
    fused = RrfRetriever(Bm25Retriever(index), inv, k_rrf=60, depth=8).retrieve("alpha", 8)
    # dNN sits at BM25 rank 9-NN and reranked rank NN
    for h in fused:
        n = int(h.doc_id[1:])
        assert h.score == pytest.approx(1 / (60 + 9 - n) + 1 / (60 + n), abs=1e-12)


def _cross_encoder(log):
    def handler(request: httpx.Request):
        body = json.loads(request.content)
        log.append(body)
        return httpx.Response(200, json={"scores": [float(len(p)) for p in body["passages"]]})
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_http_scorer_batches_and_logs(tmp_path):
    sent = []
    path = tmp_path / "rerank.jsonl"
    scorer = HttpCrossEncoderScorer("http://ce/score", batch_size=2, max_concurrency=2,
                                    log_path=path, client=_cross_encoder(sent))
    passages = [("a", "x"), ("b", "xxx"), ("c", "xx")]
    assert scorer.score("q", passages) == [1.0, 3.0, 2.0]
    assert sorted(len(b["passages"]) for b in sent) == [1, 2]
    replay = ReplayScorer(path)
    assert replay.score("q", passages[:2]) == [1.0, 3.0]
    with pytest.raises(ScorerError):
        replay.score("other", passages[:2])


def test_http_scorer_rejects_short_response():
    client = httpx.Client(transport=httpx.MockTransport(
        lambda r: httpx.Response(200, json={"scores": [1.0]})))
    scorer = HttpCrossEncoderScorer("http://ce/score", client=client)
    with pytest.raises(ScorerError):
        scorer.score("q", [("a", "x"), ("b", "y")])


def test_http_scorer_server_error():
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(503)))
    with pytest.raises(ScorerError):
        HttpCrossEncoderScorer("http://ce/score", client=client).score("q", [("a", "x")])
