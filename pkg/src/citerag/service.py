"""HTTP endpoint serving cited answers.

``POST /v1/answer``      {"question": str} -> polar answer and cited statements
``GET  /v1/doc/{doc_id}`` the stored document
``GET  /healthz``        liveness
"""
from __future__ import annotations

import hashlib
import logging

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .corpus import DocumentNotFound
from .evaluation.datasets import QAItem
from .answer import PolarAnswer
from .llm import LLMError
from .pipeline import CitationPipeline

logger = logging.getLogger(__name__)


class AnswerRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    question: str = Field(min_length=1)


def create_app(pipeline: CitationPipeline) -> FastAPI:
    """Build the app around a ready pipeline. Requests share no state."""
    app = FastAPI(title="citerag", version="0.1.0")
    corpus = pipeline.corpus

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "bad_request", "detail": str(exc.errors()[:3])})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "documents": len(corpus)}

    @app.get("/v1/doc/{doc_id}")
    def get_doc(doc_id: str):
        try:
            doc = corpus.get_document(doc_id)
        except DocumentNotFound:
            raise HTTPException(status_code=404, detail=f"unknown doc_id {doc_id}") from None
        return {"doc_id": doc.doc_id, "title": doc.title, "abstract": doc.abstract_text}

    @app.post("/v1/answer")
    def answer(body: AnswerRequest):
        qid = "q-" + hashlib.sha256(body.question.encode("utf-8")).hexdigest()[:12]
        item = QAItem(qid, body.question, PolarAnswer.UNKNOWN)
        try:
            result = pipeline.run(item)
        except LLMError as exc:
            logger.error("upstream LLM failure: %s", exc)
            raise HTTPException(status_code=502, detail=f"upstream LLM failure: {exc}") from None
        ans = result.answer
        return {
            "question_id": qid,
            "polar": ans.polar.value,
            "statements": [
                {"text": st.text,
                 "citations": [{"doc_id": d, "title": corpus.get_document(d).title}
                               for d in st.citations]}
                for st in ans.statements
            ],
        }

    return app


def serve(pipeline: CitationPipeline, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    uvicorn.run(create_app(pipeline), host=host, port=port, log_level="info")
