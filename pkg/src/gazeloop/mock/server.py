"""Local HTTP endpoints over the mock tool suite, wire-compatible with the
provider-shaped clients, for fully offline integration runs."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..toolkit import OutOfBounds, ToolFailure
from .tools import MockToolSuite


class ImageQuery(BaseModel):
    image_url: str


class TextQuery(BaseModel):
    query: str


class ReadRequest(BaseModel):
    url: str


class GroundRequest(BaseModel):
    image_ref: str
    description: str


class CropRequest(BaseModel):
    image_ref: str
    bbox: list[float]


class UploadRequest(BaseModel):
    image_ref: str


class ChatRequest(BaseModel):
    messages: list[dict]


def _failure_response(failure: ToolFailure) -> JSONResponse:
    return JSONResponse(
        status_code=503,
        content={
            "tool": failure.tool,
            "cause": failure.cause.value,
            "retryable": failure.retryable,
            "detail": failure.detail,
        },
    )


def build_app(suite: MockToolSuite) -> FastAPI:
    app = FastAPI(title="gazeloop mock tools")

    @app.get("/health")
    def health():
        return {"status": "ok", "corpus_version": suite.corpus.version}

    @app.post("/search/image")
    def search_image(req: ImageQuery):
        try:
            pairs = suite.provider.search_image(req.image_url)
        except ToolFailure as failure:
            return _failure_response(failure)
        return {"results": [{"thumbnail": t, "title": title} for t, title in pairs]}

    @app.post("/search/text")
    def search_text(req: TextQuery):
        try:
            pairs = suite.provider.search_text(req.query)
        except ToolFailure as failure:
            return _failure_response(failure)
        return {"results": [{"url": u, "title": t} for u, t in pairs]}

    @app.post("/read")
    def read(req: ReadRequest):
        try:
            return {"text": suite.reader.read(req.url)}
        except ToolFailure as failure:
            return _failure_response(failure)

    @app.post("/ground")
    def ground(req: GroundRequest):
        try:
            boxes = suite.ground(req.image_ref, req.description)
        except ToolFailure as failure:
            return _failure_response(failure)
        return {"boxes": [{"bbox": list(b.bbox), "score": b.score, "query": b.query} for b in boxes]}

    @app.post("/crop")
    def crop(req: CropRequest):
        try:
            return {"image_ref": suite.crop(req.image_ref, tuple(req.bbox))}
        except OutOfBounds as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except ToolFailure as failure:
            return _failure_response(failure)

    @app.post("/upload")
    def upload(req: UploadRequest):
        try:
            return {"url": suite.upload(req.image_ref)}
        except ToolFailure as failure:
            return _failure_response(failure)

    @app.post("/chat")
    def chat(req: ChatRequest):
        return {"content": suite.chat.complete(req.messages)}

    return app


def serve(suite: MockToolSuite, host: str = "127.0.0.1", port: int = 8763) -> None:
    import uvicorn

    uvicorn.run(build_app(suite), host=host, port=port, log_level="warning")
