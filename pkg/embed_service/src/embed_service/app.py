"""HTTP surface: POST /embed and GET /health.

Configuration comes from environment variables:

    EMBED_BACKEND     hash (default) | sentence-transformers
    EMBED_DIFF_MODEL  model id for the code-diff encoder (st backend)
    EMBED_TEXT_MODEL  model id for the text encoder (st backend)
    EMBED_MAX_CHARS   input length cap; longer bodies are truncated and the
                      response is flagged (default 20000)
    EMBED_PORT        port for `python -m embed_service` (default 8876)
"""

from __future__ import annotations

import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .encoders import build_encoders

DEFAULT_MAX_CHARS = 20_000


class EmbedRequest(BaseModel):
    kind: str = Field(description="code_diff or text")
    body: str


class EmbedResponse(BaseModel):
    vector: list[float]
    dim: int
    model_id: str
    truncated: bool


class HealthResponse(BaseModel):
    status: str
    models: dict[str, str]
    dims: dict[str, int]


def create_app(
    backend: str | None = None,
    max_chars: int | None = None,
) -> FastAPI:
    backend = backend or os.environ.get("EMBED_BACKEND", "hash")
    cap = max_chars or int(os.environ.get("EMBED_MAX_CHARS", DEFAULT_MAX_CHARS))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.encoders = build_encoders(
            backend,
            diff_model=os.environ.get("EMBED_DIFF_MODEL"),
            text_model=os.environ.get("EMBED_TEXT_MODEL"),
        )
        app.state.ready = True
        yield

    app = FastAPI(
        title="embed-service",
        version="0.1.0",
        description="Normalized diff and text embeddings over HTTP JSON.",
        lifespan=lifespan,
    )

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        if not getattr(app.state, "ready", False):
            raise HTTPException(status_code=503, detail="model not ready")
        if not request.body:
            raise HTTPException(status_code=400, detail="body must be non-empty")
        encoder = app.state.encoders.get(request.kind)
        if encoder is None:
            raise HTTPException(
                status_code=400,
                detail=f"unknown kind {request.kind!r}; expected code_diff or text",
            )
        truncated = len(request.body) > cap
        body = request.body[:cap] if truncated else request.body
        vector = encoder.encode(body)
        return EmbedResponse(
            vector=[float(x) for x in vector],
            dim=int(vector.shape[0]),
            model_id=encoder.model_id,
            truncated=truncated,
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        if not getattr(app.state, "ready", False):
            return HealthResponse(status="loading", models={}, dims={})
        encoders = app.state.encoders
        return HealthResponse(
            status="ok",
            models={kind: enc.model_id for kind, enc in encoders.items()},
            dims={kind: enc.dim for kind, enc in encoders.items()},
        )

    return app


app = create_app()
