"""HTTP service exposing a model backend over the scorer wire protocol.

Endpoints (all JSON): ``GET /v1/capabilities``, ``POST /v1/fill``,
``POST /v1/perplexity``, and ``POST /v1/finetune`` (masked models only).
Contract violations surface as HTTP 400 with a detail message.
"""

from __future__ import annotations

import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .finetune import finetune
from .scoring import MaskedModel


class FillRequest(BaseModel):
    sentence: str
    top_n: int = Field(ge=1)
    candidates: list[str] | None = None


class PerplexityRequest(BaseModel):
    sentence: str


class FinetuneRequest(BaseModel):
    triples_train: str
    triples_val: str
    epochs: int = Field(ge=0)


def create_app(backend, checkpoint_dir: str | Path = "checkpoints") -> FastAPI:
    app = FastAPI(title="clozeprobe model server")

    @app.get("/v1/capabilities")
    def capabilities():
        return backend.capabilities()

    @app.post("/v1/fill")
    def fill(request: FillRequest):
        try:
            entries = backend.fill(request.sentence, request.top_n, request.candidates)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"predictions": [{"token": t, "logprob": lp} for t, lp in entries]}

    @app.post("/v1/perplexity")
    def perplexity(request: PerplexityRequest):
        try:
            value = backend.perplexity(request.sentence)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"perplexity": value}

    @app.post("/v1/finetune")
    def run_finetune(request: FinetuneRequest):
        if not isinstance(backend, MaskedModel):
            raise HTTPException(status_code=400, detail="fine-tuning needs a masked model")
        for path in (request.triples_train, request.triples_val):
            if not Path(path).is_file():
                raise HTTPException(status_code=400, detail=f"no such triples file: {path}")
        out_dir = Path(checkpoint_dir) / f"finetune-{int(time.time())}"
        try:
            checkpoint = finetune(
                model_id=backend.model_id,
                triples_train=request.triples_train,
                triples_val=request.triples_val,
                epochs=request.epochs,
                out_dir=out_dir,
                device=str(backend.device),
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"checkpoint": str(checkpoint)}

    return app
