"""The embedding service: GET /health and POST /embed.

Remote-provider contract: the request carries {"texts": [...]} and the
response carries {"provider_id", "dim", "vectors"} with one unit-norm vector
per text. Both endpoints answer 503 until the model has loaded; malformed
bodies get 400; batches beyond the limit get 413.
"""

from __future__ import annotations

import argparse
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .models import HASH_MODEL_NAME, EmbeddingModel, load_model

DEFAULT_BATCH_LIMIT = 128


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(
    model_name: str = HASH_MODEL_NAME,
    batch_limit: int = DEFAULT_BATCH_LIMIT,
    *,
    defer_load: bool = False,
) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if not defer_load:
            app.state.model = load_model(model_name)
        yield

    app = FastAPI(title="embedsvc", lifespan=lifespan)
    app.state.model = None
    app.state.model_name = model_name
    app.state.batch_limit = batch_limit

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def provider_id(model: EmbeddingModel) -> str:
        return f"embedsvc:{model.name}"

    @app.get("/health")
    async def health():
        model: EmbeddingModel | None = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "provider_id": provider_id(model), "dim": model.dim}

    @app.post("/embed")
    async def embed(request: EmbedRequest):
        model: EmbeddingModel | None = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        if not request.texts:
            return JSONResponse(
                status_code=400, content={"detail": "texts must be a non-empty list"}
            )
        if len(request.texts) > app.state.batch_limit:
            return JSONResponse(
                status_code=413,
                content={
                    "detail": f"batch of {len(request.texts)} exceeds the limit of "
                    f"{app.state.batch_limit}"
                },
            )
        vectors = model.encode(request.texts)
        return {"provider_id": provider_id(model), "dim": model.dim, "vectors": vectors}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embedsvc", description=__doc__)
    parser.add_argument("--model", default=HASH_MODEL_NAME, help="embedding model name")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8091)
    parser.add_argument("--batch-limit", type=int, default=DEFAULT_BATCH_LIMIT)
    args = parser.parse_args(argv)

    import uvicorn

    uvicorn.run(
        create_app(args.model, args.batch_limit), host=args.host, port=args.port
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
