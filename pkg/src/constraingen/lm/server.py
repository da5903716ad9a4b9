"""Reference server for the wire protocol, backed by any local backend."""
from __future__ import annotations

import argparse
import math
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .base import LmBackend
from .errors import OutOfVocabulary


class MetaResponse(BaseModel):
    vocab: list[str]
    bos: int
    eos: int


class LogprobsRequest(BaseModel):
    prefix: list[int]


class LogprobsResponse(BaseModel):
    logprobs: list[Optional[float]]


class TokenizeRequest(BaseModel):
    text: str


class TokenizeResponse(BaseModel):
    ids: list[int]


class DetokenizeRequest(BaseModel):
    ids: list[int]


class DetokenizeResponse(BaseModel):
    text: str


def create_app(backend: LmBackend) -> FastAPI:
    app = FastAPI(title="constraingen LM backend")
    n = len(backend.vocab)

    def check_ids(ids: list[int]) -> None:
        bad = [t for t in ids if not 0 <= t < n]
        if bad:
            raise HTTPException(status_code=422, detail=f"token ids out of range: {bad[:5]}")

    @app.get("/v1/meta", response_model=MetaResponse)
    def meta() -> MetaResponse:
        return MetaResponse(vocab=list(backend.vocab), bos=backend.bos, eos=backend.eos)

    @app.post("/v1/logprobs", response_model=LogprobsResponse)
    def logprobs(req: LogprobsRequest) -> LogprobsResponse:
        check_ids(req.prefix)
        row = backend.next_logprobs(req.prefix)
        return LogprobsResponse(logprobs=[float(v) if math.isfinite(v) else None for v in row])

    @app.post("/v1/tokenize", response_model=TokenizeResponse)
    def tokenize(req: TokenizeRequest) -> TokenizeResponse:
        try:
            return TokenizeResponse(ids=backend.tokenize(req.text))
        except OutOfVocabulary as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.post("/v1/detokenize", response_model=DetokenizeResponse)
    def detokenize(req: DetokenizeRequest) -> DetokenizeResponse:
        check_ids(req.ids)
        return DetokenizeResponse(text=backend.detokenize(req.ids))

    return app


def main(argv: list[str] | None = None) -> None:
    import uvicorn

    from .ngram import build_ngram, load_corpus

    ap = argparse.ArgumentParser(description="Serve an n-gram model over the LM wire protocol.")
    ap.add_argument("--corpus", required=True)
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.1)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    args = ap.parse_args(argv)
    lm = build_ngram(load_corpus(args.corpus), args.order, args.lam)
    uvicorn.run(create_app(lm), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
