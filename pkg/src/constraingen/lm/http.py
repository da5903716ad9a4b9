"""Client for a remote backend speaking the JSON wire protocol.

    GET  /v1/meta        -> {"vocab": [...], "bos": id, "eos": id}
    POST /v1/logprobs    {"prefix": [ids]} -> {"logprobs": [...]}
    POST /v1/tokenize    {"text": "..."}   -> {"ids": [...]}
    POST /v1/detokenize  {"ids": [...]}    -> {"text": "..."}

Log-probabilities of impossible tokens travel as ``null`` because JSON has
no infinity.
"""
from __future__ import annotations

import math
import threading
from typing import Any, Sequence

import httpx
import numpy as np

from .errors import (
    BackendRequestError,
    BackendTimeout,
    BackendUnavailable,
    MalformedResponse,
)

NORMALIZATION_TOL = 1e-6


class HttpLm:
    word_level = False

    def __init__(self, base_url: str, timeout: float = 10.0, transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._client = httpx.Client(base_url=self.base_url, timeout=timeout, transport=transport)
        self._meta: dict[str, Any] | None = None
        self._lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpLm":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- transport ------------------------------------------------------------
    def _call(self, method: str, path: str, payload: dict | None = None) -> Any:
        try:
            if method == "GET":
                resp = self._client.get(path)
            else:
                resp = self._client.post(path, json=payload)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"{method} {path}: timed out after {self.timeout}s") from exc
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"{method} {path}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise BackendUnavailable(f"{method} {path}: HTTP {resp.status_code}", resp.status_code)
        if resp.status_code != 200:
            raise BackendRequestError(f"{method} {path}: HTTP {resp.status_code}: {resp.text[:200]}",
                                      resp.status_code)
        try:
            body = resp.json()
        except ValueError as exc:
            raise MalformedResponse(f"{method} {path}: body is not JSON") from exc
        if not isinstance(body, dict):
            raise MalformedResponse(f"{method} {path}: expected a JSON object")
        return body

    @staticmethod
    def _field(body: dict, key: str, path: str) -> Any:
        if key not in body:
            raise MalformedResponse(f"{path}: missing field {key!r}")
        return body[key]

    # -- meta -----------------------------------------------------------------
    @property
    def meta(self) -> dict[str, Any]:
        if self._meta is None:
            with self._lock:
                if self._meta is None:
                    self._meta = self._fetch_meta()
        return self._meta

    def _fetch_meta(self) -> dict[str, Any]:
        body = self._call("GET", "/v1/meta")
        vocab = self._field(body, "vocab", "/v1/meta")
        bos = self._field(body, "bos", "/v1/meta")
        eos = self._field(body, "eos", "/v1/meta")
        if not isinstance(vocab, list) or not vocab or not all(isinstance(t, str) for t in vocab):
            raise MalformedResponse("/v1/meta: vocab must be a non-empty list of strings")
        for name, v in (("bos", bos), ("eos", eos)):
            if not _is_int(v):
                raise MalformedResponse(f"/v1/meta: {name} must be an integer")
        if not 0 <= eos < len(vocab):
            raise MalformedResponse("/v1/meta: eos outside vocabulary")
        return {"vocab": tuple(vocab), "bos": bos, "eos": eos}

    @property
    def vocab(self) -> tuple[str, ...]:
        return self.meta["vocab"]

    @property
    def bos(self) -> int:
        return self.meta["bos"]

    @property
    def eos(self) -> int:
        return self.meta["eos"]

    # -- protocol calls -------------------------------------------------------
    def next_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        n = len(self.vocab)
        body = self._call("POST", "/v1/logprobs", {"prefix": [int(t) for t in prefix]})
        raw = self._field(body, "logprobs", "/v1/logprobs")
        if not isinstance(raw, list) or len(raw) != n:
            raise MalformedResponse(f"/v1/logprobs: expected a list of length {n}")
        row = np.empty(n)
        for i, v in enumerate(raw):
            if v is None:
                row[i] = -math.inf
            elif isinstance(v, (int, float)) and not isinstance(v, bool) and not math.isnan(v) and v <= 0:
                row[i] = float(v)
            else:
                raise MalformedResponse(f"/v1/logprobs: entry {i} is not a log-probability: {v!r}")
        total = float(np.exp(row).sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise MalformedResponse(f"/v1/logprobs: row sums to {total}, not 1")
        return row

    def tokenize(self, text: str) -> list[int]:
        body = self._call("POST", "/v1/tokenize", {"text": text})
        ids = self._field(body, "ids", "/v1/tokenize")
        n = len(self.vocab)
        if not isinstance(ids, list) or not all(_is_int(t) and 0 <= t < n for t in ids):
            raise MalformedResponse("/v1/tokenize: ids must be in-vocabulary integers")
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        body = self._call("POST", "/v1/detokenize", {"ids": [int(t) for t in ids]})
        text = self._field(body, "text", "/v1/detokenize")
        if not isinstance(text, str):
            raise MalformedResponse("/v1/detokenize: text must be a string")
        return text


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)
