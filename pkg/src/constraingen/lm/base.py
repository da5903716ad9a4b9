"""Backend contract shared by every next-token distribution source."""
from __future__ import annotations

import math
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..constraints import words


@runtime_checkable
class LmBackend(Protocol):
    """Token ids are positions in ``vocab``. ``bos`` is never generated."""

    vocab: Sequence[str]
    bos: int
    eos: int
    # True when every token is exactly one normalized word.
    word_level: bool

    def next_logprobs(self, prefix: Sequence[int]) -> np.ndarray: ...

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, ids: Sequence[int]) -> str: ...


def log_softmax(x: np.ndarray) -> np.ndarray:
    finite = x[np.isfinite(x)]
    if finite.size == 0:
        raise ValueError("row has no finite entries")
    m = finite.max()
    with np.errstate(divide="ignore"):
        return x - (m + math.log(np.exp(x - m).sum()))


def sequence_logprob(lm: LmBackend, prompt_ids: Sequence[int], ids: Sequence[int],
                     include_eos: bool = True) -> float:
    """Log-likelihood of ``ids`` after ``prompt_ids`` (plus eos when asked)."""
    prefix = list(prompt_ids)
    total = 0.0
    for t in list(ids) + ([lm.eos] if include_eos else []):
        total += float(lm.next_logprobs(prefix)[t])
        prefix.append(t)
    return total


def generated_words(lm: LmBackend, ids: Sequence[int]) -> list[str]:
    """Normalized words of a token sequence, excluding eos."""
    body = [t for t in ids if t != lm.eos]
    if lm.word_level:
        return [lm.vocab[t] for t in body]
    return words(lm.detokenize(body))
