"""Backend whose rows are given explicitly per prefix (small test instances)."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..constraints import words


class TableLm:
    """Rows keyed by the full prefix.

    Prefixes missing from ``rows`` use ``default`` if given; otherwise,
    when ``seed`` is set, a Dirichlet(1) row drawn from an RNG keyed on
    ``(seed, prefix)``, so every prefix has a fixed random distribution.
    """

    word_level = True
    bos = -1

    def __init__(self, vocab: Sequence[str], eos: int,
                 rows: Mapping[tuple[int, ...], Sequence[float]] | None = None,
                 default: Sequence[float] | None = None, seed: int | None = None):
        self.vocab = list(vocab)
        self.eos = eos
        self._ids = {w: i for i, w in enumerate(self.vocab)}
        self._rows = {tuple(k): self._log(v) for k, v in (rows or {}).items()}
        self._default = None if default is None else self._log(default)
        self._seed = seed
        if self._default is None and seed is None and not self._rows:
            raise ValueError("TableLm needs rows, a default row or a seed")

    def _log(self, probs: Sequence[float]) -> np.ndarray:
        p = np.asarray(probs, dtype=float)
        if p.shape != (len(self.vocab),) or (p < 0).any():
            raise ValueError("row must be a non-negative vector over the vocabulary")
        p = p / p.sum()
        with np.errstate(divide="ignore"):
            return np.log(p)

    def next_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        key = tuple(prefix)
        if key in self._rows:
            return self._rows[key]
        if self._default is not None:
            return self._default
        if self._seed is None:
            raise KeyError(f"no row for prefix {key}")
        rng = np.random.default_rng([self._seed, len(key)] + [t + 1 for t in key])
        row = self._log(rng.dirichlet(np.ones(len(self.vocab))))
        self._rows[key] = row
        return row

    def tokenize(self, text: str) -> list[int]:
        from .errors import OutOfVocabulary

        out = []
        for w in words(text):
            if w not in self._ids:
                raise OutOfVocabulary(w)
            out.append(self._ids[w])
        return out

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab[i] for i in ids if i != self.eos)
