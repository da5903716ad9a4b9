"""Word-level n-gram model with add-lambda smoothing, used as a deterministic mock."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..constraints import words
from .errors import OutOfVocabulary

EOS = "</s>"
BOS_ID = -1


@dataclass(frozen=True)
class Encoding:
    ids: list[int]
    oov: list[str]


class NgramLm:
    """P(t | ctx) = (count(ctx, t) + lam) / (count(ctx) + lam * |V|).

    ``|V|`` counts every generable token (eos included, bos excluded). A
    context with no mass at all (unseen with ``lam == 0``) falls back to
    the uniform row.
    """

    word_level = True

    def __init__(self, order: int, lam: float, vocab: Sequence[str],
                 counts: dict[tuple[int, ...], Counter]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        self.order = order
        self.lam = float(lam)
        self.vocab = list(vocab)
        self.eos = len(self.vocab) - 1
        self.bos = BOS_ID
        self._ids = {w: i for i, w in enumerate(self.vocab)}
        self._counts = counts
        self._rows: dict[tuple[int, ...], np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.vocab)

    def token_id(self, word: str) -> int | None:
        return self._ids.get(word)

    def context(self, prefix: Sequence[int]) -> tuple[int, ...]:
        k = self.order - 1
        if k == 0:
            return ()
        padded = [self.bos] * k + list(prefix)
        return tuple(padded[len(padded) - k:])

    def prob(self, token: int, ctx: tuple[int, ...]) -> float:
        counter = self._counts.get(ctx, Counter())
        total = sum(counter.values())
        denom = total + self.lam * len(self.vocab)
        if denom == 0:
            return 1.0 / len(self.vocab)
        return (counter.get(token, 0) + self.lam) / denom

    def next_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        ctx = self.context(prefix)
        row = self._rows.get(ctx)
        if row is None:
            counter = self._counts.get(ctx, Counter())
            counts = np.zeros(len(self.vocab))
            for t, c in counter.items():
                counts[t] = c
            denom = counts.sum() + self.lam * len(self.vocab)
            if denom == 0:
                probs = np.full(len(self.vocab), 1.0 / len(self.vocab))
            else:
                probs = (counts + self.lam) / denom
            with np.errstate(divide="ignore"):
                row = np.log(probs)
            row.setflags(write=False)
            self._rows[ctx] = row
        return row

    def encode(self, text: str, strict: bool = True) -> Encoding:
        ids, oov = [], []
        for w in words(text):
            i = self._ids.get(w)
            if i is None or i == self.eos:
                if strict:
                    raise OutOfVocabulary(w)
                oov.append(w)
                continue
            ids.append(i)
        return Encoding(ids, oov)

    def tokenize(self, text: str) -> list[int]:
        return self.encode(text, strict=True).ids

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab[i] for i in ids if i != self.eos)

    def sentence_logprob(self, sentence: str) -> float:
        prefix: list[int] = []
        total = 0.0
        for t in self.tokenize(sentence) + [self.eos]:
            p = self.prob(t, self.context(prefix))
            total += math.log(p) if p > 0 else -math.inf
            prefix.append(t)
        return total


def build_ngram(corpus: Iterable[str], order: int, lam: float) -> NgramLm:
    """Count ``order``-grams over bos-padded sentences, each ending in eos."""
    if order < 1:
        raise ValueError("order must be >= 1")
    sentences = [words(s) for s in corpus]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise ValueError("empty corpus")
    vocab = sorted({w for s in sentences for w in s} - {EOS}) + [EOS]
    ids = {w: i for i, w in enumerate(vocab)}
    eos = len(vocab) - 1
    k = order - 1
    counts: dict[tuple[int, ...], Counter] = defaultdict(Counter)
    for s in sentences:
        toks = [BOS_ID] * k + [ids[w] for w in s] + [eos]
        for i in range(k, len(toks)):
            counts[tuple(toks[i - k:i])][toks[i]] += 1
    return NgramLm(order, lam, vocab, dict(counts))


def load_corpus(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh]
    return [line for line in lines if line]
