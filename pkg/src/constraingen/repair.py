"""Greedy edit-based repair of generated word sequences."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .checker import ScoredCandidate
from .constraints import CnfConstraint, Status, evaluate, is_satisfied, words
from .lm.base import LmBackend, sequence_logprob
from .lm.errors import BackendRequestError, OutOfVocabulary

__all__ = ["EditOp", "RepairResult", "apply_edits", "repair_lexical", "reprompt_payload",
           "select_repair_candidates", "word_ids"]

INSERT, DELETE, REPLACE = "insert", "delete", "replace"


@dataclass(frozen=True)
class EditOp:
    kind: str
    pos: int
    word: str | None = None

    def apply(self, seq: list[str]) -> list[str]:
        out = list(seq)
        if self.kind == INSERT:
            if not 0 <= self.pos <= len(out):
                raise IndexError(f"insert position {self.pos} out of range")
            out.insert(self.pos, self.word)
        elif self.kind == DELETE:
            if not 0 <= self.pos < len(out):
                raise IndexError(f"delete position {self.pos} out of range")
            del out[self.pos]
        elif self.kind == REPLACE:
            if not 0 <= self.pos < len(out):
                raise IndexError(f"replace position {self.pos} out of range")
            out[self.pos] = self.word
        else:
            raise ValueError(f"unknown edit kind {self.kind!r}")
        return out

    def to_json(self) -> dict:
        d = {"kind": self.kind, "pos": self.pos}
        if self.word is not None:
            d["word"] = self.word
        return d


def apply_edits(seq: Sequence[str], edits: Sequence[EditOp]) -> list[str]:
    out = list(seq)
    for e in edits:
        out = e.apply(out)
    return out


@dataclass(frozen=True)
class RepairResult:
    words: list[str]
    edits: list[EditOp]
    satisfied: bool
    lm_logprob: float

    def to_json(self) -> dict:
        return {"text": " ".join(self.words), "words": self.words, "edits": [e.to_json() for e in self.edits],
                "n_edits": len(self.edits), "satisfied": self.satisfied,
                "lm_logprob": self.lm_logprob if math.isfinite(self.lm_logprob) else None}


def word_ids(lm: LmBackend, seq: Sequence[str]) -> tuple[list[int], int]:
    """Token ids for ``seq`` and the number of words the backend could not encode."""
    ids: list[int] = []
    missing = 0
    for w in seq:
        try:
            ids.extend(lm.tokenize(w))
        except (OutOfVocabulary, BackendRequestError):
            missing += 1
    return ids, missing


def _loglik(lm: LmBackend, seq: Sequence[str]) -> float:
    ids, _ = word_ids(lm, seq)
    return sequence_logprob(lm, [], ids)


def _replacement(lm: LmBackend, prefix: Sequence[str], banned: set[str]) -> str | None:
    ids, _ = word_ids(lm, prefix)
    lp = lm.next_logprobs(ids)
    for tok in np.argsort(-lp, kind="stable"):
        tok = int(tok)
        if tok == lm.eos or not math.isfinite(lp[tok]):
            continue
        cand = words(lm.detokenize([tok]))
        if len(cand) == 1 and cand[0] not in banned:
            return cand[0]
    return None


def repair_lexical(seq: Sequence[str], c: CnfConstraint, lm: LmBackend, budget: int) -> RepairResult:
    """Fix ``seq`` one clause at a time.

    Offending forbid forms are deleted (replaced by the backend's preferred
    word when the deletion would leave nothing). Then, for the first unmet
    positive clause, every (form, position) insertion is scored by the
    log-likelihood of the whole repaired sequence and the best one is
    applied; ties go to the lowest position, then the earliest form. Each
    fixed clause costs one edit, so the result is minimal per clause but
    not necessarily globally.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    cur = [w.lower() for w in seq]
    edits: list[EditOp] = []
    forbidden = c.forbidden_forms()
    state = evaluate(cur, c)
    stuck = False
    while not is_satisfied(state) and len(edits) < budget and not stuck:
        violated = [i for i, s in enumerate(state.clause_status) if s is Status.VIOLATED]
        if violated:
            bad = set(c.clauses[violated[0]].forms)
            pos = next(i for i, w in enumerate(cur) if w in bad)
            if len(cur) == 1:
                alt = _replacement(lm, [], forbidden)
                if alt is None:
                    edit = EditOp(DELETE, pos)
                else:
                    edit = EditOp(REPLACE, pos, alt)
            else:
                edit = EditOp(DELETE, pos)
        else:
            idx = next(i for i, s in enumerate(state.clause_status) if s is Status.UNMET)
            edit = _best_insertion(cur, [f for f in c.clauses[idx].forms if f not in forbidden], lm)
            if edit is None:
                stuck = True
                continue
        cur = edit.apply(cur)
        edits.append(edit)
        state = evaluate(cur, c)
    return RepairResult(cur, edits, is_satisfied(state), _loglik(lm, cur))


def _best_insertion(cur: list[str], forms: Sequence[str], lm: LmBackend) -> EditOp | None:
    best_key = None
    best = None
    known = {}
    for f in forms:
        _, missing = word_ids(lm, [f])
        known[f] = missing == 0
    for pos in range(len(cur) + 1):
        for fi, f in enumerate(forms):
            score = _loglik(lm, cur[:pos] + [f] + cur[pos:])
            key = (known[f], score)
            if best_key is None or key > best_key:
                best_key = key
                best = EditOp(INSERT, pos, f)
    return best


def reprompt_payload(question: str, repaired: str, original: str = "") -> str:
    """Prompt asking the model to turn a repaired draft into a fluent answer."""
    lines = [
        f"Question: {question}",
        "",
        f"Draft answer: {repaired}",
        "",
        "Rewrite the draft answer as one fluent, coherent sentence that answers the question "
        "and keeps every word the draft uses to meet its constraints.",
    ]
    if original:
        lines.append(f'Do not repeat the original draft, which was inconsistent: "{original}"')
    lines += ["", "Answer:"]
    return "\n".join(lines)


def select_repair_candidates(scored: Sequence[ScoredCandidate], m: int) -> list[ScoredCandidate]:
    if m < 1:
        raise ValueError("m must be >= 1")
    ranked = sorted(scored, key=lambda s: (-s.posterior_weight, -s.lm_logprob, tuple(map(str, s.ids))))
    return ranked[:m]
