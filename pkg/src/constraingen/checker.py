"""Posterior scoring of candidate sequences and cheap constraint-checking heuristics."""
from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .constraints import CnfConstraint, Status, evaluate, words
from .ontology import Gazetteer, Ontology, detect_mentions, violation_probability

__all__ = [
    "ConstraintStat",
    "ScoredCandidate",
    "CheckItem",
    "CheckOutcome",
    "score_posterior",
    "order_constraints",
    "check_until_violation",
    "sample_candidates",
    "lexical_check_items",
    "semantic_check_items",
    "load_stats",
    "save_stats",
    "mention_distances",
]


@dataclass(frozen=True)
class ConstraintStat:
    id: str
    importance: float = 1.0
    violation_freq: float = 0.0
    mean_distance: float = math.inf
    n_obs: int = 0

    def observe(self, violated: bool, distance: float | None = None) -> "ConstraintStat":
        """Fold one observation into the running means."""
        n = self.n_obs + 1
        freq = self.violation_freq + (float(violated) - self.violation_freq) / n
        dist = self.mean_distance
        if distance is not None:
            dist = distance if not math.isfinite(dist) else dist + (distance - dist) / n
        return replace(self, violation_freq=freq, mean_distance=dist, n_obs=n)


def load_stats(path: str | Path) -> list[ConstraintStat]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    out = []
    for cid, d in data.items():
        dist = d.get("mean_distance")
        out.append(ConstraintStat(cid, float(d.get("importance", 1.0)), float(d.get("violation_freq", 0.0)),
                                  math.inf if dist is None else float(dist), int(d.get("n_obs", 0))))
    return out


def save_stats(stats: Sequence[ConstraintStat], path: str | Path) -> None:
    data = {}
    for s in stats:
        d = asdict(s)
        d.pop("id")
        if not math.isfinite(d["mean_distance"]):
            d["mean_distance"] = None
        data[s.id] = d
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ScoredCandidate:
    ids: tuple
    text: str
    lm_logprob: float
    lexical_degree: float
    semantic_degree: float
    violation_degree: float
    posterior_weight: float

    def to_json(self) -> dict:
        return {"text": self.text, "lm_logprob": self.lm_logprob, "lexical_degree": self.lexical_degree,
                "semantic_degree": self.semantic_degree, "violation_degree": self.violation_degree,
                "posterior_weight": self.posterior_weight}


def _default_detok(ids: Sequence) -> str:
    return " ".join(str(t) for t in ids)


def score_posterior(candidates: Sequence[tuple[Sequence, float]], c: CnfConstraint | None,
                    semantic: tuple[Ontology, Gazetteer] | None = None, lam: float = 1.0,
                    detokenize: Callable[[Sequence], str] = _default_detok) -> list[ScoredCandidate]:
    """Reweight candidates by ``exp(logprob - lam * d)`` and normalize.

    ``d`` counts unmet positive and violated forbid clauses, plus the
    semantic violation probability when an ontology is supplied. By
    default ids are taken to be word strings.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    rows = []
    for ids, logprob in candidates:
        text = detokenize(ids)
        toks = words(text)
        lex = 0.0
        if c is not None:
            st = evaluate(toks, c)
            lex = float(sum(s is not Status.MET for s in st.clause_status))
        sem = 0.0
        if semantic is not None:
            sem, _ = violation_probability(toks, *semantic)
        rows.append((tuple(ids), text, float(logprob), lex, sem))
    logits = np.array([lp - lam * (lex + sem) for _, _, lp, lex, sem in rows])
    m = logits.max()
    w = np.exp(logits - m)
    w /= w.sum()
    scored = [ScoredCandidate(ids, text, lp, lex, sem, lex + sem, float(wi))
              for (ids, text, lp, lex, sem), wi in zip(rows, w)]
    order = sorted(range(len(scored)), key=lambda i: (-scored[i].posterior_weight, -scored[i].lm_logprob, i))
    return [scored[i] for i in order]


def order_constraints(stats: Sequence[ConstraintStat]) -> list[int]:
    """Indices of ``stats`` in checking order: most often violated first."""
    return sorted(range(len(stats)),
                  key=lambda i: (-stats[i].violation_freq, -stats[i].importance,
                                 stats[i].mean_distance, stats[i].id))


@dataclass(frozen=True)
class CheckItem:
    """A single checkable constraint; ``check`` returns a description of the
    violation, or None."""

    id: str
    check: Callable[[Sequence[str]], object | None]


@dataclass(frozen=True)
class CheckOutcome:
    violation: object | None
    violated_id: str | None
    checks: int
    truncated: bool


def check_until_violation(toks: Sequence[str], items: Sequence[CheckItem], budget: int) -> CheckOutcome:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    checks = 0
    for item in items:
        if checks == budget:
            return CheckOutcome(None, None, checks, True)
        checks += 1
        found = item.check(toks)
        if found is not None:
            return CheckOutcome(found, item.id, checks, False)
    return CheckOutcome(None, None, checks, False)


def lexical_check_items(c: CnfConstraint, prefix: str = "clause") -> list[CheckItem]:
    """One check per clause of ``c``."""
    items = []
    for i, cl in enumerate(c.clauses):
        single = CnfConstraint((cl,))

        def check(toks: Sequence[str], single: CnfConstraint = single) -> str | None:
            st = evaluate(toks, single).clause_status[0]
            return None if st is Status.MET else st.value

        items.append(CheckItem(f"{prefix}{i}", check))
    return items


def semantic_check_items(o: Ontology, g: Gazetteer) -> list[CheckItem]:
    """One check per Disjoint axiom of ``o``, reporting grounded violations of it."""
    from .ontology import Disjoint, closure

    closed = closure(o)
    items = []
    for ax in o.of_kind(Disjoint):
        covered = {
            d for d in closed.axioms
            if isinstance(d, Disjoint)
            and ((_below(closed, d.a, ax.a) and _below(closed, d.b, ax.b))
                 or (_below(closed, d.a, ax.b) and _below(closed, d.b, ax.a)))
        }

        def check(toks: Sequence[str], covered: set = covered):
            _, vs = violation_probability(toks, o, g)
            hits = [v for v in vs if v.axiom in covered]
            return hits or None

        items.append(CheckItem(f"disjoint:{ax.a}|{ax.b}", check))
    return items


def _below(closed: Ontology, x: str, y: str) -> bool:
    from .ontology import Sub

    return x == y or Sub(x, y) in closed.axioms


def mention_distances(toks: Sequence[str], g: Gazetteer) -> dict[tuple[str, str], float]:
    """Word distance between each pair of co-mentioned referents (closest pair of mentions)."""
    mentions = detect_mentions(toks, g)
    out: dict[tuple[str, str], float] = {}
    for i, a in enumerate(mentions):
        for b in mentions[i + 1:]:
            gap = b.start - a.end
            for ra, _ in a.candidates:
                for rb, _ in b.candidates:
                    key = tuple(sorted((ra, rb)))
                    out[key] = min(out.get(key, math.inf), gap)
    return out


def sample_candidates(candidates: Sequence, k: int, seed: int) -> list:
    """Uniform sample of ``k`` without replacement (order preserved); all when k >= n."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= len(candidates):
        return list(candidates)
    picked = sorted(random.Random(seed).sample(range(len(candidates)), k))
    return [candidates[i] for i in picked]
