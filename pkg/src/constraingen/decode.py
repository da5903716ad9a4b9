"""Greedy, beam, penalty-grouped constrained beam and masked SMC decoding.

All search is deterministic: ties go to the lowest token id (and, across
hypotheses, to the lexicographically smallest generated id sequence), and
the SMC sampler consumes one seeded RNG stream in fixed particle order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constraints import (
    CnfConstraint,
    SatisfactionState,
    Status,
    advance,
    coverage,
    evaluate,
    initial_state,
    is_satisfied,
    unmet_count,
    words,
)
from .lm.base import LmBackend
from .lm.errors import BackendRequestError, OutOfVocabulary

__all__ = [
    "DecodeConfig",
    "Hypothesis",
    "Particle",
    "DecodeError",
    "InfeasibleConstraintError",
    "greedy",
    "beam",
    "constrained_beam",
    "smc",
    "ess",
]


class DecodeError(RuntimeError):
    pass


class InfeasibleConstraintError(DecodeError):
    pass


@dataclass(frozen=True)
class DecodeConfig:
    max_new_tokens: int = 20
    beam_size: int = 8
    alpha: float = 2.0
    n_particles: int = 8
    ess_threshold: float = 0.5
    seed: int = 0
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.max_new_tokens < 0:
            raise ValueError("max_new_tokens must be >= 0")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not 0 < self.ess_threshold <= 1:
            raise ValueError("ess_threshold must lie in (0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]
    prompt_len: int
    logprob: float
    state: SatisfactionState | None = None
    finished: bool = False
    score: float = 0.0

    @property
    def generated(self) -> tuple[int, ...]:
        return self.ids[self.prompt_len:]

    def text(self, lm: LmBackend) -> str:
        return lm.detokenize([t for t in self.generated if t != lm.eos])


@dataclass(frozen=True)
class Particle:
    ids: tuple[int, ...]
    prompt_len: int
    log_weight: float
    state: SatisfactionState
    alive: bool = True
    finished: bool = False
    logprob: float = 0.0
    forced: tuple[int, ...] = field(default=(), repr=False)

    @property
    def generated(self) -> tuple[int, ...]:
        return self.ids[self.prompt_len:]


# -- state tracking -----------------------------------------------------------

class _Tracker:
    """Updates a SatisfactionState as tokens are appended."""

    def __init__(self, lm: LmBackend, c: CnfConstraint | None):
        self.lm = lm
        self.c = c

    def initial(self) -> SatisfactionState | None:
        return None if self.c is None else initial_state(self.c)

    def step(self, state: SatisfactionState | None, generated: Sequence[int], tok: int) -> SatisfactionState | None:
        if self.c is None or tok == self.lm.eos:
            return state
        if self.lm.word_level:
            return advance(state, self.lm.vocab[tok], self.c)
        body = [t for t in list(generated) + [tok] if t != self.lm.eos]
        return evaluate(words(self.lm.detokenize(body)), self.c)


def _changing_tokens(lm: LmBackend, c: CnfConstraint | None) -> np.ndarray | None:
    """Token ids that can alter satisfaction, or None if unknown (subword backends)."""
    if c is None:
        return np.array([], dtype=int)
    if not lm.word_level:
        return None
    index = {w: i for i, w in enumerate(lm.vocab)}
    ids = sorted({index[f] for cl in c.clauses for f in cl.forms if f in index})
    return np.array(ids, dtype=int)


def _top_tokens(lp: np.ndarray, k: int) -> np.ndarray:
    order = np.argsort(-lp, kind="stable")[:k]
    return order[np.isfinite(lp[order])]


# -- greedy / beam --------------------------------------------------------------

def greedy(lm: LmBackend, prompt_ids: Sequence[int], cfg: DecodeConfig,
           constraint: CnfConstraint | None = None) -> Hypothesis:
    tracker = _Tracker(lm, constraint)
    ids = list(prompt_ids)
    state = tracker.initial()
    total = 0.0
    finished = False
    for _ in range(cfg.max_new_tokens):
        lp = lm.next_logprobs(ids)
        tok = int(np.argmax(lp))  # first maximum = lowest id
        total += float(lp[tok])
        state = tracker.step(state, ids[len(prompt_ids):], tok)
        ids.append(tok)
        if tok == lm.eos:
            finished = True
            break
    return Hypothesis(tuple(ids), len(prompt_ids), total, state, finished, total)


def _rank_key(h: Hypothesis) -> tuple:
    return (-h.score, h.generated)


def beam(lm: LmBackend, prompt_ids: Sequence[int], cfg: DecodeConfig,
         constraint: CnfConstraint | None = None) -> list[Hypothesis]:
    """Plain beam search; finished hypotheses are returned with the last frontier,
    ranked by cumulative log-probability."""
    tracker = _Tracker(lm, constraint)
    plen = len(prompt_ids)
    frontier = [Hypothesis(tuple(prompt_ids), plen, 0.0, tracker.initial(), False, 0.0)]
    pool: list[Hypothesis] = []
    for _ in range(cfg.max_new_tokens):
        cands = []
        for h in frontier:
            lp = lm.next_logprobs(h.ids)
            for tok in _top_tokens(lp, cfg.beam_size):
                tok = int(tok)
                logprob = h.logprob + float(lp[tok])
                state = tracker.step(h.state, h.generated, tok)
                cands.append(Hypothesis(h.ids + (tok,), plen, logprob, state, tok == lm.eos, logprob))
        if not cands:
            break
        cands.sort(key=_rank_key)
        chosen = cands[:cfg.beam_size]
        pool.extend(h for h in chosen if h.finished)
        frontier = [h for h in chosen if not h.finished]
        if not frontier:
            break
    if cfg.max_new_tokens == 0:
        return frontier
    return sorted(pool + frontier, key=_rank_key)


# -- constrained beam -------------------------------------------------------------

def constrained_beam(lm: LmBackend, prompt_ids: Sequence[int], c: CnfConstraint,
                     cfg: DecodeConfig) -> Hypothesis:
    """Beam search steered toward ``c`` by a coverage bonus.

    Score ``s(h) = logprob(h) + alpha * coverage(h)``. After each expansion,
    hypotheses violating a forbid clause are dropped, survivors are grouped
    by clause-status signature, each group keeps its best ``ceil(beam/G)``
    and the remaining slots go to the best leftovers overall. The answer is
    the best finished hypothesis, satisfied ones first. With ``alpha == 0``
    the steering is off entirely and this is plain beam search.
    """
    if cfg.alpha == 0:
        return beam(lm, prompt_ids, cfg, constraint=c)[0]

    tracker = _Tracker(lm, c)
    changing = _changing_tokens(lm, c)
    plen = len(prompt_ids)
    k = cfg.beam_size
    st0 = tracker.initial()
    frontier = [Hypothesis(tuple(prompt_ids), plen, 0.0, st0, False, cfg.alpha * coverage(st0))]
    pool: list[Hypothesis] = []

    def make(h: Hypothesis, tok: int, lp: float) -> Hypothesis:
        state = tracker.step(h.state, h.generated, tok)
        logprob = h.logprob + lp
        return Hypothesis(h.ids + (tok,), plen, logprob, state, tok == lm.eos,
                          logprob + cfg.alpha * coverage(state))

    for _ in range(cfg.max_new_tokens):
        cands: list[Hypothesis] = []
        for h in frontier:
            lp = lm.next_logprobs(h.ids)
            if changing is None:
                toks = np.flatnonzero(np.isfinite(lp))
            else:
                # Tokens that leave the state untouched compete only on logprob,
                # so the top k of them per parent is all a k-wide beam can keep.
                plain = np.ones(len(lp), dtype=bool)
                plain[changing] = False
                plain_ids = np.flatnonzero(plain)
                keep = plain_ids[_top_tokens(lp[plain_ids], k)]
                special = changing[np.isfinite(lp[changing])]
                toks = np.union1d(keep, special)
            for tok in toks:
                cand = make(h, int(tok), float(lp[tok]))
                if any(s is Status.VIOLATED for s in cand.state.clause_status):
                    continue
                cands.append(cand)
        if not cands:
            break
        chosen = _select_grouped(cands, k)
        pool.extend(h for h in chosen if h.finished)
        frontier = [h for h in chosen if not h.finished]
        if not frontier:
            break

    def final_key(h: Hypothesis) -> tuple:
        return (not is_satisfied(h.state), -h.score, -h.logprob, h.generated)

    if pool:
        return min(pool, key=final_key)
    if not frontier:
        raise DecodeError("every hypothesis was pruned")
    return min(frontier, key=final_key)


def _select_grouped(cands: list[Hypothesis], k: int) -> list[Hypothesis]:
    groups: dict[tuple, list[Hypothesis]] = {}
    for h in cands:
        groups.setdefault(h.state.clause_status, []).append(h)
    quota = math.ceil(k / len(groups))
    picked: list[Hypothesis] = []
    for sig in sorted(groups, key=lambda s: tuple(x.value for x in s)):
        members = sorted(groups[sig], key=_rank_key)
        picked.extend(members[:quota])
    picked.sort(key=_rank_key)
    picked = picked[:k]
    if len(picked) < k:
        taken = {id(h) for h in picked}
        rest = sorted((h for h in cands if id(h) not in taken), key=_rank_key)
        picked.extend(rest[:k - len(picked)])
        picked.sort(key=_rank_key)
    return picked


# -- SMC ----------------------------------------------------------------------------

def ess(log_weights: Sequence[float]) -> float:
    lw = np.asarray(log_weights, dtype=float)
    if not np.isfinite(lw).any():
        return 0.0
    w = np.exp(lw - lw[np.isfinite(lw)].max())
    w = w / w.sum()
    return float(1.0 / np.sum(w * w))


def normalized_weights(particles: Sequence[Particle]) -> np.ndarray:
    lw = np.array([p.log_weight if p.alive else -math.inf for p in particles])
    if not np.isfinite(lw).any():
        return np.zeros(len(particles))
    w = np.exp(lw - lw[np.isfinite(lw)].max())
    return w / w.sum()


class _FormTable:
    """Token sequences of each constraint form under the backend's tokenizer."""

    def __init__(self, lm: LmBackend, c: CnfConstraint):
        self.seqs: dict[str, tuple[int, ...]] = {}
        for cl in c.clauses:
            for f in cl.forms:
                if f in self.seqs:
                    continue
                try:
                    ids = tuple(lm.tokenize(f))
                except (OutOfVocabulary, BackendRequestError):
                    continue
                if ids:
                    self.seqs[f] = ids
        self.c = c

    def first_tokens(self, forms: Sequence[str]) -> dict[int, tuple[int, ...]]:
        out: dict[int, tuple[int, ...]] = {}
        for f in forms:
            seq = self.seqs.get(f)
            if seq is not None and seq[0] not in out:
                out[seq[0]] = seq[1:]
        return out

    def min_len(self, clause: int) -> float:
        """Fewest tokens any form of ``clause`` needs (inf if none is encodable)."""
        lens = [len(self.seqs[f]) for f in self.c.clauses[clause].forms if f in self.seqs]
        return min(lens) if lens else math.inf

    def required(self, state: SatisfactionState) -> float:
        return sum(self.min_len(i) for i in self.c.positive_indices
                   if state.clause_status[i] is Status.UNMET)

    def shortest_forms(self, state: SatisfactionState) -> list[str]:
        out = []
        for i in self.c.positive_indices:
            if state.clause_status[i] is Status.UNMET:
                out += [f for f in self.c.clauses[i].forms
                        if f in self.seqs and len(self.seqs[f]) == self.min_len(i)]
        return out

    def forbidden_tokens(self) -> set[int]:
        # Single-token forbid forms; multi-token forbid forms are only caught
        # by the final satisfaction check.
        return {seq[0] for f, seq in self.seqs.items()
                if len(seq) == 1 and f in self.c.forbidden_forms()}


def smc(lm: LmBackend, prompt_ids: Sequence[int], c: CnfConstraint,
        cfg: DecodeConfig) -> tuple[Hypothesis, list[Particle]]:
    """Sequential Monte Carlo with a hard-masked proposal.

    Each particle samples from the backend distribution (tempered) with
    forbid-clause tokens removed, and eos removed while any clause is unmet.
    When the steps left equal the tokens still needed (one per unmet clause
    for word-level backends) only the shortest forms of unmet clauses remain
    allowed, which guarantees satisfaction.
    Weights carry ``log p - log q``; systematic resampling happens when the
    effective sample size drops below ``ess_threshold * N``.
    """
    tracker = _Tracker(lm, c)
    table = _FormTable(lm, c)
    forbidden = table.forbidden_tokens()
    plen = len(prompt_ids)
    st0 = initial_state(c)
    if table.required(st0) > cfg.max_new_tokens:
        raise InfeasibleConstraintError(
            f"{unmet_count(st0)} unmet clauses cannot fit in {cfg.max_new_tokens} tokens")
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_particles
    particles = [Particle(tuple(prompt_ids), plen, 0.0, st0) for _ in range(n)]

    for step in range(cfg.max_new_tokens):
        remaining = cfg.max_new_tokens - step
        if all(p.finished or not p.alive for p in particles):
            break
        nxt = []
        for p in particles:
            if p.finished or not p.alive:
                nxt.append(p)
                continue
            nxt.append(_smc_step(lm, tracker, table, forbidden, p, remaining, cfg, rng))
        particles = nxt
        alive = [p for p in particles if p.alive]
        if not alive:
            break
        if ess([p.log_weight if p.alive else -math.inf for p in particles]) < cfg.ess_threshold * n:
            particles = _systematic_resample(particles, rng)

    final = []
    for p in particles:
        if p.alive and not is_satisfied(p.state):
            p = replace(p, alive=False, log_weight=-math.inf)
        elif p.alive:
            p = replace(p, finished=True)
        final.append(p)
    if not any(p.alive for p in final):
        raise InfeasibleConstraintError("constraint infeasible under mask schedule")
    w = normalized_weights(final)
    best_i = min((i for i, p in enumerate(final) if p.alive),
                 key=lambda i: (-w[i], -final[i].logprob, i))
    b = final[best_i]
    ended = bool(b.generated) and b.generated[-1] == lm.eos
    best = Hypothesis(b.ids, plen, b.logprob, b.state, ended, b.logprob)
    return best, final


def _smc_step(lm: LmBackend, tracker: _Tracker, table: _FormTable, forbidden: set[int],
              p: Particle, remaining: int, cfg: DecodeConfig, rng: np.random.Generator) -> Particle:
    lp = lm.next_logprobs(p.ids)
    if p.forced:
        tok = p.forced[0]
        rest = p.forced[1:]
        logq = 0.0
    else:
        allowed = np.ones(len(lp), dtype=bool)
        continuations: dict[int, tuple[int, ...]] = {}
        n_unmet = unmet_count(p.state)
        if n_unmet and remaining <= table.required(p.state):
            continuations = table.first_tokens(table.shortest_forms(p.state))
            allowed[:] = False
            allowed[list(continuations)] = True
        if forbidden:
            allowed[list(forbidden)] = False
        if n_unmet:
            allowed[lm.eos] = False
        allowed &= np.isfinite(lp)
        if not allowed.any():
            return replace(p, alive=False, log_weight=-math.inf)
        scaled = np.where(allowed, lp / cfg.temperature, -math.inf)
        m = scaled[allowed].max()
        q = np.exp(scaled - m)
        q /= q.sum()
        u = rng.random()
        tok = int(np.searchsorted(np.cumsum(q), u, side="right"))
        tok = min(tok, len(q) - 1)
        while not allowed[tok]:  # guard against float round-off at the cdf edge
            tok -= 1
        logq = float(np.log(q[tok]))
        rest = continuations.get(tok, ())
    logp = float(lp[tok])
    state = tracker.step(p.state, p.generated, tok)
    return Particle(p.ids + (tok,), p.prompt_len, p.log_weight + logp - logq, state,
                    alive=math.isfinite(logp), finished=tok == lm.eos,
                    logprob=p.logprob + logp, forced=rest)


def _systematic_resample(particles: list[Particle], rng: np.random.Generator) -> list[Particle]:
    n = len(particles)
    w = normalized_weights(particles)
    lw = np.array([p.log_weight for p in particles if p.alive])
    mean_lw = float(lw.max() + np.log(np.exp(lw - lw.max()).sum()) - math.log(n))
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(w)
    # Scaling by the total keeps zero-weight tail particles unreachable.
    idx = np.searchsorted(cdf, positions * cdf[-1], side="right")
    idx = np.minimum(idx, n - 1)
    return [replace(particles[i], log_weight=mean_lw) for i in idx]
