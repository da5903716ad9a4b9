"""Independent reference implementations used to check the package.

Each oracle is written the slow, obvious way and shares no code with the
implementation it checks beyond the public data types.
"""
from __future__ import annotations

import itertools
import math
import re
from collections import defaultdict

from constraingen.constraints import PUNCTUATION, Status
from constraingen.ontology import Disjoint, Domain, MemberOf, Range, Rel, Sub


# -- lexical ------------------------------------------------------------------------

def normalize(text):
    out = text.lower()
    for ch in PUNCTUATION:
        out = out.replace(ch, " ")
    return " ".join(out.split())


def pattern_statuses(text, c):
    """Clause statuses by whole-word regex search over the normalized text."""
    norm = " " + normalize(text) + " "
    out = []
    for cl in c.clauses:
        hit = any(re.search(r"(?<= )" + re.escape(f) + r"(?= )", norm) for f in cl.forms)
        if cl.positive:
            out.append(Status.MET if hit else Status.UNMET)
        else:
            out.append(Status.VIOLATED if hit else Status.MET)
    return tuple(out)


# -- ontology -----------------------------------------------------------------------

def brute_closure(axioms):
    """Naive fixpoint of R1-R5 over a set of axioms (Disjoint kept symmetric)."""
    facts = set(axioms)
    facts |= {Disjoint(d.b, d.a) for d in axioms if isinstance(d, Disjoint)}
    while True:
        new = set()
        subs = [f for f in facts if isinstance(f, Sub)]
        for s1 in subs:
            for s2 in subs:
                if s1.sup == s2.sub and s1.sub != s2.sup:
                    new.add(Sub(s1.sub, s2.sup))
        for m in [f for f in facts if isinstance(f, MemberOf)]:
            for s in subs:
                if m.concept == s.sub:
                    new.add(MemberOf(m.ind, s.sup))
        for d in [f for f in facts if isinstance(f, Disjoint)]:
            for s in subs:
                if s.sup == d.a:
                    new.add(Disjoint(s.sub, d.b))
                if s.sup == d.b:
                    new.add(Disjoint(d.a, s.sub))
        for r in [f for f in facts if isinstance(f, Rel)]:
            for dom in [f for f in facts if isinstance(f, Domain)]:
                if dom.pred == r.pred:
                    new.add(MemberOf(r.subj, dom.concept))
            for rng in [f for f in facts if isinstance(f, Range)]:
                if rng.pred == r.pred:
                    new.add(MemberOf(r.obj, rng.concept))
        if new <= facts:
            return facts
        facts |= new


def brute_memberships(facts):
    out = defaultdict(set)
    for f in facts:
        if isinstance(f, MemberOf):
            out[f.ind].add(f.concept)
    return out


def enumerate_violation(toks, mentions, concepts, individuals, facts):
    """P(some "X is a Y" reading contradicts the ontology), by listing every joint reading."""
    member = brute_memberships(facts)
    disjoint = {(f.a, f.b) for f in facts if isinstance(f, Disjoint)}
    disjoint |= {(b, a) for a, b in disjoint}
    concept_words = {c.lower(): c for c in concepts}
    options = []
    for m in mentions:
        opts = list(m.candidates)
        rest = 1.0 - sum(p for _, p in opts)
        if rest > 0:
            opts.append((None, rest))
        options.append(opts)
    start_of = {m.start: i for i, m in enumerate(mentions)}
    total = 0.0
    for combo in itertools.product(*options):
        prob = math.prod(p for _, p in combo)
        bad = False
        for i, m in enumerate(mentions):
            j = m.end
            if j + 2 >= len(toks) or toks[j] != "is" or toks[j + 1] not in ("a", "an"):
                continue
            if j + 2 in start_of:
                concept = combo[start_of[j + 2]][0]
            else:
                concept = concept_words.get(toks[j + 2])
            ind = combo[i][0]
            if ind in individuals and concept in concepts:
                if any((d, concept) in disjoint for d in member.get(ind, ())):
                    bad = True
        if bad:
            total += prob
    return total


# -- metrics ------------------------------------------------------------------------

def lcs_recursive(a, b):
    memo = {}

    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if (i, j) not in memo:
            if a[i] == b[j]:
                memo[i, j] = 1 + go(i + 1, j + 1)
            else:
                memo[i, j] = max(go(i + 1, j), go(i, j + 1))
        return memo[i, j]

    return go(0, 0)


def rouge_oracle(cand, refs):
    if not cand:
        return 0.0
    best = 0.0
    for r in refs:
        lcs = lcs_recursive(cand, r)
        if lcs:
            p, rec = lcs / len(cand), lcs / len(r)
            best = max(best, 2 * p * rec / (p + rec))
    return 100 * best


def bleu_oracle(cand, refs):
    if not cand:
        return 0.0
    c = len(cand)
    lengths = sorted(len(r) for r in refs)
    r_len = min(lengths, key=lambda L: (abs(L - c), L))
    precisions = []
    for n in range(1, min(4, c) + 1):
        grams = [tuple(cand[i:i + n]) for i in range(c - n + 1)]
        matched = 0
        for g in set(grams):
            in_cand = grams.count(g)
            in_refs = max(sum(1 for i in range(len(r) - n + 1) if tuple(r[i:i + n]) == g) for r in refs)
            matched += min(in_cand, in_refs)
        if matched == 0:
            return 0.0
        precisions.append(matched / len(grams))
    geo = math.prod(precisions) ** (1 / len(precisions))
    bp = 1.0 if c >= r_len else math.exp(1 - r_len / c)
    return 100 * bp * geo


# -- decoding -----------------------------------------------------------------------

def all_sequences(n_vocab, eos, max_len):
    """Every generation a decoder can return: eos-terminated, or max_len long."""
    out = []
    for L in range(1, max_len + 1):
        for body in itertools.product([t for t in range(n_vocab) if t != eos], repeat=L - 1):
            out.append(body + (eos,))
            if L == max_len:
                for last in range(n_vocab):
                    if last != eos:
                        out.append(body + (last,))
    return out


def seq_logprob(lm, prompt, seq):
    total = 0.0
    for i, t in enumerate(seq):
        total += float(lm.next_logprobs(list(prompt) + list(seq[:i]))[t])
    return total
