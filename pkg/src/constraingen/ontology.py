"""Ontologies as declarative semantic constraints.

Axioms are small frozen dataclasses. The closure is the least fixpoint of:

* Sub is transitive (reflexive facts are never stored);
* MemberOf(a, C) and Sub(C, D) give MemberOf(a, D);
* Sub(C, D) and Disjoint(D, E) give Disjoint(C, E);
* Rel(p, a, b) with Domain(p, C) gives MemberOf(a, C);
* Rel(p, a, b) with Range(p, C) gives MemberOf(b, C).

Disjoint is symmetric: ``Disjoint("B", "A") == Disjoint("A", "B")``.
"""
from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

__all__ = [
    "OntologyError",
    "Sub",
    "Disjoint",
    "MemberOf",
    "Rel",
    "Domain",
    "Range",
    "Axiom",
    "Ontology",
    "Gazetteer",
    "Mention",
    "Violation",
    "closure",
    "is_consistent",
    "minimal_axioms",
    "detect_mentions",
    "extract_assertions",
    "violation_probability",
    "constraints_to_text",
]


class OntologyError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Sub:
    sub: str
    sup: str

    def names(self) -> tuple[str, ...]:
        return (self.sub, self.sup)


@dataclass(frozen=True, order=True)
class Disjoint:
    a: str
    b: str

    def __post_init__(self) -> None:
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    def names(self) -> tuple[str, ...]:
        return (self.a, self.b)


@dataclass(frozen=True, order=True)
class MemberOf:
    ind: str
    concept: str

    def names(self) -> tuple[str, ...]:
        return (self.ind, self.concept)


@dataclass(frozen=True, order=True)
class Rel:
    pred: str
    subj: str
    obj: str

    def names(self) -> tuple[str, ...]:
        return (self.subj, self.obj)


@dataclass(frozen=True, order=True)
class Domain:
    pred: str
    concept: str

    def names(self) -> tuple[str, ...]:
        return (self.concept,)


@dataclass(frozen=True, order=True)
class Range:
    pred: str
    concept: str

    def names(self) -> tuple[str, ...]:
        return (self.concept,)


Axiom = Union[Sub, Disjoint, MemberOf, Rel, Domain, Range]

_KIND = {Sub: "sub", Disjoint: "disjoint", MemberOf: "member", Rel: "rel", Domain: "domain", Range: "range"}


def axiom_key(ax: Axiom) -> tuple:
    """Deterministic total order over mixed axiom kinds."""
    return (_KIND[type(ax)],) + tuple(getattr(ax, f) for f in ax.__dataclass_fields__)


def axiom_to_json(ax: Axiom) -> dict:
    if isinstance(ax, Sub):
        return {"kind": "sub", "sub": ax.sub, "sup": ax.sup}
    if isinstance(ax, Disjoint):
        return {"kind": "disjoint", "a": ax.a, "b": ax.b}
    if isinstance(ax, MemberOf):
        return {"kind": "member", "ind": ax.ind, "concept": ax.concept}
    if isinstance(ax, Rel):
        return {"kind": "rel", "pred": ax.pred, "subj": ax.subj, "obj": ax.obj}
    return {"kind": _KIND[type(ax)], "pred": ax.pred, "concept": ax.concept}


def axiom_from_json(d: Mapping) -> Axiom:
    kind = d.get("kind")
    try:
        if kind == "sub":
            return Sub(d["sub"], d["sup"])
        if kind == "disjoint":
            a = d.get("a", d.get("left"))
            b = d.get("b", d.get("right"))
            if a is None or b is None:
                raise KeyError("a/b")
            return Disjoint(a, b)
        if kind == "member":
            return MemberOf(d["ind"], d["concept"])
        if kind == "rel":
            return Rel(d["pred"], d["subj"], d["obj"])
        if kind == "domain":
            return Domain(d["pred"], d["concept"])
        if kind == "range":
            return Range(d["pred"], d["concept"])
    except KeyError as exc:
        raise OntologyError(f"axiom {dict(d)!r} missing field {exc}") from None
    raise OntologyError(f"unknown axiom kind {kind!r}")


@dataclass(frozen=True)
class Ontology:
    concepts: frozenset[str] = frozenset()
    individuals: frozenset[str] = frozenset()
    predicates: frozenset[str] = frozenset()
    axioms: frozenset[Axiom] = frozenset()

    def __post_init__(self) -> None:
        for name in ("concepts", "individuals", "predicates", "axioms"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        for ax in self.axioms:
            self._check(ax)

    def _check(self, ax: Axiom) -> None:
        def need(name: str, pool: frozenset[str], what: str) -> None:
            if name not in pool:
                raise OntologyError(f"{_KIND[type(ax)]} axiom refers to unknown {what} {name!r}")

        if isinstance(ax, Sub):
            if ax.sub == ax.sup:
                raise OntologyError(f"reflexive subsumption on {ax.sub!r}")
            need(ax.sub, self.concepts, "concept")
            need(ax.sup, self.concepts, "concept")
        elif isinstance(ax, Disjoint):
            need(ax.a, self.concepts, "concept")
            need(ax.b, self.concepts, "concept")
        elif isinstance(ax, MemberOf):
            need(ax.ind, self.individuals, "individual")
            need(ax.concept, self.concepts, "concept")
        elif isinstance(ax, Rel):
            need(ax.pred, self.predicates, "predicate")
            need(ax.subj, self.individuals, "individual")
            need(ax.obj, self.individuals, "individual")
        elif isinstance(ax, (Domain, Range)):
            need(ax.pred, self.predicates, "predicate")
            need(ax.concept, self.concepts, "concept")
        else:
            raise OntologyError(f"not an axiom: {ax!r}")

    @classmethod
    def from_axioms(cls, axioms: Iterable[Axiom], concepts: Iterable[str] = (),
                    individuals: Iterable[str] = ()) -> "Ontology":
        """Build an ontology, declaring every name the axioms use."""
        axioms = list(axioms)
        cs, inds, preds = set(concepts), set(individuals), set()
        for ax in axioms:
            if isinstance(ax, (Sub,)):
                cs.update((ax.sub, ax.sup))
            elif isinstance(ax, Disjoint):
                cs.update((ax.a, ax.b))
            elif isinstance(ax, MemberOf):
                inds.add(ax.ind)
                cs.add(ax.concept)
            elif isinstance(ax, Rel):
                preds.add(ax.pred)
                inds.update((ax.subj, ax.obj))
            else:
                preds.add(ax.pred)
                cs.add(ax.concept)
        return cls(frozenset(cs), frozenset(inds), frozenset(preds), frozenset(axioms))

    def with_axioms(self, axioms: Iterable[Axiom]) -> "Ontology":
        return Ontology(self.concepts, self.individuals, self.predicates, frozenset(axioms))

    def of_kind(self, kind: type) -> list:
        return sorted(ax for ax in self.axioms if isinstance(ax, kind))

    def referents(self) -> frozenset[str]:
        return self.concepts | self.individuals

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "concepts": sorted(self.concepts),
            "individuals": sorted(self.individuals),
            "predicates": sorted(self.predicates),
            "axioms": [axiom_to_json(ax) for ax in sorted(self.axioms, key=axiom_key)],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Ontology":
        if not isinstance(data, Mapping):
            raise OntologyError("ontology must be a JSON object")
        axioms = [axiom_from_json(d) for d in data.get("axioms", [])]
        return cls(
            frozenset(data.get("concepts", [])),
            frozenset(data.get("individuals", [])),
            frozenset(data.get("predicates", [])),
            frozenset(axioms),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Ontology":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# -- closure ------------------------------------------------------------------

def _sub_graph(axioms: Iterable[Axiom]) -> dict[str, set[str]]:
    up: dict[str, set[str]] = defaultdict(set)
    for ax in axioms:
        if isinstance(ax, Sub):
            up[ax.sub].add(ax.sup)
    return up


def _strict_ancestors(graph: Mapping[str, set[str]], node: str) -> set[str]:
    seen: set[str] = set()
    stack = list(graph.get(node, ()))
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(graph.get(n, ()))
    seen.discard(node)
    return seen


def closure(o: Ontology) -> Ontology:
    """Least fixpoint of the derivation rules listed in the module docstring."""
    up = _sub_graph(o.axioms)
    anc = {c: _strict_ancestors(up, c) for c in o.concepts}
    down: dict[str, set[str]] = {c: {c} for c in o.concepts}
    for c, ups in anc.items():
        for d in ups:
            down[d].add(c)

    derived: set[Axiom] = set(o.axioms)
    for c, ups in anc.items():
        derived.update(Sub(c, d) for d in ups)

    domains: dict[str, set[str]] = defaultdict(set)
    ranges: dict[str, set[str]] = defaultdict(set)
    for ax in o.axioms:
        if isinstance(ax, Domain):
            domains[ax.pred].add(ax.concept)
        elif isinstance(ax, Range):
            ranges[ax.pred].add(ax.concept)

    direct: dict[str, set[str]] = defaultdict(set)
    for ax in o.axioms:
        if isinstance(ax, MemberOf):
            direct[ax.ind].add(ax.concept)
        elif isinstance(ax, Rel):
            direct[ax.subj].update(domains.get(ax.pred, ()))
            direct[ax.obj].update(ranges.get(ax.pred, ()))
    for ind, cs in direct.items():
        for c in cs:
            derived.add(MemberOf(ind, c))
            derived.update(MemberOf(ind, d) for d in anc[c])

    for ax in o.axioms:
        if isinstance(ax, Disjoint):
            for x in down[ax.a]:
                for y in down[ax.b]:
                    derived.add(Disjoint(x, y))
    return o.with_axioms(derived)


def memberships(o: Ontology) -> dict[str, set[str]]:
    """Individual -> concepts, read off the axioms as given (close first)."""
    out: dict[str, set[str]] = defaultdict(set)
    for ax in o.axioms:
        if isinstance(ax, MemberOf):
            out[ax.ind].add(ax.concept)
    return out


def disjoint_pairs(o: Ontology) -> set[tuple[str, str]]:
    pairs = set()
    for ax in o.axioms:
        if isinstance(ax, Disjoint):
            pairs.add((ax.a, ax.b))
            pairs.add((ax.b, ax.a))
    return pairs


# -- checking -----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    axiom: Axiom
    grounding: tuple[str, ...]
    probability: float

    def to_json(self) -> dict:
        return {"axiom": axiom_to_json(self.axiom), "grounding": list(self.grounding),
                "probability": self.probability}


def is_consistent(o: Ontology) -> tuple[bool, list[Violation]]:
    closed = closure(o)
    disj = disjoint_pairs(closed)
    violations = []
    for ind, cs in sorted(memberships(closed).items()):
        ordered = sorted(cs)
        for i, c in enumerate(ordered):
            for d in ordered[i:]:
                if (c, d) in disj:
                    violations.append(Violation(Disjoint(c, d), (ind,), 1.0))
    return not violations, violations


def minimal_axioms(o: Ontology) -> Ontology:
    """A smallest axiom set with the same closure.

    Redundant Sub edges (transitive reduction), memberships implied by a
    more specific membership or by a Rel with Domain/Range, and Disjoint
    axioms implied by a disjointness between superconcepts are dropped.
    """
    up = _sub_graph(o.axioms)
    _require_acyclic(up)
    anc = {c: _strict_ancestors(up, c) for c in o.concepts}

    def leq(x: str, y: str) -> bool:
        return x == y or y in anc[x]

    kept: set[Axiom] = set()
    for ax in o.axioms:
        if isinstance(ax, Sub):
            # Redundant iff sup is reachable through another direct parent.
            if not any(ax.sup in anc[p] for p in up[ax.sub] if p != ax.sup):
                kept.add(ax)
        elif isinstance(ax, (Rel, Domain, Range)):
            kept.add(ax)

    domains: dict[str, set[str]] = defaultdict(set)
    ranges: dict[str, set[str]] = defaultdict(set)
    for ax in o.axioms:
        if isinstance(ax, Domain):
            domains[ax.pred].add(ax.concept)
        elif isinstance(ax, Range):
            ranges[ax.pred].add(ax.concept)
    from_rel: dict[str, set[str]] = defaultdict(set)
    for ax in o.axioms:
        if isinstance(ax, Rel):
            from_rel[ax.subj].update(domains.get(ax.pred, ()))
            from_rel[ax.obj].update(ranges.get(ax.pred, ()))
    asserted = memberships(o)
    for ind, cs in asserted.items():
        sources = cs | from_rel.get(ind, set())
        for c in cs:
            if c in from_rel.get(ind, ()):
                continue
            if any(c in anc[s] for s in sources if s != c):
                continue
            kept.add(MemberOf(ind, c))

    disj = [ax for ax in o.axioms if isinstance(ax, Disjoint)]
    for ax in disj:
        dominated = False
        for other in disj:
            if other == ax:
                continue
            if (leq(ax.a, other.a) and leq(ax.b, other.b)) or (leq(ax.a, other.b) and leq(ax.b, other.a)):
                dominated = True
                break
        if not dominated:
            kept.add(ax)
    return o.with_axioms(kept)


def _require_acyclic(up: Mapping[str, set[str]]) -> None:
    state: dict[str, int] = {}
    for root in sorted(up):
        if state.get(root):
            continue
        stack = [(root, iter(sorted(up.get(root, ()))))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                continue
            s = state.get(nxt, 0)
            if s == 1:
                raise OntologyError(f"cyclic subsumption through {nxt!r}; equivalent concepts are unsupported")
            if s == 0:
                state[nxt] = 1
                stack.append((nxt, iter(sorted(up.get(nxt, ())))))


# -- mentions -------------------------------------------------------------------

MAX_FORM_WORDS = 3


@dataclass(frozen=True)
class Gazetteer:
    """Surface form -> [(referent, probability)]; leftover mass means "no referent"."""

    entries: Mapping[str, tuple[tuple[str, float], ...]]

    def __post_init__(self) -> None:
        from .constraints import words

        normalized: dict[str, tuple[tuple[str, float], ...]] = {}
        for form, cands in self.entries.items():
            key = " ".join(words(form))
            if not key or len(key.split()) > MAX_FORM_WORDS:
                raise OntologyError(f"gazetteer form {form!r} must have 1-{MAX_FORM_WORDS} words")
            cands = tuple((str(r), float(p)) for r, p in cands)
            if any(not 0.0 < p <= 1.0 for _, p in cands):
                raise OntologyError(f"gazetteer form {form!r}: probabilities must lie in (0, 1]")
            if sum(p for _, p in cands) > 1.0 + 1e-12:
                raise OntologyError(f"gazetteer form {form!r}: probabilities sum above 1")
            normalized[key] = cands
        object.__setattr__(self, "entries", normalized)

    def get(self, form: str) -> tuple[tuple[str, float], ...] | None:
        return self.entries.get(form)

    def to_json(self) -> dict:
        return {k: [list(c) for c in v] for k, v in sorted(self.entries.items())}

    @classmethod
    def load(cls, path: str | Path) -> "Gazetteer":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise OntologyError(f"{path}: gazetteer must be a JSON object")
        return cls({k: tuple(tuple(c) for c in v) for k, v in data.items()})


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    candidates: tuple[tuple[str, float], ...]

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def detect_mentions(words_: Sequence[str], g: Gazetteer) -> list[Mention]:
    """Leftmost-longest, non-overlapping gazetteer matches (forms of up to 3 words)."""
    toks = [w.lower() for w in words_]
    out = []
    i = 0
    while i < len(toks):
        for n in range(min(MAX_FORM_WORDS, len(toks) - i), 0, -1):
            cands = g.get(" ".join(toks[i:i + n]))
            if cands is not None:
                out.append(Mention(i, i + n, cands))
                i += n
                break
        else:
            i += 1
    return out


# -- violations -----------------------------------------------------------------

_COPULA = "is"
_ARTICLES = ("a", "an")


@dataclass(frozen=True)
class Assertion:
    """A textual "X is a Y" claim; ``subject``/``object`` index ``mentions``.

    ``object`` is -1 when Y is a bare concept name (probability 1).
    """

    subject: int
    object: int
    concept: str | None = None


def extract_assertions(toks: Sequence[str], mentions: Sequence[Mention],
                       o: Ontology) -> list[Assertion]:
    concept_words = {c.lower(): c for c in o.concepts}
    by_start = {m.start: k for k, m in enumerate(mentions)}
    out = []
    for k, m in enumerate(mentions):
        j = m.end
        if j + 2 >= len(toks):
            continue
        if toks[j] != _COPULA or toks[j + 1] not in _ARTICLES:
            continue
        obj_at = j + 2
        if obj_at in by_start:
            out.append(Assertion(k, by_start[obj_at]))
        elif toks[obj_at] in concept_words:
            out.append(Assertion(k, -1, concept_words[toks[obj_at]]))
    return out


def _violated_disjoint(ind: str, concept: str, member_of: Mapping[str, set[str]],
                       disj: set[tuple[str, str]]) -> Disjoint | None:
    for d in sorted(member_of.get(ind, ())):
        if (d, concept) in disj:
            return Disjoint(d, concept)
    return None


def violation_probability(words_: Sequence[str], o: Ontology, g: Gazetteer) -> tuple[float, list[Violation]]:
    """Probability that the text asserts a membership contradicting the ontology.

    Each grounded violation carries the product of its candidate
    probabilities. Mentions resolve independently, so the total is
    ``1 - prod(1 - p_i)`` across violations that share no mention; where
    violations share a mention (alternative referents of one surface form
    are mutually exclusive) the affected group is resolved exactly by
    enumerating its mentions' joint readings.
    """
    toks = [w.lower() for w in words_]
    mentions = detect_mentions(toks, g)
    assertions = extract_assertions(toks, mentions, o)
    if not assertions:
        return 0.0, []
    closed = closure(o)
    member_of = memberships(closed)
    disj = disjoint_pairs(closed)
    individuals = o.individuals

    violations: list[Violation] = []
    # Per assertion: list of (subject referent, object concept, prob, disjoint axiom).
    grounded: list[list[tuple[str, str | None, float]]] = []
    for a in assertions:
        subj = mentions[a.subject]
        objs = ([(a.concept, 1.0)] if a.object < 0
                else [(r, p) for r, p in mentions[a.object].candidates if r in o.concepts])
        hits = []
        for ind, p_ind in subj.candidates:
            if ind not in individuals:
                continue
            for concept, p_c in objs:
                ax = _violated_disjoint(ind, concept, member_of, disj)
                if ax is not None:
                    p = p_ind * p_c
                    violations.append(Violation(ax, (ind, concept), p))
                    hits.append((ind, concept, p))
        grounded.append(hits)

    # Group assertions that share a mention; groups are independent.
    parent = list(range(len(assertions)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: dict[int, int] = {}
    for i, a in enumerate(assertions):
        for m in (a.subject, a.object):
            if m < 0:
                continue
            if m in owner:
                parent[find(i)] = find(owner[m])
            else:
                owner[m] = i
    groups: dict[int, list[int]] = defaultdict(list)
    for i in range(len(assertions)):
        groups[find(i)].append(i)

    safe = 1.0
    for members in groups.values():
        safe *= 1.0 - _group_probability([assertions[i] for i in members], mentions, o, member_of, disj)
    return 1.0 - safe, violations


def _group_probability(assertions: Sequence[Assertion], mentions: Sequence[Mention], o: Ontology,
                       member_of: Mapping[str, set[str]], disj: set[tuple[str, str]]) -> float:
    involved = sorted({m for a in assertions for m in (a.subject, a.object) if m >= 0})
    if len(assertions) == 1:
        # Single assertion: readings of subject and object are independent and
        # violating pairs are disjoint events, so probabilities add.
        a = assertions[0]
        objs = ([(a.concept, 1.0)] if a.object < 0
                else [(r, p) for r, p in mentions[a.object].candidates if r in o.concepts])
        total = 0.0
        for ind, p_ind in mentions[a.subject].candidates:
            if ind not in o.individuals:
                continue
            for concept, p_c in objs:
                if _violated_disjoint(ind, concept, member_of, disj) is not None:
                    total += p_ind * p_c
        return total
    options = []
    for m in involved:
        cands = list(mentions[m].candidates)
        rest = 1.0 - sum(p for _, p in cands)
        if rest > 0:
            cands.append((None, rest))
        options.append(cands)
    total = 0.0
    for combo in itertools.product(*options):
        reading = {m: ref for m, (ref, _) in zip(involved, combo)}
        prob = 1.0
        for _, p in combo:
            prob *= p
        for a in assertions:
            ind = reading[a.subject]
            concept = a.concept if a.object < 0 else reading[a.object]
            if ind in o.individuals and concept in o.concepts and \
                    _violated_disjoint(ind, concept, member_of, disj) is not None:
                total += prob
                break
    return total


# -- verbalization ------------------------------------------------------------

def verbalize(ax: Axiom) -> str:
    if isinstance(ax, Sub):
        return f"Every {ax.sub} is a {ax.sup}."
    if isinstance(ax, Disjoint):
        return f"No {ax.a} is a {ax.b}."
    if isinstance(ax, MemberOf):
        return f"{ax.ind} is a {ax.concept}."
    if isinstance(ax, Rel):
        return f"{ax.subj} {ax.pred} {ax.obj}."
    if isinstance(ax, Domain):
        return f"Anything that {ax.pred} something is a {ax.concept}."
    return f"Anything that something {ax.pred} is a {ax.concept}."


_ORDER = {MemberOf: 0, Rel: 1, Sub: 2, Disjoint: 3, Domain: 4, Range: 5}


def constraints_to_text(o: Ontology, focus: Iterable[str]) -> list[str]:
    """Sentences for axioms about ``focus``, then Sub edges one step out."""
    focus = set(focus)
    direct = [ax for ax in o.axioms if focus.intersection(_mentioned(ax))]
    near = set(focus)
    for ax in direct:
        near.update(_mentioned(ax))
    chosen = set(direct)
    extra = [ax for ax in o.axioms
             if isinstance(ax, Sub) and ax.sub in near and ax not in chosen]

    def key(ax: Axiom) -> tuple:
        return (_ORDER[type(ax)], axiom_key(ax))

    return [verbalize(ax) for ax in sorted(direct, key=key) + sorted(extra, key=key)]


def _mentioned(ax: Axiom) -> set[str]:
    if isinstance(ax, Rel):
        return {ax.subj, ax.obj}
    return set(ax.names())
