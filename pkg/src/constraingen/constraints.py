"""Lexical constraints in conjunctive normal form over keyword inflections.

A constraint is a conjunction of clauses. Each clause is a disjunction of
surface forms and is either positive (some form must appear) or negative
(no form may appear). Matching is whole-word and case-insensitive on text
normalized by :func:`words`.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "ConstraintParseError",
    "InflectionLexicon",
    "Polarity",
    "Literal",
    "Clause",
    "CnfConstraint",
    "Status",
    "SatisfactionState",
    "words",
    "parse_constraint",
    "from_keywords",
    "fallback_forms",
    "initial_state",
    "evaluate",
    "advance",
    "coverage",
    "is_satisfied",
    "unmet_count",
    "violated_count",
]

# Characters removed before whitespace splitting.
PUNCTUATION = ".,!?;:\"()'"
_PUNCT_TABLE = str.maketrans({ch: " " for ch in PUNCTUATION})
_FORM_RE = re.compile(r"[^\s|&()!.,?;:\"']+")


class ConstraintParseError(ValueError):
    """Raised for malformed constraint text; ``offset`` is a character index."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.reason = message
        self.offset = offset


def words(text: str) -> list[str]:
    """Lowercase word tokens with the punctuation set replaced by spaces."""
    return text.lower().translate(_PUNCT_TABLE).split()


def fallback_forms(keyword: str) -> tuple[str, ...]:
    return (keyword, keyword + "s", keyword + "es", keyword + "ed", keyword + "ing")


def _check_word(w: str, what: str) -> None:
    if not w or w != w.lower() or any(ch.isspace() for ch in w):
        raise ValueError(f"{what} {w!r} must be a non-empty lowercase word")


@dataclass(frozen=True)
class InflectionLexicon:
    """Keyword -> surface forms. The keyword is always the first form."""

    entries: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        normalized: dict[str, tuple[str, ...]] = {}
        for kw, forms in self.entries.items():
            _check_word(kw, "keyword")
            ordered = [kw]
            for f in forms:
                _check_word(f, "form")
                if f not in ordered:
                    ordered.append(f)
            normalized[kw] = tuple(ordered)
        object.__setattr__(self, "entries", normalized)

    def __contains__(self, keyword: str) -> bool:
        return keyword in self.entries

    def forms(self, keyword: str) -> tuple[str, ...]:
        """Lexicon forms of ``keyword``, or the suffix fallback when absent."""
        if keyword in self.entries:
            return self.entries[keyword]
        return fallback_forms(keyword)

    def merged(self, overrides: Mapping[str, Iterable[str]] | None) -> "InflectionLexicon":
        if not overrides:
            return self
        entries = dict(self.entries)
        entries.update({k: tuple(v) for k, v in overrides.items()})
        return InflectionLexicon(entries)

    @classmethod
    def load(cls, path: str | Path) -> "InflectionLexicon":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: lexicon must be a JSON object")
        return cls({k: tuple(v) for k, v in data.items()})

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({k: list(v) for k, v in self.entries.items()}, fh, indent=2, sort_keys=True)
            fh.write("\n")


class Polarity(str, enum.Enum):
    REQUIRE = "require"
    FORBID = "forbid"


@dataclass(frozen=True)
class Literal:
    keyword: str
    polarity: Polarity
    forms: frozenset[str]

    def __post_init__(self) -> None:
        if not self.forms:
            raise ValueError("literal needs at least one form")


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]

    def __post_init__(self) -> None:
        if not self.literals:
            raise ValueError("empty clause")
        if len({lit.polarity for lit in self.literals}) != 1:
            raise ValueError("a clause cannot mix require and forbid literals")
        seen: set[str] = set()
        for f in self.forms:
            if f in seen:
                raise ValueError(f"duplicate form {f!r} in clause")
            seen.add(f)

    @property
    def polarity(self) -> Polarity:
        return self.literals[0].polarity

    @property
    def positive(self) -> bool:
        return self.polarity is Polarity.REQUIRE

    @property
    def forms(self) -> tuple[str, ...]:
        return tuple(f for lit in self.literals for f in sorted(lit.forms))

    def __len__(self) -> int:
        return len(self.forms)


@dataclass(frozen=True)
class CnfConstraint:
    clauses: tuple[Clause, ...]
    _index: dict[str, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.clauses:
            raise ValueError("constraint needs at least one clause")
        index: dict[str, list[int]] = {}
        for i, clause in enumerate(self.clauses):
            for f in clause.forms:
                index.setdefault(f, []).append(i)
        object.__setattr__(self, "_index", {k: tuple(v) for k, v in index.items()})

    def clauses_for(self, word: str) -> tuple[int, ...]:
        return self._index.get(word, ())

    @property
    def positive_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.clauses) if c.positive)

    @property
    def negative_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.clauses) if not c.positive)

    def positive_forms(self) -> set[str]:
        return {f for c in self.clauses if c.positive for f in c.forms}

    def forbidden_forms(self) -> set[str]:
        return {f for c in self.clauses if not c.positive for f in c.forms}

    def to_text(self) -> str:
        """Render back to the constraint DSL."""
        parts = []
        for c in self.clauses:
            body = "(" + "|".join(c.forms) + ")"
            parts.append(body if c.positive else "!" + body)
        return "&".join(parts)

    def __str__(self) -> str:
        return self.to_text()


def _clause_from_forms(forms: Sequence[str], polarity: Polarity, keyword: str | None = None) -> Clause:
    return Clause(tuple(Literal(keyword or f, polarity, frozenset([f])) for f in forms))


def parse_constraint(spec: str) -> CnfConstraint:
    """Parse ``clause ("&" clause)*`` where ``clause := ["!"] "(" form ("|" form)* ")"``.

    >>> parse_constraint("(dog|dogs)&!(cat)").to_text()
    '(dog|dogs)&!(cat)'
    """
    pos = 0
    n = len(spec)

    def skip_ws() -> None:
        nonlocal pos
        while pos < n and spec[pos].isspace():
            pos += 1

    skip_ws()
    if pos == n:
        raise ConstraintParseError("empty constraint", 0)
    clauses: list[Clause] = []
    while True:
        skip_ws()
        start = pos
        negated = False
        if pos < n and spec[pos] == "!":
            negated = True
            pos += 1
            skip_ws()
        if pos >= n or spec[pos] != "(":
            raise ConstraintParseError("expected '('", pos)
        open_at = pos
        pos += 1
        forms: list[str] = []
        while True:
            skip_ws()
            if pos < n and spec[pos] == ")" and not forms:
                raise ConstraintParseError("empty clause", start)
            m = _FORM_RE.match(spec, pos)
            if m is None:
                if pos >= n:
                    raise ConstraintParseError("unbalanced parentheses", open_at)
                if spec[pos] == "(":
                    raise ConstraintParseError("unbalanced parentheses", pos)
                raise ConstraintParseError("expected form", pos)
            form = m.group(0)
            if form != form.lower():
                raise ConstraintParseError(f"mixed-case form {form!r}", pos)
            if form in forms:
                raise ConstraintParseError(f"duplicate form {form!r}", pos)
            forms.append(form)
            pos = m.end()
            skip_ws()
            if pos >= n:
                raise ConstraintParseError("unbalanced parentheses", open_at)
            if spec[pos] == "|":
                pos += 1
                continue
            if spec[pos] == ")":
                pos += 1
                break
            raise ConstraintParseError(f"unexpected {spec[pos]!r}", pos)
        clauses.append(_clause_from_forms(forms, Polarity.FORBID if negated else Polarity.REQUIRE))
        skip_ws()
        if pos == n:
            break
        if spec[pos] == ")":
            raise ConstraintParseError("unbalanced parentheses", pos)
        if spec[pos] != "&":
            raise ConstraintParseError(f"expected '&', got {spec[pos]!r}", pos)
        pos += 1
        skip_ws()
        if pos == n:
            raise ConstraintParseError("trailing '&'", pos - 1)
    return CnfConstraint(tuple(clauses))


def from_keywords(keywords: Sequence[str], lexicon: InflectionLexicon) -> CnfConstraint:
    """One positive clause per keyword holding its lexicon forms, in keyword order."""
    if not keywords:
        raise ValueError("keyword list is empty")
    clauses = []
    for kw in keywords:
        kw = kw.lower()
        clauses.append(_clause_from_forms(lexicon.forms(kw), Polarity.REQUIRE, keyword=kw))
    return CnfConstraint(tuple(clauses))


class Status(str, enum.Enum):
    UNMET = "unmet"
    MET = "met"
    VIOLATED = "violated"


@dataclass(frozen=True)
class SatisfactionState:
    """Per-clause status. ``matched_forms[i]`` is the first form that set clause i
    (the satisfying form for positive clauses, the offending one for negative
    clauses), else None."""

    clause_status: tuple[Status, ...]
    matched_forms: tuple[str | None, ...]
    positive: tuple[bool, ...]

    @property
    def signature(self) -> tuple[Status, ...]:
        return self.clause_status


def initial_state(c: CnfConstraint) -> SatisfactionState:
    status = tuple(Status.UNMET if cl.positive else Status.MET for cl in c.clauses)
    return SatisfactionState(status, (None,) * len(c.clauses), tuple(cl.positive for cl in c.clauses))


def advance(state: SatisfactionState, next_word: str, c: CnfConstraint) -> SatisfactionState:
    hits = c.clauses_for(next_word.lower())
    if not hits:
        return state
    status = list(state.clause_status)
    matched = list(state.matched_forms)
    changed = False
    for i in hits:
        if c.clauses[i].positive:
            if status[i] is Status.UNMET:
                status[i] = Status.MET
                matched[i] = next_word.lower()
                changed = True
        elif status[i] is Status.MET:
            status[i] = Status.VIOLATED
            matched[i] = next_word.lower()
            changed = True
    if not changed:
        return state
    return SatisfactionState(tuple(status), tuple(matched), state.positive)


def evaluate(seq: Sequence[str] | str, c: CnfConstraint) -> SatisfactionState:
    """Satisfaction of ``c`` by a word sequence (a string is tokenized first)."""
    toks = words(seq) if isinstance(seq, str) else seq
    state = initial_state(c)
    for w in toks:
        state = advance(state, w, c)
    return state


def coverage(state: SatisfactionState) -> float:
    """Fraction of positive clauses met; 1.0 when there are none."""
    flags = [st is Status.MET for st, pos in zip(state.clause_status, state.positive) if pos]
    return sum(flags) / len(flags) if flags else 1.0


def unmet_count(state: SatisfactionState) -> int:
    return sum(st is Status.UNMET for st in state.clause_status)


def violated_count(state: SatisfactionState) -> int:
    return sum(st is Status.VIOLATED for st in state.clause_status)


def is_satisfied(state: SatisfactionState) -> bool:
    return all(s is Status.MET for s in state.clause_status)
