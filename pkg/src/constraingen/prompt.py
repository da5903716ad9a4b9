"""Constraint prompts (abstract and CNF styles) and ontology-aware query rewriting."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .constraints import CnfConstraint, InflectionLexicon, evaluate, from_keywords, is_satisfied, words
from .ontology import Gazetteer, Ontology, constraints_to_text, detect_mentions

__all__ = ["PromptError", "ShotExample", "load_shots", "build_abs", "build_cnf", "render_cnf",
           "rewrite_query"]

ABS_INSTRUCTION = ("Given a set of words {x}, write a sentence using all words in {x} "
                   "or inflections of {x}.")
CNF_INSTRUCTION = "Write a sentence using the words {cnf}"


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class ShotExample:
    keywords: tuple[str, ...]
    sentence: str

    @classmethod
    def create(cls, keywords: Sequence[str], sentence: str, lexicon: InflectionLexicon) -> "ShotExample":
        kws = tuple(k.lower() for k in keywords)
        if not kws:
            raise PromptError("shot example needs keywords")
        if not is_satisfied(evaluate(words(sentence), from_keywords(kws, lexicon))):
            raise PromptError(f"shot sentence {sentence!r} does not use all of {list(kws)}")
        return cls(kws, sentence)


def load_shots(path: str | Path, lexicon: InflectionLexicon) -> list[ShotExample]:
    shots = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                shots.append(ShotExample.create(d["keywords"], d["sentence"], lexicon))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise PromptError(f"{path}:{lineno}: bad shot line ({exc})") from None
            except PromptError as exc:
                raise PromptError(f"{path}:{lineno}: {exc}") from None
    return shots


def _block(words_line: str, sentence: str | None) -> str:
    if sentence is None:
        return f"Words: {words_line}\nSentence:"
    return f"Words: {words_line}\nSentence: {sentence}\n"


def build_abs(keywords: Sequence[str], shots: Sequence[ShotExample] = ()) -> str:
    if not keywords:
        raise PromptError("need at least one keyword")
    joined = ", ".join(keywords)
    parts = [ABS_INSTRUCTION.format(x=f"[{joined}]"), ""]
    parts += [_block(", ".join(s.keywords), s.sentence) for s in shots]
    parts.append(_block(joined, None))
    return "\n".join(parts)


def render_cnf(c: CnfConstraint) -> str:
    """``(f1 or f2) and (g1 or g2)``; forbid clauses become ``and do not use (...)``."""
    pos = ["(" + " or ".join(cl.forms) + ")" for cl in c.clauses if cl.positive]
    neg = ["(" + " or ".join(cl.forms) + ")" for cl in c.clauses if not cl.positive]
    text = " and ".join(pos)
    for n in neg:
        text += f" and do not use {n}"
    return text


def build_cnf(c: CnfConstraint, shots: Sequence[ShotExample] = (),
              lexicon: InflectionLexicon | None = None) -> str:
    """CNF-style prompt. Shots are rendered in CNF too when a lexicon is given."""
    if not c.positive_indices:
        raise PromptError("CNF prompt needs at least one positive clause")
    rendered = render_cnf(c)
    parts = [CNF_INSTRUCTION.format(cnf=rendered), ""]
    for s in shots:
        line = render_cnf(from_keywords(s.keywords, lexicon)) if lexicon is not None else ", ".join(s.keywords)
        parts.append(_block(line, s.sentence))
    parts.append(_block(rendered, None))
    return "\n".join(parts)


def rewrite_query(question: str, o: Ontology, g: Gazetteer) -> str:
    """Prefix ``question`` with numbered facts about the referents it mentions."""
    focus = {ref for m in detect_mentions(words(question), g) for ref, _ in m.candidates}
    facts = constraints_to_text(o, focus) if focus else []
    if not facts:
        return question
    lines = ["Step-by-step facts:"] + [f"{i}. {s}" for i, s in enumerate(facts, 1)]
    return "\n".join(lines) + "\n" + question
