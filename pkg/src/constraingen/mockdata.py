"""Deterministic CommonGen-style mock data for the n-gram backend.

A small template grammar produces a training corpus, an inflection
lexicon covering every content word, keyword rows with references, and
in-context shot examples. Everything is a pure function of the seed.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .constraints import InflectionLexicon
from .evaluation import DatasetRow
from .ontology import Disjoint, Gazetteer, MemberOf, Ontology, Rel, Domain, Range, Sub

NOUNS = {
    # singular: plural
    "dog": "dogs", "cat": "cats", "man": "men", "woman": "women", "boy": "boys",
    "girl": "girls", "child": "children", "horse": "horses", "bird": "birds",
    "player": "players", "kid": "kids", "team": "teams",
}
OBJECTS = {
    "ball": "balls", "frisbee": "frisbees", "stick": "sticks", "bike": "bikes",
    "kite": "kites", "rope": "ropes", "hat": "hats", "bag": "bags", "book": "books",
}
PLACES = {
    "field": "fields", "park": "parks", "beach": "beaches", "river": "rivers",
    "street": "streets", "tree": "trees", "grass": "grass", "hill": "hills",
    "yard": "yards", "road": "roads", "lake": "lakes",
}
# base: (3rd person, -ing, past)
INTRANSITIVE = {
    "run": ("runs", "running", "ran"), "jump": ("jumps", "jumping", "jumped"),
    "walk": ("walks", "walking", "walked"), "swim": ("swims", "swimming", "swam"),
    "sit": ("sits", "sitting", "sat"), "play": ("plays", "playing", "played"),
    "rest": ("rests", "resting", "rested"), "dance": ("dances", "dancing", "danced"),
}
TRANSITIVE = {
    "throw": ("throws", "throwing", "threw"), "catch": ("catches", "catching", "caught"),
    "kick": ("kicks", "kicking", "kicked"), "carry": ("carries", "carrying", "carried"),
    "chase": ("chases", "chasing", "chased"), "hold": ("holds", "holding", "held"),
    "ride": ("rides", "riding", "rode"), "find": ("finds", "finding", "found"),
}
PREPS = ("in", "across", "near", "by", "on", "through")
ADJECTIVES = ("green", "big", "small", "old", "young", "happy", "red", "wet")


@dataclass(frozen=True)
class Sentence:
    text: str
    keywords: tuple[str, ...]


def lexicon() -> InflectionLexicon:
    entries: dict[str, tuple[str, ...]] = {}
    for table in (NOUNS, OBJECTS, PLACES):
        for sg, pl in table.items():
            entries[sg] = (sg, pl)
    for verbs in (INTRANSITIVE, TRANSITIVE):
        for base, (third, ing, past) in verbs.items():
            entries[base] = (base, third, ing, past)
    return InflectionLexicon(entries)


def _noun(rng: random.Random, table: dict[str, str]) -> tuple[str, str, bool]:
    lemma = rng.choice(sorted(table))
    plural = rng.random() < 0.3
    return lemma, table[lemma] if plural else lemma, plural


def sentence(rng: random.Random) -> Sentence:
    subj, subj_form, plural = _noun(rng, NOUNS)
    det = "the" if plural or rng.random() < 0.6 else "a"
    adj = rng.choice(ADJECTIVES) + " " if rng.random() < 0.3 else ""
    head = f"{det} {adj}{subj_form}"
    place, place_form, _ = _noun(rng, PLACES)
    prep = rng.choice(PREPS)
    tense = rng.choice(("present", "progressive", "past"))
    if rng.random() < 0.5:
        verb = rng.choice(sorted(INTRANSITIVE))
        third, ing, past = INTRANSITIVE[verb]
        vp = _verb_phrase(tense, plural, verb, third, ing, past)
        text = f"{head} {vp} {prep} the {place_form}"
        kws = [subj, verb, place]
    else:
        verb = rng.choice(sorted(TRANSITIVE))
        third, ing, past = TRANSITIVE[verb]
        obj, obj_form, _ = _noun(rng, OBJECTS)
        vp = _verb_phrase(tense, plural, verb, third, ing, past)
        text = f"{head} {vp} the {obj_form} {prep} the {place_form}"
        kws = [subj, verb, obj, place]
    if rng.random() < 0.35:
        verb2 = rng.choice(sorted(v for v in INTRANSITIVE if v != kws[1]))
        third, ing, past = INTRANSITIVE[verb2]
        text += f" and {_verb_phrase(tense, plural, verb2, third, ing, past)}"
        kws.append(verb2)
    return Sentence(text, tuple(kws))


def _verb_phrase(tense: str, plural: bool, base: str, third: str, ing: str, past: str) -> str:
    if tense == "present":
        return base if plural else third
    if tense == "progressive":
        return ("are " if plural else "is ") + ing
    return past


def corpus(n: int = 4000, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    return [sentence(rng).text for _ in range(n)]


def rows(n: int = 200, seed: int = 1, refs_per_row: int = 2) -> list[DatasetRow]:
    """Rows with 3-5 keywords; the first reference is the sentence they came from."""
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        s = sentence(rng)
        if not 3 <= len(s.keywords) <= 5:
            continue
        refs = [s.text]
        tries = 0
        while len(refs) < refs_per_row and tries < 200:
            tries += 1
            other = sentence(rng)
            if sorted(other.keywords) == sorted(s.keywords) and other.text not in refs:
                refs.append(other.text)
        out.append(DatasetRow(s.keywords, tuple(refs)))
    return out


def shots(n: int = 2, seed: int = 2) -> list[dict]:
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        s = sentence(rng)
        if 3 <= len(s.keywords) <= 5:
            out.append({"keywords": list(s.keywords), "sentence": s.text})
    return out


def toy_ontology() -> Ontology:
    """Presidents and parties: a small consistent ontology used in examples and tests."""
    return Ontology.from_axioms([
        Sub("President", "Person"),
        Sub("Person", "Agent"),
        Sub("Democrat", "Person"),
        Sub("Republican", "Person"),
        Disjoint("Democrat", "Republican"),
        MemberOf("obama", "President"),
        MemberOf("obama", "Democrat"),
        MemberOf("lincoln", "Republican"),
        Rel("partyOf", "obama", "democratic_party"),
        Domain("partyOf", "Person"),
        Range("partyOf", "Party"),
    ])


def toy_gazetteer() -> Gazetteer:
    return Gazetteer({
        "obama": (("obama", 0.9),),
        "barack obama": (("obama", 0.99),),
        "lincoln": (("lincoln", 0.8),),
        "president": (("President", 1.0),),
        "republican": (("Republican", 1.0),),
        "democrat": (("Democrat", 1.0),),
        "person": (("Person", 1.0),),
    })


def write_all(outdir: str | Path, n_rows: int = 200, corpus_size: int = 4000, seed: int = 0) -> dict[str, str]:
    """Write corpus, lexicon, dataset, shots, ontology, gazetteer and a config."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.txt",
        "lexicon": out / "lexicon.json",
        "dataset": out / "dataset.jsonl",
        "shots": out / "shots.jsonl",
        "ontology": out / "ontology.json",
        "gazetteer": out / "gazetteer.json",
        "config": out / "config.json",
    }
    paths["corpus"].write_text("\n".join(corpus(corpus_size, seed)) + "\n", encoding="utf-8")
    lexicon().dump(paths["lexicon"])
    with open(paths["dataset"], "w", encoding="utf-8") as fh:
        for r in rows(n_rows, seed + 1):
            fh.write(json.dumps(r.to_json()) + "\n")
    with open(paths["shots"], "w", encoding="utf-8") as fh:
        for s in shots(2, seed + 2):
            fh.write(json.dumps(s) + "\n")
    paths["ontology"].write_text(json.dumps(toy_ontology().to_json(), indent=2) + "\n", encoding="utf-8")
    paths["gazetteer"].write_text(json.dumps(toy_gazetteer().to_json(), indent=2) + "\n", encoding="utf-8")
    config = {
        "backend": {"ngram": {"corpus": paths["corpus"].name, "order": 3, "lambda": 0.01}},
        "decode": {"strategy": "smc", "max_new_tokens": 16, "beam_size": 8, "alpha": 2.0,
                   "n_particles": 8, "ess_threshold": 0.5, "seed": 0, "temperature": 1.0},
        "prompt": {"style": "abs", "shots": paths["shots"].name, "n_shots": 0},
        "checker": {"lambda": 1.0},
        "paths": {"dataset": paths["dataset"].name, "lexicon": paths["lexicon"].name,
                  "ontology": paths["ontology"].name, "gazetteer": paths["gazetteer"].name,
                  "output": "report"},
    }
    paths["config"].write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
