"""Constraint-aware text generation: lexical CNF constraints, ontology
reasoning, constrained decoding, post-hoc checking and repair."""
from .constraints import (
    CnfConstraint,
    InflectionLexicon,
    evaluate,
    from_keywords,
    is_satisfied,
    parse_constraint,
    words,
)
from .decode import DecodeConfig, beam, constrained_beam, greedy, smc
from .ontology import Ontology, closure, minimal_axioms, violation_probability

__version__ = "0.1.0"

__all__ = [
    "CnfConstraint", "InflectionLexicon", "evaluate", "from_keywords", "is_satisfied",
    "parse_constraint", "words", "DecodeConfig", "beam", "constrained_beam", "greedy", "smc",
    "Ontology", "closure", "minimal_axioms", "violation_probability",
]
