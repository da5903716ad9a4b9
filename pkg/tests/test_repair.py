
import pytest
from hypothesis import given, settings, strategies as st

from constraingen.checker import ScoredCandidate
from constraingen.constraints import evaluate, from_keywords, is_satisfied, parse_constraint, words
from constraingen.repair import (
    EditOp,
    apply_edits,
    repair_lexical,
    reprompt_payload,
    select_repair_candidates,
)


def loglik_oracle(lm, seq):
    ids = lm.encode(" ".join(seq), strict=False).ids + [lm.eos]
    return sum(float(lm.next_logprobs(ids[:i])[t]) for i, t in enumerate(ids))


def test_satisfied_input_untouched(mock_lm, lexicon):
    seq = words("the dog runs in the field")
    r = repair_lexical(seq, from_keywords(["dog", "run", "field"], lexicon), mock_lm, 5)
    assert r.edits == [] and r.words == seq and r.satisfied


def test_single_insertion_matches_exhaustive_scan(mock_lm):
    seq = words("the dog sleeps")
    c = parse_constraint("(field|fields)")
    r = repair_lexical(seq, c, mock_lm, 3)
    assert len(r.edits) == 1 and r.edits[0].kind == "insert" and r.satisfied
    best = max(((loglik_oracle(mock_lm, seq[:p] + [f] + seq[p:]), -p, -fi, p, f)
                for p in range(len(seq) + 1) for fi, f in enumerate(c.clauses[0].forms)))
    assert (r.edits[0].pos, r.edits[0].word) == (best[3], best[4])


def test_forbidden_word_deleted(mock_lm):
    r = repair_lexical(words("the cat sat"), parse_constraint("!(cat|cats)"), mock_lm, 3)
    assert r.edits == [EditOp("delete", 1)] and r.words == ["the", "sat"] and r.satisfied


def test_only_word_forbidden_is_replaced(mock_lm):
    r = repair_lexical(["cat"], parse_constraint("!(cat|cats)"), mock_lm, 3)
    assert len(r.edits) == 1 and r.edits[0].kind == "replace"
    assert r.words[0] not in ("cat", "cats") and r.satisfied


def test_budget_exhausted_is_not_an_error(mock_lm, lexicon):
    r = repair_lexical(["the"], from_keywords(["dog", "run", "field"], lexicon), mock_lm, 1)
    assert not r.satisfied and len(r.edits) == 1
    with pytest.raises(ValueError):
        repair_lexical(["the"], parse_constraint("(dog)"), mock_lm, -1)


def test_edit_bounds():
    with pytest.raises(IndexError):
        EditOp("delete", 3).apply(["a"])
    with pytest.raises(IndexError):
        EditOp("insert", 2).apply(["a"])
    assert EditOp("insert", 1, "b").apply(["a"]) == ["a", "b"]
    assert EditOp("replace", 0, "z").apply(["a"]) == ["z"]


VOCAB = ["the", "dog", "cat", "runs", "in", "field", "park", "a", "sat"]


@settings(max_examples=60)
@given(st.lists(st.sampled_from(VOCAB), max_size=8),
       st.lists(st.sampled_from(["dog", "run", "field", "park", "ball"]), min_size=1, max_size=3, unique=True),
       st.sets(st.sampled_from(["the", "cat", "a", "sat"]), max_size=2))
def test_repair_properties(mock_lm, lexicon, seq, keywords, banned):
    spec = from_keywords(keywords, lexicon).to_text()
    if banned:
        spec += "&!(" + "|".join(sorted(banned)) + ")"
    c = parse_constraint(spec)
    forbidden = c.forbidden_forms()
    budget = len(c.clauses) + sum(w in forbidden for w in seq)
    r = repair_lexical(seq, c, mock_lm, budget)
    assert apply_edits(seq, r.edits) == r.words
    assert r.satisfied == is_satisfied(evaluate(r.words, c))
    assert r.satisfied
    assert not forbidden & set(r.words)
    assert len(r.edits) <= budget
    if is_satisfied(evaluate(seq, c)):
        assert r.edits == []
    assert r.lm_logprob == pytest.approx(loglik_oracle(mock_lm, r.words))


def test_reprompt_payload():
    p = reprompt_payload("Who won?", "the dog won the race", "the cat won")
    assert "the dog won the race" in p and "Who won?" in p
    assert 'Do not repeat the original draft, which was inconsistent: "the cat won"' in p
    assert "Do not repeat" not in reprompt_payload("Who won?", "the dog won", "")
    assert p == reprompt_payload("Who won?", "the dog won the race", "the cat won")


def _sc(w, lp, ids):
    return ScoredCandidate(ids, "", lp, 0.0, 0.0, 0.0, w)


def test_select_repair_candidates():
    cands = [_sc(0.2, -1.0, (1,)), _sc(0.5, -3.0, (2,)), _sc(0.3, -2.0, (3,))]
    assert [c.ids for c in select_repair_candidates(cands, 5)] == [(2,), (3,), (1,)]
    assert select_repair_candidates(cands, 1)[0].ids == (2,)
    tie = [_sc(0.5, -3.0, (1,)), _sc(0.5, -1.0, (2,))]
    assert select_repair_candidates(tie, 1)[0].ids == (2,)
    with pytest.raises(ValueError):
        select_repair_candidates(cands, 0)
