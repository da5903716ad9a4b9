"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
the verbose log) with the measured numbers next to the target.
"""
import json
import math
import random
import shutil
import time
from contextlib import contextmanager

import numpy as np
import pytest

from constraingen import mockdata
from constraingen.checker import score_posterior
from constraingen.cli import default_budget, main
from constraingen.constraints import (
    Clause,
    CnfConstraint,
    Literal,
    Polarity,
    advance,
    evaluate,
    from_keywords,
    initial_state,
    is_satisfied,
    parse_constraint,
    words,
)
from constraingen.decode import DecodeConfig, beam, constrained_beam, greedy
from constraingen.evaluation import bleu_4, lcs_length, load_dataset, rouge_l
from constraingen.geometry import TrainConfig, gradients, train, verify
from constraingen.lm import HttpLm, TableLm, build_ngram
from constraingen.lm.server import create_app
from constraingen.ontology import (
    Disjoint,
    Domain,
    MemberOf,
    Ontology,
    Range,
    Rel,
    Sub,
    closure,
    detect_mentions,
    minimal_axioms,
    violation_probability,
)
from constraingen.repair import repair_lexical
from oracles import (
    bleu_oracle,
    brute_closure,
    enumerate_violation,
    lcs_recursive,
    pattern_statuses,
    rouge_oracle,
)
from test_decode import beam_oracle, constrained_oracle, random_constraint, table
from test_geometry import TOY, _away_from_kinks, _oracle_total, _random_instance
from test_lm import CASES, _lm, _Server, _serving
from test_ontology import OBJECTS, SUBJECTS, TEXT_WORDS, VIOL_GAZ, VIOL_ONT


@contextmanager
def criterion(capsys, n, name):
    """Print one PASS/FAIL line for a criterion; ``info`` collects measurements."""
    info = {}
    try:
        yield info
    except BaseException:
        status = "FAIL"
        raise
    else:
        status = "PASS"
    finally:
        detail = " ".join(f"{k}={v}" for k, v in info.items())
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {status} {name}: {detail}")


@pytest.fixture()
def work(mock_dir, tmp_path):
    dst = tmp_path / "mock"
    shutil.copytree(mock_dir, dst)
    return dst


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    assert code == 0, err
    return out


# 1 -----------------------------------------------------------------------------------

def test_smc_satisfaction_guarantee(capsys, work):
    with criterion(capsys, 1, "SMC satisfaction on 200 mock rows") as info:
        t0 = time.perf_counter()
        out = json.loads(_run(capsys, "eval", "--config", str(work / "config.json"), "--strategy", "smc",
                              "--output", str(work / "smc")))
        elapsed = time.perf_counter() - t0
        agg = out["aggregates"]
        info.update(rows=out["n_rows"], satisfied=agg["satisfied"], coverage=agg["coverage"],
                    seconds=f"{elapsed:.1f}")
        assert out["n_rows"] == 200 and out["failures"] == 0
        assert all(3 <= len(r.concept_set) <= 5 for r in load_dataset(work / "dataset.jsonl"))
        assert len(json.loads((work / "smc.json").read_text())["rows"]) == 200
        assert agg["satisfied"] == 100.0 and agg["coverage"] == 100.0
        assert elapsed < 60


# 2 -----------------------------------------------------------------------------------

def test_penalty_monotonicity(capsys, work):
    with criterion(capsys, 2, "coverage non-decreasing in alpha, alpha=0 equals beam") as info:
        base = ["eval", "--config", str(work / "config.json"), "--limit", "100"]
        cov = {}
        texts = {}
        for alpha in (0, 1, 2, 5):
            _run(capsys, *base, "--strategy", "nl", "--alpha", str(alpha), "--output", str(work / f"nl{alpha}"))
            report = json.loads((work / f"nl{alpha}.json").read_text())
            cov[alpha] = report["aggregates"]["coverage"]
            texts[alpha] = [r["text"] for r in report["rows"]]
        _run(capsys, *base, "--strategy", "beam", "--output", str(work / "beam"))
        beam_texts = [r["text"] for r in json.loads((work / "beam.json").read_text())["rows"]]
        info.update(coverage=" ".join(f"{a}:{cov[a]:.1f}" for a in cov),
                    identical=sum(a == b for a, b in zip(texts[0], beam_texts)))
        values = [cov[a] for a in (0, 1, 2, 5)]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert [t.encode() for t in texts[0]] == [t.encode() for t in beam_texts]


# 3 -----------------------------------------------------------------------------------

def test_brute_force_decoding(capsys):
    with criterion(capsys, 3, "beam and constrained beam match exhaustive search") as info:
        beam_ok = cons_ok = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n, max_len = int(rng.integers(2, 5)), int(rng.integers(1, 4))
            lm = table(n, seed)
            cfg = DecodeConfig(max_new_tokens=max_len, beam_size=n ** max_len)
            beam_ok += beam(lm, [], cfg)[0].generated == beam_oracle(lm, max_len)

            rng = np.random.default_rng(1000 + seed)
            n, max_len = int(rng.integers(2, 5)), int(rng.integers(1, 4))
            lm = table(n, seed)
            c = random_constraint(rng, n)
            alpha = float(rng.choice([0.5, 1.0, 2.0, 5.0]))
            cfg = DecodeConfig(max_new_tokens=max_len, beam_size=n ** max_len, alpha=alpha)
            cons_ok += constrained_beam(lm, [], c, cfg).generated == constrained_oracle(lm, c, alpha, max_len)
        info.update(beam=f"{beam_ok}/100", constrained=f"{cons_ok}/100")
        assert beam_ok == 100 and cons_ok == 100


# 4 -----------------------------------------------------------------------------------

LEX_VOCAB = ["dog", "dogs", "cat", "cats", "run", "ran", "field", "the", "a", "park"]
LEX_FORMS = LEX_VOCAB[:7] + ["zebra"]
LEX_PUNCT = ["", ".", ",", "!", "?", ";", ":", "\"", "(", ")", "'"]


def _random_constraint(rng):
    pool = list(LEX_FORMS)
    clauses = []
    for _ in range(rng.randint(1, 4)):
        if not pool:
            break
        forms = rng.sample(pool, rng.randint(1, min(3, len(pool))))
        pool = [f for f in pool if f not in forms]
        pol = Polarity.FORBID if rng.random() < 0.5 else Polarity.REQUIRE
        clauses.append(Clause(tuple(Literal(f, pol, frozenset({f})) for f in forms)))
    return CnfConstraint(tuple(clauses))


def _random_sentence(rng):
    toks = [rng.choice(LEX_VOCAB + ["Dog", "RAN", "dogsled"]) + rng.choice(LEX_PUNCT)
            for _ in range(rng.randint(0, 10))]
    return " ".join(toks)


def test_lexical_oracle(capsys):
    with criterion(capsys, 4, "evaluate matches pattern oracle, fold equals evaluate") as info:
        rng = random.Random(4)
        pattern_ok = fold_ok = 0
        for _ in range(1000):
            c, text = _random_constraint(rng), _random_sentence(rng)
            pattern_ok += evaluate(text, c).clause_status == pattern_statuses(text, c)
        for _ in range(1000):
            c, text = _random_constraint(rng), _random_sentence(rng)
            s = initial_state(c)
            for w in words(text):
                s = advance(s, w, c)
            fold_ok += s == evaluate(words(text), c)
        info.update(pattern=f"{pattern_ok}/1000", fold=f"{fold_ok}/1000")
        assert pattern_ok == 1000 and fold_ok == 1000


# 5 -----------------------------------------------------------------------------------

ONT_CONCEPTS = [f"C{i}" for i in range(8)]
ONT_INDS = ["a", "b", "c"]


def _random_ontology(rng, acyclic=False):
    axioms = []
    for _ in range(rng.randint(0, 12)):
        kind = rng.choice(["sub", "sub", "disjoint", "member", "rel", "domain", "range"])
        c1, c2 = rng.choice(ONT_CONCEPTS), rng.choice(ONT_CONCEPTS)
        pred = rng.choice(["p", "q"])
        if kind == "sub":
            if c1 == c2:
                continue
            if acyclic and c1 > c2:
                c1, c2 = c2, c1
            axioms.append(Sub(c1, c2))
        elif kind == "disjoint":
            axioms.append(Disjoint(c1, c2))
        elif kind == "member":
            axioms.append(MemberOf(rng.choice(ONT_INDS), c1))
        elif kind == "rel":
            axioms.append(Rel(pred, rng.choice(ONT_INDS), rng.choice(ONT_INDS)))
        elif kind == "domain":
            axioms.append(Domain(pred, c1))
        else:
            axioms.append(Range(pred, c1))
    return Ontology.from_axioms(axioms)


def _random_text(rng):
    if rng.random() < 0.5:
        return [rng.choice(TEXT_WORDS) for _ in range(rng.randint(0, 9))]
    parts = []
    for _ in range(rng.randint(1, 2)):
        seg = [rng.choice(SUBJECTS)]
        for _ in range(rng.randint(1, 2)):
            seg += ["is", rng.choice(["a", "an"]), rng.choice(OBJECTS)]
        parts.append(" ".join(seg))
    return words(" and ".join(parts))


def test_ontology_oracle(capsys):
    with criterion(capsys, 5, "closure, minimal axioms and violation probability oracles") as info:
        rng = random.Random(5)
        closure_ok = minimal_ok = 0
        for _ in range(500):
            o = _random_ontology(rng)
            closure_ok += set(closure(o).axioms) == brute_closure(set(o.axioms))
            a = _random_ontology(rng, acyclic=True)
            minimal_ok += closure(minimal_axioms(a)).axioms == closure(a).axioms
        facts = brute_closure(set(VIOL_ONT.axioms))
        cases = worst = nonzero = 0
        while cases < 500:
            toks = _random_text(rng)
            ms = detect_mentions(toks, VIOL_GAZ)
            if len(ms) > 3:
                continue
            p, _ = violation_probability(toks, VIOL_ONT, VIOL_GAZ)
            expected = enumerate_violation(toks, ms, VIOL_ONT.concepts, VIOL_ONT.individuals, facts)
            worst = max(worst, abs(p - expected))
            nonzero += expected > 0
            cases += 1
        info.update(closure=f"{closure_ok}/500", minimal=f"{minimal_ok}/500",
                    violation_cases=cases, nonzero=nonzero, max_err=f"{worst:.1e}")
        assert closure_ok == 500 and minimal_ok == 500 and worst <= 1e-12


# 6 -----------------------------------------------------------------------------------

def test_metric_oracles(capsys):
    with criterion(capsys, 6, "ROUGE-L and BLEU-4 examples and oracle agreement") as info:
        r = rouge_l("a b c d", ["a c b d"])
        b = bleu_4("the dog", ["the dog runs"])
        info.update(rouge=f"{r:.4f}", bleu=f"{b:.4f}")
        assert abs(r - 75.0) <= 1e-9
        assert abs(b - 60.65) <= 0.01
        assert rouge_l("the dog runs", ["the dog runs"]) == 100.0
        assert abs(bleu_4("the dog runs", ["the dog runs"]) - 100.0) <= 1e-9
        rng = random.Random(6)
        worst = 0.0
        for _ in range(500):
            cand = [rng.choice("abcd") for _ in range(rng.randint(0, 7))]
            refs = [[rng.choice("abcd") for _ in range(rng.randint(1, 7))] for _ in range(rng.randint(1, 3))]
            assert lcs_length(cand, refs[0]) == lcs_recursive(cand, refs[0])
            worst = max(worst, abs(rouge_l(cand, refs) - rouge_oracle(cand, refs)),
                        abs(bleu_4(cand, refs) - bleu_oracle(cand, refs)))
        info["max_oracle_err"] = f"{worst:.1e}"
        assert worst <= 1e-9


# 7 -----------------------------------------------------------------------------------

def test_geometry(capsys):
    with criterion(capsys, 7, "gradients, toy training, monotone trace") as info:
        rng = np.random.default_rng(7)
        gamma, r_max, h = 0.1, 2.5, 1e-5
        worst, checked = 0.0, 0
        while checked < 100:
            o, e = _random_instance(rng)
            if not _away_from_kinks(e, o, gamma, r_max):
                continue
            analytic = gradients(e, o, gamma, r_max)
            fd = np.zeros_like(e.theta)
            for i in range(e.theta.size):
                up, dn = e.theta.copy(), e.theta.copy()
                up[i] += h
                dn[i] -= h
                fd[i] = (_oracle_total(e.with_theta(up), o, gamma, r_max)
                         - _oracle_total(e.with_theta(dn), o, gamma, r_max)) / (2 * h)
            scale = max(np.linalg.norm(analytic), np.linalg.norm(fd))
            if scale > 0:
                worst = max(worst, np.linalg.norm(analytic - fd) / scale)
            checked += 1
        t0 = time.perf_counter()
        emb, trace = train(TOY, TrainConfig(dim=2, margin=0.05, epochs=2000, seed=0))
        elapsed = time.perf_counter() - t0
        fraction = verify(emb, TOY).fraction
        monotone = all(b <= a for a, b in zip(trace, trace[1:]))
        for seed in range(1, 6):
            _, t = train(mockdata.toy_ontology(), TrainConfig(seed=seed))
            monotone &= all(b <= a for a, b in zip(t, t[1:]))
        info.update(instances=checked, max_rel_err=f"{worst:.1e}", verify=fraction,
                    train_seconds=f"{elapsed:.2f}", monotone=monotone)
        assert worst < 1e-4 and fraction == 1.0 and elapsed < 10 and monotone


# 8 -----------------------------------------------------------------------------------

def test_posterior_arithmetic(capsys):
    with criterion(capsys, 8, "posterior weights") as info:
        c = parse_constraint("(dog|dogs)")
        cands = [(("a", "dog"), math.log(0.5)), (("the", "dogs"), math.log(0.3)), (("a", "cat"), math.log(0.2))]
        weights = [s.posterior_weight for s in score_posterior(cands, c, lam=math.log(2))]
        err = max(abs(w - t) for w, t in zip(weights, (5 / 9, 3 / 9, 1 / 9)))
        rng = random.Random(8)
        sum_err, argmax_ok = 0.0, 0
        vocab = ["dog", "dogs", "cat", "the", "a"]
        for _ in range(500):
            cs = [(tuple(rng.choice(vocab) for _ in range(rng.randint(1, 4))), rng.uniform(-50, 0))
                  for _ in range(rng.randint(1, 6))]
            lam = rng.uniform(0, 5)
            shift = rng.uniform(-100, 100)
            a = score_posterior(cs, c, lam=lam)
            b = score_posterior([(t, lp + shift) for t, lp in cs], c, lam=lam)
            sum_err = max(sum_err, abs(sum(s.posterior_weight for s in a) - 1.0))
            wa = [s.posterior_weight for s in a]
            wb = [s.posterior_weight for s in b]
            argmax_ok += int(np.argmax(wa)) == int(np.argmax(wb)) or math.isclose(max(wa), wa[int(np.argmax(wb))],
                                                                                 rel_tol=1e-9)
        info.update(example_err=f"{err:.1e}", max_sum_err=f"{sum_err:.1e}", argmax=f"{argmax_ok}/500")
        assert err <= 1e-12 and sum_err <= 1e-9 and argmax_ok == 500


# 9 -----------------------------------------------------------------------------------

def test_repair(capsys, mock_lm, lexicon):
    with criterion(capsys, 9, "repair of failing mock generations") as info:
        cfg = DecodeConfig(max_new_tokens=12)
        failing, satisfied_inputs = [], []
        for i, row in enumerate(mockdata.rows(400, seed=9)):
            prompt = mock_lm.tokenize(" ".join(row.concept_set))
            text = greedy(mock_lm, prompt, cfg).text(mock_lm)
            seq = words(text)
            spec = from_keywords(list(row.concept_set), lexicon).to_text()
            present = sorted({w for w in seq if w in ("the", "a", "in", "on", "near", "is")})
            if i % 2 == 0 and present:
                spec += f"&!({present[0]})"
            c = parse_constraint(spec)
            (satisfied_inputs if is_satisfied(evaluate(seq, c)) else failing).append((seq, c))
            if len(failing) >= 100:
                break
        fixed, leftovers, over_budget = 0, 0, 0
        for seq, c in failing[:100]:
            budget = default_budget(seq, c)
            r = repair_lexical(seq, c, mock_lm, budget)
            fixed += r.satisfied and is_satisfied(evaluate(r.words, c))
            leftovers += bool(c.forbidden_forms() & set(r.words))
            over_budget += len(r.edits) > budget
        # references satisfy their own keyword constraints
        for row in mockdata.rows(50, seed=19):
            satisfied_inputs.append((words(row.references[0]), row.constraint(lexicon)))
        zero_edit = sum(repair_lexical(s, c, mock_lm, default_budget(s, c)).edits == []
                        for s, c in satisfied_inputs)
        n_sat = len(satisfied_inputs)
        info.update(failing=len(failing[:100]), repaired=f"{fixed}/100", forbidden_left=leftovers,
                    zero_edit=f"{zero_edit}/{n_sat}")
        assert len(failing) >= 100 and fixed == 100 and leftovers == 0 and over_budget == 0
        assert zero_edit == n_sat


# 10 ----------------------------------------------------------------------------------

def test_wire_protocol(capsys):
    with criterion(capsys, 10, "HTTP client against the stub server") as info:
        local = build_ngram(mockdata.corpus(300, 0), 3, 0.1)
        roundtrips = 0
        with _Server(create_app(local)) as url, HttpLm(url) as remote:
            assert list(remote.vocab) == local.vocab and remote.eos == local.eos and remote.bos == local.bos
            for sent in mockdata.corpus(20, 1):
                ids = remote.tokenize(sent)
                assert ids == local.tokenize(sent) and remote.detokenize(ids) == local.detokenize(ids)
                for k in range(len(ids) + 1):
                    assert np.array_equal(remote.next_logprobs(ids[:k]), local.next_logprobs(ids[:k]))
                    roundtrips += 1
        table_lm = TableLm(["x", "y", "</s>"], 2, default=[0.25, 0.0, 0.75])
        with _Server(create_app(table_lm)) as url, HttpLm(url) as remote:
            assert remote.next_logprobs([0])[1] == -math.inf
        typed = 0
        for path, response, error in CASES:
            with pytest.raises(error):
                _lm(_serving(**{path: response})).next_logprobs([0])
            typed += 1
        info.update(logprob_roundtrips=roundtrips, error_cases=f"{typed}/{len(CASES)}")


# 11 ----------------------------------------------------------------------------------

def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def test_determinism(capsys, work):
    with criterion(capsys, 11, "gen/eval/repair/embed reruns identical") as info:
        cfg = str(work / "config.json")
        commands = {
            "gen": ["gen", "--config", cfg, "--keywords", "dog,throw,ball,park", "--seed", "3"],
            "gen-nl": ["gen", "--config", cfg, "--keywords", "cat,run,field", "--strategy", "nl"],
            "eval": ["eval", "--config", cfg, "--limit", "25", "--output", str(work / "det")],
            "repair": ["repair", "--config", cfg, "--keywords", "dog,run,field", "--text", "a", "cat", "sat"],
            "embed": ["embed", "--config", cfg],
        }
        same = 0
        for name, argv in commands.items():
            runs = []
            for _ in range(2):
                out = _strip_timing(json.loads(_run(capsys, *argv)))
                if name == "eval":
                    out["report"] = _strip_timing(json.loads((work / "det.json").read_text()))
                runs.append(json.dumps(out, sort_keys=True).encode())
            same += runs[0] == runs[1]
        info["identical"] = f"{same}/{len(commands)}"
        assert same == len(commands)
