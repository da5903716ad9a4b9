import json
import shutil

import pytest

from constraingen.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    try:
        data = json.loads(out) if out.strip() else None
    except json.JSONDecodeError:
        data = out
    return code, data, err


@pytest.fixture()
def work(mock_dir, tmp_path):
    dst = tmp_path / "mock"
    shutil.copytree(mock_dir, dst)
    return dst


def test_print_config_shows_defaults_and_overrides(capsys, work):
    code, cfg, _ = run(capsys, "gen", "--config", str(work / "config.json"), "--alpha", "0.5", "--print-config")
    assert code == 0
    assert cfg["decode"]["alpha"] == 0.5 and cfg["decode"]["strategy"] == "smc"
    assert cfg["embed"]["margin"] == 0.05 and cfg["checker"]["lambda"] == 1.0


def test_gen_smc_is_satisfied(capsys, work):
    code, out, _ = run(capsys, "gen", "--config", str(work / "config.json"), "--keywords", "dog,run,field")
    assert code == 0 and out["satisfied"] is True and out["coverage"] == 1.0
    assert out["prompt"].startswith("Given a set of words [dog, run, field]")


def test_gen_nl_alpha_zero_equals_beam(capsys, work):
    base = ["gen", "--config", str(work / "config.json"), "--keywords", "cat,throw,ball", "--seed", "4"]
    _, beam, _ = run(capsys, *base, "--strategy", "beam")
    _, nl, _ = run(capsys, *base, "--strategy", "nl", "--alpha", "0")
    assert nl["text"] == beam["text"]


def test_gen_missing_lexicon_names_path(capsys, work):
    (work / "lexicon.json").unlink()
    code, _, err = run(capsys, "gen", "--config", str(work / "config.json"), "--keywords", "dog,run,field")
    assert code == 2 and "lexicon.json" in err


def test_gen_does_not_need_dataset(capsys, work):
    (work / "dataset.jsonl").unlink()
    code, out, _ = run(capsys, "gen", "--config", str(work / "config.json"), "--keywords", "dog,run,field")
    assert code == 0 and out["satisfied"]


def test_gen_infeasible_exits_4(capsys, work):
    code, _, err = run(capsys, "gen", "--config", str(work / "config.json"), "--keywords", "dog,run,field",
                       "--max-new-tokens", "1")
    assert code == 4 and "infeasible" in err


def test_gen_bad_constraint_exits_6(capsys, work):
    code, _, err = run(capsys, "gen", "--config", str(work / "config.json"), "--constraint", "(dog | ")
    assert code == 6 and "constraint" in err


def test_bad_config_key_exits_2_before_running(capsys, work):
    cfg = json.loads((work / "config.json").read_text())
    cfg["decode"]["beamsize"] = 3
    (work / "bad.json").write_text(json.dumps(cfg))
    code, out, err = run(capsys, "eval", "--config", str(work / "bad.json"), "--output", str(work / "r"))
    assert code == 2 and "beamsize" in err and out is None
    assert not (work / "r.json").exists()


def test_bad_rouge_beta_exits_2(capsys, work):
    cfg = json.loads((work / "config.json").read_text())
    cfg["eval"] = {"rouge_beta": 0}
    (work / "beta.json").write_text(json.dumps(cfg))
    code, _, err = run(capsys, "eval", "--config", str(work / "beta.json"), "--strategy", "echo")
    assert code == 2 and "eval.rouge_beta" in err


def test_eval_echo_scores_100(capsys, work):
    code, out, _ = run(capsys, "eval", "--config", str(work / "config.json"), "--strategy", "echo",
                       "--output", str(work / "echo"))
    assert code == 0
    for m in ("rouge_l", "bleu_4", "coverage", "satisfied"):
        assert out["aggregates"][m] == pytest.approx(100.0)
    report = json.loads((work / "echo.json").read_text())
    assert report["n_rows"] == 200 and report["aggregates"]["cider"] is None
    assert "ROUGE-L" in (work / "echo.txt").read_text()


def test_eval_smc_limit(capsys, work):
    code, out, _ = run(capsys, "eval", "--config", str(work / "config.json"), "--limit", "10",
                       "--output", str(work / "smc"))
    assert code == 0 and out["n_rows"] == 10 and out["aggregates"]["satisfied"] == 100.0


def test_eval_too_many_failures_exits_5(capsys, work):
    rows = [{"concept_set": ["zebra", "unicorn", "moon"], "references": ["x"]}] * 3
    rows.append({"concept_set": ["dog", "run", "field"], "references": ["the dog runs in the field"]})
    (work / "dataset.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    code, out, err = run(capsys, "eval", "--config", str(work / "config.json"), "--output", str(work / "f"))
    assert code == 5 and out["failures"] == 3 and "3 of 4" in err
    assert json.loads((work / "f.json").read_text())["failures"] == 3


def test_eval_bad_dataset_exits_8(capsys, work):
    (work / "dataset.jsonl").write_text(json.dumps({"concept_set": ["a"], "references": ["x"]}) + "\n")
    code, _, err = run(capsys, "eval", "--config", str(work / "config.json"), "--strategy", "echo",
                       "--output", str(work / "d"))
    assert code == 8 and "line 1" in err


def test_check_posterior_weights(capsys, work):
    code, out, _ = run(capsys, "check", "--config", str(work / "config.json"), "--keywords", "dog,run,field",
                       "--text", "the dog runs in the field", "--text", "the cat sits in the park")
    assert code == 0
    by_text = {c["text"]: c for c in out["candidates"]}
    assert by_text["the dog runs in the field"]["satisfied"] is True
    assert by_text["the cat sits in the park"]["satisfied"] is False
    assert sum(c["posterior_weight"] for c in out["candidates"]) == pytest.approx(1.0)


def test_reason_emits_transitive_sub(capsys, work):
    code, out, _ = run(capsys, "reason", "--config", str(work / "config.json"),
                       "--question", "Which party does obama belong to?")
    assert code == 0 and out["consistent"] is True
    assert {"kind": "sub", "sub": "President", "sup": "Agent"} in out["closure"]
    assert out["rewritten_query"].startswith("Step-by-step facts:")


def test_reason_bad_ontology_exits_7(capsys, work):
    (work / "ontology.json").write_text(json.dumps({"axioms": [{"kind": "nope"}]}))
    code, _, _ = run(capsys, "reason", "--config", str(work / "config.json"))
    assert code == 7


def test_repair_satisfied_input_has_no_edits(capsys, work):
    code, out, _ = run(capsys, "repair", "--config", str(work / "config.json"), "--keywords", "dog,run,field",
                       "--text", "the", "dog", "runs", "in", "the", "field")
    assert code == 0 and out["edits"] == [] and out["satisfied"] is True


def test_repair_fixes_missing_keyword(capsys, work):
    code, out, _ = run(capsys, "repair", "--config", str(work / "config.json"), "--keywords", "dog,run,field",
                       "--text", "the", "dog", "runs", "in", "the", "park", "--question", "q?")
    assert code == 0 and out["satisfied"] is True and 1 <= len(out["edits"]) <= out["budget"]
    assert "reprompt" in out


def test_embed_verifies_fully(capsys, work):
    code, out, _ = run(capsys, "embed", "--config", str(work / "config.json"),
                       "--embedding-out", str(work / "emb.json"))
    assert code == 0 and out["verify"]["fraction"] == 1.0
    assert all(b <= a for a, b in zip(out["trace"], out["trace"][1:]))
    assert json.loads((work / "emb.json").read_text()) == out["embedding"]


def test_mock_data_command(capsys, tmp_path):
    code, out, _ = run(capsys, "mock-data", str(tmp_path / "m"), "--rows", "5", "--corpus-size", "50")
    assert code == 0 and len((tmp_path / "m" / "dataset.jsonl").read_text().splitlines()) == 5
    assert set(out) >= {"corpus", "lexicon", "dataset", "config"}
