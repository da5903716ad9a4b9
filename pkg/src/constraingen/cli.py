"""Command-line entry point: ``constraingen {gen,eval,check,repair,reason,embed,mock-data}``.

Configuration is a JSON file merged over built-in defaults; command-line
flags win over both. Relative paths in a config file resolve against the
file's directory. Results go to stdout as JSON, errors to stderr with a
distinct exit code per error family.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from . import mockdata
from .checker import score_posterior
from .constraints import (
    CnfConstraint,
    ConstraintParseError,
    InflectionLexicon,
    coverage,
    evaluate,
    from_keywords,
    is_satisfied,
    parse_constraint,
    words,
)
from .decode import DecodeConfig, DecodeError, InfeasibleConstraintError, beam, constrained_beam, greedy, smc
from .evaluation import DatasetError, DatasetRow, load_dataset, run_suite
from .geometry import TrainConfig, dump_embedding, train, verify
from .lm import BackendError, HttpLm, LmBackend, OutOfVocabulary, build_ngram, load_corpus
from .ontology import (
    Gazetteer,
    Ontology,
    OntologyError,
    axiom_to_json,
    closure,
    is_consistent,
    minimal_axioms,
    violation_probability,
)
from .prompt import PromptError, ShotExample, build_abs, build_cnf, load_shots, rewrite_query
from .repair import repair_lexical, reprompt_payload, word_ids

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_INFEASIBLE = 4
EXIT_EVAL_FAILURES = 5
EXIT_CONSTRAINT = 6
EXIT_ONTOLOGY = 7
EXIT_DATASET = 8

MAX_FAILURE_RATE = 0.10
STRATEGIES = ("greedy", "beam", "nl", "smc")
EVAL_STRATEGIES = STRATEGIES + ("echo",)

DEFAULTS: dict[str, Any] = {
    "backend": {"ngram": {"corpus": None, "order": 3, "lambda": 0.1}},
    "decode": {"strategy": "smc", "max_new_tokens": 16, "beam_size": 8, "alpha": 2.0,
               "n_particles": 8, "ess_threshold": 0.5, "seed": 0, "temperature": 1.0},
    "prompt": {"style": "abs", "shots": None, "n_shots": 0, "condition": "auto"},
    "checker": {"lambda": 1.0},
    "eval": {"rouge_beta": 1.0},
    "repair": {"budget": None},
    "embed": {"dim": 2, "margin": 0.05, "lr": 0.05, "epochs": 2000, "seed": 0},
    "paths": {"dataset": None, "lexicon": None, "ontology": None, "gazetteer": None,
              "output": "report"},
}
PATH_KEYS = {("backend", "ngram", "corpus"), ("prompt", "shots"), ("paths", "dataset"),
             ("paths", "lexicon"), ("paths", "ontology"), ("paths", "gazetteer"), ("paths", "output")}


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------------

def _merge(base: dict, override: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{where}.{key}" if where else key
        if where == "backend" and key in ("ngram", "http"):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {name!r} must be an object")
            out = {key: {**DEFAULTS["backend"]["ngram"], **val} if key == "ngram" else dict(val)}
            continue
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {name!r} must be an object")
            out[key] = _merge(base[key], val, name)
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    cfg = _merge(cfg, data, "")
    base = Path(path).resolve().parent
    for keys in PATH_KEYS:
        node = cfg
        for k in keys[:-1]:
            node = node.get(k) if isinstance(node, dict) else None
        if isinstance(node, dict) and isinstance(node.get(keys[-1]), str):
            p = Path(node[keys[-1]])
            if not p.is_absolute():
                node[keys[-1]] = str(base / p)
    return cfg


def _set(cfg: dict, dotted: str, value: Any) -> None:
    if value is None:
        return
    node = cfg
    *parents, last = dotted.split(".")
    for k in parents:
        node = node.setdefault(k, {})
    node[last] = value


def apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(cfg)
    g = getattr
    if g(args, "seed", None) is not None:
        _set(cfg, "decode.seed", args.seed)
        _set(cfg, "embed.seed", args.seed)
    if g(args, "backend_url", None):
        cfg["backend"] = {"http": {"url": args.backend_url, "timeout": g(args, "timeout", None) or 10.0}}
    if g(args, "corpus", None):
        cfg["backend"] = {"ngram": {**cfg["backend"].get("ngram", DEFAULTS["backend"]["ngram"]),
                                    "corpus": args.corpus}}
    for flag, key in (("strategy", "decode.strategy"), ("max_new_tokens", "decode.max_new_tokens"),
                      ("beam_size", "decode.beam_size"), ("alpha", "decode.alpha"),
                      ("particles", "decode.n_particles"), ("temperature", "decode.temperature"),
                      ("style", "prompt.style"), ("shots", "prompt.shots"), ("n_shots", "prompt.n_shots"),
                      ("lam", "checker.lambda"), ("budget", "repair.budget"),
                      ("dim", "embed.dim"), ("epochs", "embed.epochs"),
                      ("dataset", "paths.dataset"), ("lexicon", "paths.lexicon"),
                      ("ontology", "paths.ontology"), ("gazetteer", "paths.gazetteer"),
                      ("output", "paths.output")):
        _set(cfg, key, g(args, flag, None))
    return cfg


def _require_type(cfg: dict, dotted: str, types: tuple, allow_none: bool = False) -> Any:
    node: Any = cfg
    for k in dotted.split("."):
        node = node[k]
    if node is None and allow_none:
        return None
    if isinstance(node, bool) and bool not in types:
        raise ConfigError(f"config key {dotted!r} has the wrong type")
    if not isinstance(node, types):
        raise ConfigError(f"config key {dotted!r} has the wrong type")
    return node


def validate_config(cfg: dict) -> None:
    backend = cfg["backend"]
    if len(backend) != 1 or next(iter(backend)) not in ("ngram", "http"):
        raise ConfigError("config key 'backend' must hold exactly one of 'ngram' or 'http'")
    if "ngram" in backend:
        extra = set(backend["ngram"]) - {"corpus", "order", "lambda"}
        if extra:
            raise ConfigError(f"unknown config key 'backend.ngram.{sorted(extra)[0]}'")
        _require_type(cfg, "backend.ngram.order", (int,))
        _require_type(cfg, "backend.ngram.lambda", (int, float))
    else:
        extra = set(backend["http"]) - {"url", "timeout"}
        if extra:
            raise ConfigError(f"unknown config key 'backend.http.{sorted(extra)[0]}'")
        if not isinstance(backend["http"].get("url"), str):
            raise ConfigError("config key 'backend.http.url' must be a string")
    for key in ("max_new_tokens", "beam_size", "n_particles", "seed"):
        _require_type(cfg, f"decode.{key}", (int,))
    for key in ("alpha", "ess_threshold", "temperature"):
        _require_type(cfg, f"decode.{key}", (int, float))
    if cfg["decode"]["strategy"] not in EVAL_STRATEGIES:
        raise ConfigError(f"config key 'decode.strategy' must be one of {list(EVAL_STRATEGIES)}")
    if cfg["prompt"]["style"] not in ("abs", "cnf", "none"):
        raise ConfigError("config key 'prompt.style' must be 'abs', 'cnf' or 'none'")
    if cfg["prompt"]["n_shots"] not in (0, 1, 2):
        raise ConfigError("config key 'prompt.n_shots' must be 0, 1 or 2")
    if cfg["prompt"]["condition"] not in ("auto", True, False):
        raise ConfigError("config key 'prompt.condition' must be 'auto', true or false")
    _require_type(cfg, "checker.lambda", (int, float))
    if not isinstance(cfg["eval"]["rouge_beta"], (int, float)) or cfg["eval"]["rouge_beta"] <= 0:
        raise ConfigError("config key 'eval.rouge_beta' must be a positive number")
    _require_type(cfg, "repair.budget", (int,), allow_none=True)
    for key in ("dim", "epochs", "seed"):
        _require_type(cfg, f"embed.{key}", (int,))
    try:
        decode_config(cfg)
        train_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def decode_config(cfg: dict) -> DecodeConfig:
    d = cfg["decode"]
    return DecodeConfig(max_new_tokens=d["max_new_tokens"], beam_size=d["beam_size"], alpha=float(d["alpha"]),
                        n_particles=d["n_particles"], ess_threshold=float(d["ess_threshold"]),
                        seed=d["seed"], temperature=float(d["temperature"]))


def train_config(cfg: dict) -> TrainConfig:
    e = cfg["embed"]
    return TrainConfig(dim=e["dim"], margin=float(e["margin"]), lr=float(e["lr"]), epochs=e["epochs"],
                       seed=e["seed"])


def _existing(cfg: dict, dotted: str, required: bool = True) -> str | None:
    node: Any = cfg
    for k in dotted.split("."):
        node = node[k]
    if node is None:
        if required:
            raise ConfigError(f"config key {dotted!r} is required for this command")
        return None
    if not Path(node).exists():
        raise ConfigError(f"{dotted}: file not found: {node}")
    return node


# -- shared wiring -------------------------------------------------------------------------

@dataclass
class Context:
    cfg: dict
    lm: LmBackend | None = None
    lexicon: InflectionLexicon | None = None
    shots: list[ShotExample] | None = None


def make_backend(cfg: dict) -> LmBackend:
    if "http" in cfg["backend"]:
        h = cfg["backend"]["http"]
        return HttpLm(h["url"], timeout=float(h.get("timeout") or 10.0))
    n = cfg["backend"]["ngram"]
    corpus = _existing(cfg, "backend.ngram.corpus")
    return build_ngram(load_corpus(corpus), n["order"], float(n["lambda"]))


def _conditions(cfg: dict, lm: LmBackend) -> bool:
    cond = cfg["prompt"]["condition"]
    if cond == "auto":
        # The bundled n-gram model is unconditional, so prompts stay descriptive there.
        return not getattr(lm, "word_level", False)
    return bool(cond)


def build_prompt(cfg: dict, c: CnfConstraint, keywords: Sequence[str], shots: Sequence[ShotExample],
                 lexicon: InflectionLexicon) -> str:
    style = cfg["prompt"]["style"]
    chosen = list(shots)[:cfg["prompt"]["n_shots"]]
    if style == "abs":
        return build_abs(list(keywords), chosen)
    if style == "cnf":
        return build_cnf(c, chosen, lexicon)
    return ""


def decode_one(lm: LmBackend, prompt_ids: Sequence[int], c: CnfConstraint, strategy: str,
               dc: DecodeConfig) -> str:
    if strategy == "greedy":
        h = greedy(lm, prompt_ids, dc, c)
    elif strategy == "beam":
        h = beam(lm, prompt_ids, dc, c)[0]
    elif strategy == "nl":
        h = constrained_beam(lm, prompt_ids, c, dc)
    elif strategy == "smc":
        h, _ = smc(lm, prompt_ids, c, dc)
    else:
        raise ConfigError(f"unknown strategy {strategy!r}")
    return lm.detokenize([t for t in h.generated if t != lm.eos])


def make_generator(ctx: Context) -> Callable[[CnfConstraint, Sequence[str]], tuple[str, str]]:
    cfg, lm, lexicon = ctx.cfg, ctx.lm, ctx.lexicon
    dc = decode_config(cfg)
    condition = _conditions(cfg, lm)
    strategy = cfg["decode"]["strategy"]

    def generate(c: CnfConstraint, keywords: Sequence[str]) -> tuple[str, str]:
        prompt = build_prompt(cfg, c, keywords, ctx.shots or [], lexicon)
        prompt_ids = lm.tokenize(prompt) if condition and prompt else []
        return decode_one(lm, prompt_ids, c, strategy, dc), prompt

    return generate


def _constraint_from_args(args: argparse.Namespace, lexicon: InflectionLexicon) -> tuple[CnfConstraint, list[str]]:
    if getattr(args, "constraint", None):
        c = parse_constraint(args.constraint)
        kws = [c.clauses[i].forms[0] for i in c.positive_indices]
        return c, kws
    if getattr(args, "keywords", None):
        kws = [k.strip().lower() for k in args.keywords.split(",") if k.strip()]
        if not kws:
            raise ConfigError("--keywords is empty")
        return from_keywords(kws, lexicon), kws
    raise ConfigError("one of --keywords or --constraint is required")


def _load_context(cfg: dict, need_lm: bool = True, need_lexicon: bool = True, need_shots: bool = False) -> Context:
    ctx = Context(cfg)
    if need_lexicon:
        ctx.lexicon = InflectionLexicon.load(_existing(cfg, "paths.lexicon"))
    if need_shots and cfg["prompt"]["n_shots"] > 0:
        path = _existing(cfg, "prompt.shots")
        ctx.shots = load_shots(path, ctx.lexicon)
        if len(ctx.shots) < cfg["prompt"]["n_shots"]:
            raise ConfigError(f"prompt.n_shots is {cfg['prompt']['n_shots']} but {path} has "
                              f"{len(ctx.shots)} shots")
    if need_lm:
        ctx.lm = make_backend(cfg)
    return ctx


def _emit(obj: Any, out=None) -> None:
    out = out or sys.stdout
    json.dump(obj, out, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
    out.write("\n")


def _json_default(o: Any) -> Any:
    if isinstance(o, float):
        return None
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


# -- commands --------------------------------------------------------------------------------

def cmd_gen(cfg: dict, args: argparse.Namespace) -> int:
    if cfg["decode"]["strategy"] not in STRATEGIES:
        raise ConfigError(f"decode.strategy must be one of {list(STRATEGIES)} for gen")
    ctx = _load_context(cfg, need_shots=True)
    c, kws = _constraint_from_args(args, ctx.lexicon)
    generate = make_generator(ctx)
    t0 = time.perf_counter()
    text, prompt = generate(c, kws)
    seconds = time.perf_counter() - t0
    st = evaluate(words(text), c)
    _emit({"text": text, "constraint": c.to_text(), "prompt": prompt,
           "strategy": cfg["decode"]["strategy"], "coverage": coverage(st),
           "satisfied": is_satisfied(st), "seed": cfg["decode"]["seed"], "seconds": seconds})
    return EXIT_OK


def cmd_eval(cfg: dict, args: argparse.Namespace) -> int:
    dataset_path = _existing(cfg, "paths.dataset")
    strategy = cfg["decode"]["strategy"]
    ctx = _load_context(cfg, need_lm=strategy != "echo", need_shots=strategy != "echo")
    rows = load_dataset(dataset_path)
    if getattr(args, "limit", None):
        rows = rows[:args.limit]

    if strategy == "echo":
        def pipeline(row: DatasetRow) -> str:
            return row.references[0]
    else:
        generate = make_generator(ctx)

        def pipeline(row: DatasetRow) -> str:
            c = row.constraint(ctx.lexicon)
            return generate(c, row.concept_set)[0]

    workers = getattr(args, "workers", None) or 1
    report = run_suite(rows, pipeline, ctx.lexicon, workers=workers,
                       rouge_beta=float(cfg["eval"]["rouge_beta"]))
    report.meta = {"strategy": strategy, "n_rows": len(rows), "dataset": Path(dataset_path).name,
                   "decode": cfg["decode"], "prompt": {k: v for k, v in cfg["prompt"].items() if k != "shots"}}
    out = Path(cfg["paths"]["output"])
    out.parent.mkdir(parents=True, exist_ok=True)
    json_path = out.with_name(out.name + ".json")
    table_path = out.with_name(out.name + ".txt")
    with open(json_path, "w", encoding="utf-8") as fh:
        _emit(report.to_json(), fh)
    table_path.write_text(report.to_table(strategy), encoding="utf-8")
    summary = {"report": str(json_path), "table": str(table_path), "n_rows": len(rows),
               "failures": report.failures, "aggregates": report.aggregates}
    _emit(summary)
    if report.failures > MAX_FAILURE_RATE * len(rows):
        print(f"error: {report.failures} of {len(rows)} rows failed", file=sys.stderr)
        return EXIT_EVAL_FAILURES
    return EXIT_OK


def _read_texts(args: argparse.Namespace) -> list[str]:
    texts = list(getattr(args, "text", None) or [])
    if getattr(args, "candidates", None):
        path = Path(args.candidates)
        if not path.exists():
            raise ConfigError(f"candidates file not found: {path}")
        texts += [ln.rstrip("\n") for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not texts:
        raise ConfigError("no candidate text given (use --text or --candidates)")
    return texts


def _semantic(cfg: dict) -> tuple[Ontology, Gazetteer] | None:
    o_path = _existing(cfg, "paths.ontology", required=False)
    g_path = _existing(cfg, "paths.gazetteer", required=False)
    if o_path and g_path:
        return Ontology.load(o_path), Gazetteer.load(g_path)
    if o_path or g_path:
        raise ConfigError("semantic checking needs both paths.ontology and paths.gazetteer")
    return None


def cmd_check(cfg: dict, args: argparse.Namespace) -> int:
    texts = _read_texts(args)
    semantic = _semantic(cfg)
    c = None
    if getattr(args, "keywords", None) or getattr(args, "constraint", None):
        lexicon = InflectionLexicon.load(_existing(cfg, "paths.lexicon")) if getattr(args, "keywords", None) \
            else InflectionLexicon({})
        c, _ = _constraint_from_args(args, lexicon)
    if c is None and semantic is None:
        raise ConfigError("check needs a lexical constraint or an ontology with a gazetteer")
    lm = make_backend(cfg)
    cands = []
    for t in texts:
        seq = words(t)
        ids, _ = word_ids(lm, seq)
        lp = float(sum(lm.next_logprobs(ids[:i])[tok] for i, tok in enumerate(ids)))
        cands.append((tuple(seq), lp))
    scored = score_posterior(cands, c, semantic=semantic, lam=float(cfg["checker"]["lambda"]),
                             detokenize=" ".join)
    out = []
    for s in scored:
        item = s.to_json()
        item["lm_logprob"] = _finite(s.lm_logprob)
        if c is not None:
            st = evaluate(list(s.ids), c)
            item["clauses"] = [{"clause": i, "status": st.clause_status[i].value} for i in range(len(c.clauses))]
            item["satisfied"] = is_satisfied(st)
        if semantic is not None:
            p, viol = violation_probability(list(s.ids), *semantic)
            item["violations"] = [v.to_json() for v in viol]
        out.append(item)
    _emit({"lambda": cfg["checker"]["lambda"], "candidates": out})
    return EXIT_OK


def cmd_repair(cfg: dict, args: argparse.Namespace) -> int:
    if not getattr(args, "text", None):
        raise ConfigError("repair needs --text")
    lexicon = InflectionLexicon.load(_existing(cfg, "paths.lexicon")) if getattr(args, "keywords", None) \
        else InflectionLexicon({})
    c, _ = _constraint_from_args(args, lexicon)
    lm = make_backend(cfg)
    seq = words(" ".join(args.text))
    budget = cfg["repair"]["budget"]
    if budget is None:
        budget = default_budget(seq, c)
    res = repair_lexical(seq, c, lm, budget)
    out = res.to_json()
    out["original"] = " ".join(seq)
    out["budget"] = budget
    if getattr(args, "question", None):
        out["reprompt"] = reprompt_payload(args.question, " ".join(res.words), " ".join(seq))
    _emit(out)
    return EXIT_OK


def default_budget(seq: Sequence[str], c: CnfConstraint) -> int:
    """One edit per clause plus one per forbidden occurrence."""
    forbidden = c.forbidden_forms()
    return len(c.clauses) + sum(1 for w in seq if w in forbidden)


def cmd_reason(cfg: dict, args: argparse.Namespace) -> int:
    o = Ontology.load(_existing(cfg, "paths.ontology"))
    ok, viol = is_consistent(o)
    out: dict[str, Any] = {
        "consistent": ok,
        "conflicts": [v.to_json() for v in viol],
        "closure": [axiom_to_json(ax) for ax in closure(o).axioms],
    }
    try:
        out["minimal"] = [axiom_to_json(ax) for ax in minimal_axioms(o).axioms]
    except OntologyError as exc:
        out["minimal"] = None
        out["minimal_error"] = str(exc)
    g_path = _existing(cfg, "paths.gazetteer", required=False)
    if getattr(args, "text", None):
        if not g_path:
            raise ConfigError("reason --text needs paths.gazetteer")
        p, vs = violation_probability(words(" ".join(args.text)), o, Gazetteer.load(g_path))
        out["text_violation_probability"] = p
        out["text_violations"] = [v.to_json() for v in vs]
    if getattr(args, "question", None):
        if not g_path:
            raise ConfigError("reason --question needs paths.gazetteer")
        out["rewritten_query"] = rewrite_query(args.question, o, Gazetteer.load(g_path))
    _emit(out)
    return EXIT_OK


def cmd_embed(cfg: dict, args: argparse.Namespace) -> int:
    o = Ontology.load(_existing(cfg, "paths.ontology"))
    tc = train_config(cfg)
    e, trace = train(o, tc)
    report = verify(e, o)
    if getattr(args, "embedding_out", None):
        dump_embedding(e, args.embedding_out)
    _emit({"embedding": e.to_json(), "trace": trace, "final_loss": trace[-1], "epochs_run": len(trace) - 1,
           "verify": report.to_json()})
    return EXIT_OK


def cmd_mock_data(cfg: dict, args: argparse.Namespace) -> int:
    paths = mockdata.write_all(args.outdir, n_rows=args.rows, corpus_size=args.corpus_size,
                               seed=args.seed if args.seed is not None else 0)
    _emit(paths)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "eval": cmd_eval, "check": cmd_check, "repair": cmd_repair,
            "reason": cmd_reason, "embed": cmd_embed, "mock-data": cmd_mock_data}


# -- argument parsing -----------------------------------------------------------------------

def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", help="corpus for the n-gram backend")
    p.add_argument("--backend-url", help="use an HTTP backend at this URL")
    p.add_argument("--timeout", type=float, help="HTTP backend timeout in seconds")


def _add_decode_flags(p: argparse.ArgumentParser, strategies: Sequence[str]) -> None:
    p.add_argument("--strategy", choices=strategies)
    p.add_argument("--max-new-tokens", type=int)
    p.add_argument("--beam-size", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--particles", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--style", choices=("abs", "cnf", "none"))
    p.add_argument("--shots")
    p.add_argument("--n-shots", type=int)
    p.add_argument("--lexicon")


def _add_constraint_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--keywords", help="comma-separated keywords, expanded with the lexicon")
    p.add_argument("--constraint", help='CNF spec such as "(dog | dogs) & !(cat)"')


def build_parser() -> argparse.ArgumentParser:
    def global_flags(p: argparse.ArgumentParser, default: Any) -> None:
        p.add_argument("--config", default=default, help="JSON config file")
        p.add_argument("--seed", type=int, default=default)
        p.add_argument("--workers", type=int, default=default)
        p.add_argument("--print-config", action="store_true", default=default or False,
                       help="print the effective config and exit")

    # Global flags are accepted before or after the subcommand; the copy on the
    # subcommands suppresses defaults so it never clobbers an earlier value.
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="constraingen",
                                     description="Constraint-aware text generation toolkit.")
    global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate one sequence")
    _add_constraint_flags(p)
    _add_decode_flags(p, STRATEGIES)
    _add_backend_flags(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a dataset and write a report")
    _add_decode_flags(p, EVAL_STRATEGIES)
    _add_backend_flags(p)
    p.add_argument("--dataset")
    p.add_argument("--output", help="report path prefix (writes .json and .txt)")
    p.add_argument("--limit", type=int, help="only the first N rows")

    p = sub.add_parser("check", parents=[common], help="score candidates against constraints")
    _add_constraint_flags(p)
    _add_backend_flags(p)
    p.add_argument("--text", action="append", help="candidate text (repeatable)")
    p.add_argument("--candidates", help="file with one candidate per line")
    p.add_argument("--lexicon")
    p.add_argument("--ontology")
    p.add_argument("--gazetteer")
    p.add_argument("--lambda", dest="lam", type=float)

    p = sub.add_parser("repair", parents=[common], help="repair a sequence to meet a constraint")
    _add_constraint_flags(p)
    _add_backend_flags(p)
    p.add_argument("--text", nargs="+")
    p.add_argument("--lexicon")
    p.add_argument("--budget", type=int)
    p.add_argument("--question", help="also emit a re-prompt payload for this question")

    p = sub.add_parser("reason", parents=[common], help="closure, minimal axioms and violation checks")
    p.add_argument("--ontology")
    p.add_argument("--gazetteer")
    p.add_argument("--text", nargs="+", help="score this text for ontology violations")
    p.add_argument("--question", help="rewrite this question with ontology facts")

    p = sub.add_parser("embed", parents=[common], help="train a ball embedding of an ontology")
    p.add_argument("--ontology")
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--embedding-out", help="also write the embedding to this file")

    p = sub.add_parser("mock-data", parents=[common], help="write the bundled mock dataset")
    p.add_argument("outdir")
    p.add_argument("--rows", type=int, default=200)
    p.add_argument("--corpus-size", type=int, default=4000)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        validate_config(cfg)
        if args.print_config:
            _emit(cfg)
            return EXIT_OK
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    except PromptError as exc:
        return _fail(EXIT_CONFIG, f"prompt error: {exc}")
    except InfeasibleConstraintError as exc:
        return _fail(EXIT_INFEASIBLE, f"infeasible constraint: {exc}")
    except DecodeError as exc:
        return _fail(EXIT_INFEASIBLE, f"decoding failed: {exc}")
    except (BackendError, OutOfVocabulary) as exc:
        return _fail(EXIT_BACKEND, f"backend error: {exc}")
    except ConstraintParseError as exc:
        return _fail(EXIT_CONSTRAINT, f"constraint error: {exc}")
    except OntologyError as exc:
        return _fail(EXIT_ONTOLOGY, f"ontology error: {exc}")
    except DatasetError as exc:
        return _fail(EXIT_DATASET, f"dataset error: {exc}")
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        return _fail(EXIT_CONFIG, f"input error: {exc}")


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
