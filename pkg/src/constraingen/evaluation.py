"""Generation metrics, CommonGen-style datasets and tabular reports."""
from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .constraints import InflectionLexicon, coverage, evaluate, from_keywords, is_satisfied, words

__all__ = ["DatasetError", "DatasetRow", "RowResult", "EvalReport", "lcs_length", "rouge_l", "bleu_4",
           "load_dataset", "run_suite", "MIN_KEYWORDS", "MAX_KEYWORDS"]

MIN_KEYWORDS = 3
MAX_KEYWORDS = 5


class DatasetError(ValueError):
    def __init__(self, message: str, lines: Sequence[int] = ()):
        super().__init__(message)
        self.lines = list(lines)


def _toks(x: str | Sequence[str]) -> list[str]:
    return words(x) if isinstance(x, str) else list(x)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str | Sequence[str], references: Sequence[str | Sequence[str]], beta: float = 1.0) -> float:
    """Sentence-level ROUGE-L F-measure on a 0-100 scale, best over references."""
    cand = _toks(candidate)
    if not cand:
        return 0.0
    best = 0.0
    for ref in references:
        r = _toks(ref)
        lcs = lcs_length(cand, r)
        if lcs == 0 or not r:
            continue
        p = lcs / len(cand)
        rec = lcs / len(r)
        f = (1 + beta ** 2) * p * rec / (rec + beta ** 2 * p)
        best = max(best, f)
    return 100.0 * best


def _ngrams(toks: Sequence[str], n: int) -> Counter:
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu_4(candidate: str | Sequence[str], references: Sequence[str | Sequence[str]]) -> float:
    """Sentence BLEU on a 0-100 scale.

    Uses clipped n-gram precisions for orders 1..min(4, len(candidate))
    (short candidates drop the orders they cannot have rather than being
    smoothed), their geometric mean, and the brevity penalty against the
    reference length closest to the candidate (shorter wins ties).
    """
    cand = _toks(candidate)
    refs = [_toks(r) for r in references]
    if not cand or not refs:
        return 0.0
    c = len(cand)
    r = min((len(x) for x in refs), key=lambda L: (abs(L - c), L))
    logs = []
    for n in range(1, min(4, c) + 1):
        counts = _ngrams(cand, n)
        max_ref: Counter = Counter()
        for ref in refs:
            for g, k in _ngrams(ref, n).items():
                max_ref[g] = max(max_ref[g], k)
        clipped = sum(min(k, max_ref[g]) for g, k in counts.items())
        if clipped == 0:
            return 0.0
        logs.append(math.log(clipped / sum(counts.values())))
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return 100.0 * bp * math.exp(sum(logs) / len(logs))


@dataclass(frozen=True)
class DatasetRow:
    concept_set: tuple[str, ...]
    references: tuple[str, ...]
    inflections: Mapping[str, tuple[str, ...]] | None = None

    def __post_init__(self) -> None:
        if not MIN_KEYWORDS <= len(self.concept_set) <= MAX_KEYWORDS:
            raise DatasetError(f"concept_set needs {MIN_KEYWORDS}-{MAX_KEYWORDS} keywords, "
                               f"got {len(self.concept_set)}")
        if not self.references:
            raise DatasetError("references must be non-empty")

    def constraint(self, lexicon: InflectionLexicon):
        return from_keywords(list(self.concept_set), lexicon.merged(self.inflections))

    def to_json(self) -> dict:
        d = {"concept_set": list(self.concept_set), "references": list(self.references)}
        if self.inflections:
            d["inflections"] = {k: list(v) for k, v in self.inflections.items()}
        return d


def load_dataset(path: str | Path) -> list[DatasetRow]:
    """Read JSONL rows; every bad line is reported at once."""
    rows, errors, bad_lines = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if not isinstance(d, dict):
                    raise DatasetError("row must be a JSON object")
                cs = d.get("concept_set")
                refs = d.get("references")
                if not isinstance(cs, list) or not all(isinstance(x, str) for x in cs):
                    raise DatasetError("concept_set must be a list of strings")
                if not isinstance(refs, list) or not all(isinstance(x, str) for x in refs):
                    raise DatasetError("references must be a list of strings")
                infl = d.get("inflections")
                if infl is not None:
                    infl = {k.lower(): tuple(v) for k, v in infl.items()}
                rows.append(DatasetRow(tuple(x.lower() for x in cs), tuple(refs), infl))
            except (json.JSONDecodeError, DatasetError, AttributeError, TypeError) as exc:
                errors.append(f"line {lineno}: {exc}")
                bad_lines.append(lineno)
    if errors:
        raise DatasetError(f"{path}: " + "; ".join(errors), bad_lines)
    if not rows:
        raise DatasetError("empty dataset")
    return rows


@dataclass
class RowResult:
    index: int
    text: str | None
    rouge_l: float | None
    bleu_4: float | None
    coverage: float | None
    satisfied: float | None
    seconds: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_json(self) -> dict:
        return {"index": self.index, "text": self.text, "rouge_l": self.rouge_l, "bleu_4": self.bleu_4,
                "coverage": self.coverage, "satisfied": self.satisfied, "seconds": self.seconds,
                "error": self.error}


METRICS = ("rouge_l", "bleu_4", "coverage", "satisfied", "seconds")


@dataclass
class EvalReport:
    rows: list[RowResult]
    meta: dict = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.rows)

    @property
    def aggregates(self) -> dict[str, float | None]:
        ok = [r for r in self.rows if not r.failed]
        out: dict[str, float | None] = {}
        for m in METRICS:
            out[m] = sum(getattr(r, m) for r in ok) / len(ok) if ok else None
        out["cider"] = None
        out["spice"] = None
        return out

    def to_json(self) -> dict:
        return {"meta": self.meta, "n_rows": len(self.rows), "failures": self.failures,
                "aggregates": self.aggregates, "rows": [r.to_json() for r in self.rows]}

    def to_table(self, label: str = "run") -> str:
        agg = self.aggregates
        cols = [("ROUGE-L", "rouge_l"), ("BLEU-4", "bleu_4"), ("Coverage", "coverage"),
                ("Satisfied", "satisfied"), ("Time(s)", "seconds")]
        width = max(len(label), len("Method"))
        head = "Method".ljust(width) + "".join(f"{name:>11}" for name, _ in cols)
        vals = "".join(f"{agg[key]:>11.2f}" if agg[key] is not None else f"{'-':>11}" for _, key in cols)
        return head + "\n" + label.ljust(width) + vals + "\n"


Pipeline = Callable[[DatasetRow], str]


def run_suite(dataset: Sequence[DatasetRow], pipeline: Pipeline, lexicon: InflectionLexicon,
              workers: int = 1, rouge_beta: float = 1.0) -> EvalReport:
    """Score ``pipeline`` on every row; a row whose pipeline raises is marked failed."""
    if not dataset:
        raise DatasetError("empty dataset")

    def one(i: int) -> RowResult:
        row = dataset[i]
        t0 = time.perf_counter()
        try:
            text = pipeline(row)
        except Exception as exc:  # noqa: BLE001 - any pipeline failure marks the row
            return RowResult(i, None, None, None, None, None, time.perf_counter() - t0,
                             f"{type(exc).__name__}: {exc}")
        seconds = time.perf_counter() - t0
        st = evaluate(words(text), row.constraint(lexicon))
        return RowResult(i, text, rouge_l(text, row.references, rouge_beta), bleu_4(text, row.references),
                         100.0 * coverage(st), 100.0 if is_satisfied(st) else 0.0, seconds)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(dataset))))
    else:
        results = [one(i) for i in range(len(dataset))]
    return EvalReport(results)
