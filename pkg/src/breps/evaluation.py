"""TREC-style evaluation: qrels/run I/O, ranking metrics, significance.

Metric conventions follow trec_eval: exponential NDCG gain 2^grade - 1
with log2(rank + 1) discount and the ideal ranking over all judged
documents; AP divides by the total number of relevant documents; P@k
always divides by k.  Queries present in the qrels but absent from a
run score 0 and still count toward means; run-only queries are skipped
with a warning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MalformedLine

logger = logging.getLogger(__name__)

RUN_TAG = "breps"

Qrels = dict[str, dict[str, int]]
Run = dict[str, list[tuple[str, float]]]


@dataclass(frozen=True)
class MetricResult:
    """Per-query values over the qrels query universe plus their mean."""

    per_query: dict[str, float]
    mean: float
    skipped: tuple[str, ...] = ()


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    zero_variance: bool = False


# ----------------------------------------------------------------- parsing

def parse_qrels(lines: Iterable[str]) -> Qrels:
    """Parse ``query_id 0 doc_id grade`` lines; grades are nonnegative ints."""
    qrels: Qrels = {}
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 4:
            raise MalformedLine(f"expected 4 qrels fields, got {len(fields)}", number)
        qid, _, doc_id, grade_text = fields
        try:
            grade = int(grade_text)
        except ValueError:
            raise MalformedLine(f"grade {grade_text!r} is not an integer", number)
        if grade < 0:
            raise MalformedLine(f"grade must be nonnegative, got {grade}", number)
        qrels.setdefault(qid, {})[doc_id] = grade
    return qrels


def read_qrels(path: str | Path) -> Qrels:
    with open(path, encoding="utf-8") as f:
        return parse_qrels(f)


def parse_run(lines: Iterable[str]) -> Run:
    """Parse ``query_id Q0 doc_id rank score tag`` lines into ranked lists."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise MalformedLine(f"expected 6 run fields, got {len(fields)}", number)
        qid, _, doc_id, rank_text, score_text, _ = fields
        try:
            rank = int(rank_text)
            score = float(score_text)
        except ValueError:
            raise MalformedLine(f"bad rank/score in {line.strip()!r}", number)
        rows.setdefault(qid, []).append((rank, doc_id, score))
    run: Run = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        ranks = [rank for rank, _, _ in entries]
        if ranks != list(range(1, len(entries) + 1)):
            raise MalformedLine(f"query {qid}: ranks are not contiguous from 1")
        docs = [doc for _, doc, _ in entries]
        if len(set(docs)) != len(docs):
            raise MalformedLine(f"query {qid}: duplicate doc_id in run")
        scores = [score for _, _, score in entries]
        if any(earlier < later for earlier, later in zip(scores, scores[1:])):
            raise MalformedLine(f"query {qid}: scores increase with rank")
        run[qid] = [(doc, score) for _, doc, score in entries]
    return run


def read_run(path: str | Path) -> Run:
    with open(path, encoding="utf-8") as f:
        return parse_run(f)


def write_run(path: str | Path, run: Mapping[str, Sequence[tuple[str, float]]],
              tag: str = RUN_TAG) -> None:
    """Serialize a run with six-decimal scores, queries in sorted order."""
    lines = []
    for qid in sorted(run):
        previous = math.inf
        for rank, (doc_id, score) in enumerate(run[qid], start=1):
            if not math.isfinite(score):
                raise ValueError(f"query {qid}: non-finite score for {doc_id}")
            if score > previous:
                raise ValueError(f"query {qid}: scores must be non-increasing")
            previous = score
            lines.append(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ----------------------------------------------------------------- metrics

def _evaluate(run: Run, qrels: Qrels, value) -> MetricResult:
    skipped = tuple(sorted(set(run) - set(qrels)))
    if skipped:
        logger.warning("run contains unjudged queries, skipping: %s", ", ".join(skipped))
    per_query: dict[str, float] = {}
    for qid in sorted(qrels):
        ranked = [doc for doc, _ in run.get(qid, [])]
        per_query[qid] = value(ranked, qrels[qid])
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return MetricResult(per_query, mean, skipped)


def precision_at_k(run: Run, qrels: Qrels, k: int) -> MetricResult:
    """Fraction of the top k that is relevant; k is always the denominator."""
    if k < 1:
        raise ValueError("k must be positive")

    def value(ranked, judged):
        hits = sum(1 for doc in ranked[:k] if judged.get(doc, 0) > 0)
        return hits / k

    return _evaluate(run, qrels, value)


def average_precision(run: Run, qrels: Qrels) -> MetricResult:
    """Mean of precision at each relevant retrieved rank, over all relevant."""

    def value(ranked, judged):
        total_relevant = sum(1 for grade in judged.values() if grade > 0)
        if total_relevant == 0:
            return 0.0
        hits = 0
        total = 0.0
        for rank, doc in enumerate(ranked, start=1):
            if judged.get(doc, 0) > 0:
                hits += 1
                total += hits / rank
        return total / total_relevant

    return _evaluate(run, qrels, value)


def ndcg_at_k(run: Run, qrels: Qrels, k: int | None = None) -> MetricResult:
    """Exponential-gain NDCG; ``k=None`` evaluates the whole ranked list."""
    if k is not None and k < 1:
        raise ValueError("k must be positive")

    def value(ranked, judged):
        cut = ranked if k is None else ranked[:k]
        dcg = 0.0
        for rank, doc in enumerate(cut, start=1):
            gain = (1 << judged.get(doc, 0)) - 1
            dcg += gain / math.log2(rank + 1)
        ideal = sorted(judged.values(), reverse=True)
        if k is not None:
            ideal = ideal[:k]
        idcg = 0.0
        for rank, grade in enumerate(ideal, start=1):
            idcg += ((1 << grade) - 1) / math.log2(rank + 1)
        return dcg / idcg if idcg > 0 else 0.0

    return _evaluate(run, qrels, value)


# ------------------------------------------------------------ significance

def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # Lentz's algorithm for the incomplete-beta continued fraction.
    max_iterations = 300
    eps = 3e-16
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def _regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _student_t_two_sided(t: float, dof: int) -> float:
    x = dof / (dof + t * t)
    return _regularized_incomplete_beta(dof / 2.0, 0.5, x)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on per-query metric values.

    Zero-variance differences use the convention p=1 when the mean
    difference is 0 and p=0 otherwise, with ``zero_variance`` set.
    """
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two pairs")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    mean = sum(diffs) / n
    variance = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if variance == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, zero_variance=True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, zero_variance=True)
    t = mean / math.sqrt(variance / n)
    return TTestResult(t, _student_t_two_sided(t, n - 1), zero_variance=False)
