"""Evaluation tests: TREC parsing, metric oracles, and the paired t-test."""

import logging
import math

import numpy as np
import pytest
from scipy import stats

from breps.errors import MalformedLine
from breps.evaluation import (
    MetricResult,
    average_precision,
    ndcg_at_k,
    paired_t_test,
    parse_qrels,
    parse_run,
    precision_at_k,
    read_qrels,
    read_run,
    write_run,
)


# Definitional single-query oracles, kept separate from the module code.

def oracle_precision_at_k(ranked, judged, k):
    hits = sum(1 for d in ranked[:k] if judged.get(d, 0) > 0)
    return hits / k


def oracle_average_precision(ranked, judged):
    total_relevant = sum(1 for g in judged.values() if g > 0)
    if total_relevant == 0:
        return 0.0
    hits, total = 0, 0.0
    for rank, doc in enumerate(ranked, start=1):
        if judged.get(doc, 0) > 0:
            hits += 1
            total += hits / rank
    return total / total_relevant


def oracle_ndcg(ranked, judged, k=None):
    cut = ranked if k is None else ranked[:k]
    dcg = sum(
        (2 ** judged.get(doc, 0) - 1) / math.log2(rank + 1)
        for rank, doc in enumerate(cut, start=1)
    )
    ideal = sorted(judged.values(), reverse=True)
    if k is not None:
        ideal = ideal[:k]
    idcg = sum((2**g - 1) / math.log2(rank + 1) for rank, g in enumerate(ideal, start=1))
    return 0.0 if idcg == 0 else dcg / idcg


def single_query_run(ranked):
    return {"q1": [(doc, float(len(ranked) - i)) for i, doc in enumerate(ranked)]}


class TestParsing:
    def test_qrels_lines(self):
        qrels = parse_qrels(["q1 0 d1 2", "q1 0 d2 0", "q2 0 d1 1"])
        assert qrels == {"q1": {"d1": 2, "d2": 0}, "q2": {"d1": 1}}

    def test_qrels_rejects_bad_grade(self):
        with pytest.raises(MalformedLine):
            parse_qrels(["q1 0 d1 high"])
        with pytest.raises(MalformedLine):
            parse_qrels(["q1 0 d1 -1"])

    def test_qrels_rejects_short_line(self):
        with pytest.raises(MalformedLine) as err:
            parse_qrels(["q1 0 d1 1", "q1 d2"])
        assert "line 2" in str(err.value)

    def test_run_lines(self):
        run = parse_run(
            ["q1 Q0 d2 1 9.500000 breps", "q1 Q0 d1 2 3.250000 breps"]
        )
        assert run == {"q1": [("d2", 9.5), ("d1", 3.25)]}

    def test_run_rejects_noncontiguous_ranks(self):
        with pytest.raises(MalformedLine):
            parse_run(["q1 Q0 d1 1 2.0 t", "q1 Q0 d2 3 1.0 t"])

    def test_run_rejects_duplicate_docs(self):
        with pytest.raises(MalformedLine):
            parse_run(["q1 Q0 d1 1 2.0 t", "q1 Q0 d1 2 1.0 t"])

    def test_run_rejects_score_rank_disagreement(self):
        with pytest.raises(MalformedLine):
            parse_run(["q1 Q0 d1 1 1.0 t", "q1 Q0 d2 2 5.0 t"])

    def test_run_round_trip(self, tmp_path):
        run = {
            "q2": [("dB", 4.0), ("dA", 2.125)],
            "q1": [("dC", 1.5)],
        }
        path = tmp_path / "out.run"
        write_run(path, run)
        text = path.read_text()
        lines = text.strip().split("\n")
        assert lines[0] == "q1 Q0 dC 1 1.500000 breps"
        assert lines[1] == "q2 Q0 dB 1 4.000000 breps"
        assert lines[2] == "q2 Q0 dA 2 2.125000 breps"
        assert read_run(path) == run

    def test_write_run_rejects_increasing_scores(self, tmp_path):
        with pytest.raises(ValueError):
            write_run(tmp_path / "bad.run", {"q1": [("a", 1.0), ("b", 2.0)]})

    def test_read_qrels_file(self, tmp_path):
        path = tmp_path / "j.qrels"
        path.write_text("q1 0 d1 1\n\nq1 0 d2 2\n")
        assert read_qrels(path) == {"q1": {"d1": 1, "d2": 2}}


class TestHandValues:
    def test_ndcg_hand_example(self):
        # Rank order grades [2, 0, 1]; judged multiset {2, 1, 0}.
        qrels = {"q1": {"d1": 2, "d2": 0, "d3": 1}}
        run = single_query_run(["d1", "d2", "d3"])
        got = ndcg_at_k(run, qrels, k=None)
        assert got.per_query["q1"] == pytest.approx(0.9639404333166532, abs=1e-12)

    def test_average_precision_hand_example(self):
        qrels = {"q1": {"d1": 1, "d3": 2}}
        run = single_query_run(["d1", "d2", "d3"])
        got = average_precision(run, qrels)
        assert got.per_query["q1"] == pytest.approx(5 / 6, abs=1e-12)

    def test_precision_at_k_uses_k_denominator(self):
        qrels = {"q1": {"d1": 1, "d2": 1}}
        run = single_query_run(["d1", "d2", "d3"])
        got = precision_at_k(run, qrels, k=5)
        assert got.per_query["q1"] == pytest.approx(2 / 5, abs=1e-12)

    def test_ideal_permutation_scores_one(self):
        qrels = {"q1": {"a": 3, "b": 2, "c": 1, "d": 0}}
        run = single_query_run(["a", "b", "c", "d"])
        assert ndcg_at_k(run, qrels, k=None).per_query["q1"] == pytest.approx(1.0)

    def test_all_zero_grades_gives_zero_ndcg(self):
        qrels = {"q1": {"a": 0, "b": 0}}
        run = single_query_run(["a", "b"])
        assert ndcg_at_k(run, qrels, k=None).per_query["q1"] == 0.0

    def test_no_relevant_docs_gives_zero_ap(self):
        qrels = {"q1": {"a": 0}}
        run = single_query_run(["a", "b"])
        assert average_precision(run, qrels).per_query["q1"] == 0.0


class TestQueryUniverse:
    def test_missing_query_scores_zero_and_counts(self):
        qrels = {"q1": {"d1": 1}, "q2": {"d9": 1}}
        run = single_query_run(["d1"])
        got = precision_at_k(run, qrels, k=1)
        assert got.per_query == {"q1": 1.0, "q2": 0.0}
        assert got.mean == pytest.approx(0.5)

    def test_unknown_run_query_skipped_with_warning(self, caplog):
        qrels = {"q1": {"d1": 1}}
        run = {"q1": [("d1", 2.0)], "q9": [("d1", 1.0)]}
        with caplog.at_level(logging.WARNING):
            got = average_precision(run, qrels)
        assert got.skipped == ("q9",)
        assert "q9" in caplog.text
        assert set(got.per_query) == {"q1"}

    def test_empty_run_gives_zero_rows_for_all_queries(self):
        qrels = {"q1": {"d1": 1}, "q2": {"d2": 2}}
        got = ndcg_at_k({}, qrels, k=10)
        assert got.per_query == {"q1": 0.0, "q2": 0.0}
        assert got.mean == 0.0

    def test_unjudged_docs_count_as_grade_zero(self):
        qrels = {"q1": {"d2": 1}}
        run = single_query_run(["stranger", "d2"])
        got = precision_at_k(run, qrels, k=2)
        assert got.per_query["q1"] == pytest.approx(0.5)


class TestOracleEquivalence:
    def random_instance(self, rng):
        docs = [f"d{i}" for i in range(8)]
        ranked = list(rng.permutation(docs))
        judged_docs = rng.choice(docs + [f"x{i}" for i in range(3)], size=6, replace=False)
        judged = {d: int(rng.integers(0, 4)) for d in judged_docs}
        return ranked, judged

    def test_metrics_match_oracles(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            ranked, judged = self.random_instance(rng)
            qrels = {"q1": judged}
            run = single_query_run(ranked)
            for k in (1, 3, 5, 10):
                got = precision_at_k(run, qrels, k=k).per_query["q1"]
                assert got == pytest.approx(oracle_precision_at_k(ranked, judged, k), abs=1e-9)
                got = ndcg_at_k(run, qrels, k=k).per_query["q1"]
                assert got == pytest.approx(oracle_ndcg(ranked, judged, k), abs=1e-9)
            got = ndcg_at_k(run, qrels, k=None).per_query["q1"]
            assert got == pytest.approx(oracle_ndcg(ranked, judged, None), abs=1e-9)
            got = average_precision(run, qrels).per_query["q1"]
            assert got == pytest.approx(oracle_average_precision(ranked, judged), abs=1e-9)

    def test_ndcg_bounded(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            ranked, judged = self.random_instance(rng)
            got = ndcg_at_k(single_query_run(ranked), {"q1": judged}, k=10)
            assert 0.0 <= got.per_query["q1"] <= 1.0 + 1e-12


class TestPairedTTest:
    def test_frozen_example(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        b = [0.0, 0.0, 0.0, 0.0, 0.0]
        got = paired_t_test(a, b)
        assert got.t_statistic == pytest.approx(4.242640687119285, abs=1e-9)
        assert got.p_value == pytest.approx(0.013235599563682695, abs=1e-9)
        assert not got.zero_variance

    def test_matches_scipy(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(2, 30))
            a = rng.normal(0.5, 1.0, size=n)
            b = rng.normal(0.0, 1.0, size=n)
            got = paired_t_test(list(a), list(b))
            want_t, want_p = stats.ttest_rel(a, b)
            assert got.t_statistic == pytest.approx(float(want_t), abs=1e-9)
            assert got.p_value == pytest.approx(float(want_p), abs=1e-9)

    def test_zero_variance_identical(self):
        got = paired_t_test([1.0, 2.0], [1.0, 2.0])
        assert got.zero_variance
        assert got.t_statistic == 0.0
        assert got.p_value == 1.0

    def test_zero_variance_constant_shift(self):
        got = paired_t_test([2.0, 3.0], [1.0, 2.0])
        assert got.zero_variance
        assert got.p_value == 0.0
        assert got.t_statistic == math.inf

    def test_symmetry(self):
        a = [1.0, 3.0, 2.0, 5.0]
        b = [2.0, 1.0, 4.0, 4.5]
        ab = paired_t_test(a, b)
        ba = paired_t_test(b, a)
        assert ab.t_statistic == pytest.approx(-ba.t_statistic, abs=1e-12)
        assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [2.0])
        with pytest.raises(ValueError):
            paired_t_test([1.0, 2.0], [1.0])
