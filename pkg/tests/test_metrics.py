from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import confusion_tally

from sfcrime.ingest import ClassFrequencyTable
from sfcrime.metrics import (
    EvaluationReport,
    accuracy,
    confusion_matrix,
    evaluate,
    log_loss,
    majority_baseline,
    read_report_record,
    write_report_record,
)

FULL_EXPORT_ROWS = 878_049
TOP_CLASS_COUNT = 174_900


class TestAccuracy:
    def test_examples(self):
        assert accuracy(np.array([1, 2]), np.array([1, 2])) == 1.0
        assert accuracy(np.array([1, 2]), np.array([2, 1])) == 0.0
        assert accuracy(np.array([0, 1, 2, 3]), np.array([0, 1, 0, 0])) == 0.5

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy(np.array([1]), np.array([1, 2]))
        with pytest.raises(ValueError):
            accuracy(np.array([]), np.array([]))


class TestLogLoss:
    def test_uniform_39_is_ln_39(self):
        probs = np.full((5, 39), 1.0 / 39.0)
        y = np.arange(5)
        assert log_loss(y, probs) == pytest.approx(math.log(39), abs=1e-12)

    def test_perfect_prediction_clips_to_near_zero(self):
        probs = np.eye(3)[np.array([0, 1, 2])]
        assert log_loss(np.array([0, 1, 2]), probs) == pytest.approx(0.0, abs=1e-12)

    def test_confident_wrong_prediction_costs_about_34_5(self):
        probs = np.array([[1.0, 0.0]])
        loss = log_loss(np.array([1]), probs)
        assert loss == pytest.approx(-math.log(1e-15), rel=1e-9)  # ~34.54

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            log_loss(np.array([2]), np.array([[0.5, 0.5]]))

    def test_row_not_normalized(self):
        with pytest.raises(ValueError, match="sums to"):
            log_loss(np.array([0]), np.array([[0.7, 0.6]]))

    def test_small_float_error_renormalized(self):
        probs = np.array([[0.5 + 2e-8, 0.5]])
        assert log_loss(np.array([0]), probs) == pytest.approx(math.log(2), abs=1e-6)

    def test_moving_mass_to_true_class_lowers_loss(self):
        y = np.array([0, 0, 0])
        worse = np.full((3, 4), 0.25)
        better = np.column_stack([np.full(3, 0.55), np.full(3, 0.15),
                                  np.full(3, 0.15), np.full(3, 0.15)])
        assert log_loss(y, better) < log_loss(y, worse)

    def test_non_negative(self):
        rng = np.random.default_rng(0)
        probs = rng.dirichlet(np.ones(6), size=50)
        y = rng.integers(0, 6, size=50)
        assert log_loss(y, probs) >= 0.0


class TestConfusionMatrix:
    def test_perfect_predictions_diagonal(self):
        y = np.array([0, 0, 1, 2, 2, 2])
        cm = confusion_matrix(y, y, 3)
        assert np.array_equal(cm, np.diag([2, 1, 3]))

    def test_constant_predictor_single_column(self):
        y = np.array([0, 1, 2, 1])
        cm = confusion_matrix(y, np.ones(4, dtype=int), 3)
        assert np.all(cm[:, [0, 2]] == 0)
        assert cm[:, 1].tolist() == [1, 2, 1]

    def test_matches_tally_oracle(self):
        rng = np.random.default_rng(1)
        y_true = rng.integers(0, 5, size=200)
        y_pred = rng.integers(0, 5, size=200)
        assert np.array_equal(confusion_matrix(y_true, y_pred, 5),
                              confusion_tally(y_true, y_pred, 5))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            confusion_matrix(np.array([0]), np.array([3]), 3)

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                    min_size=1, max_size=60))
    @settings(max_examples=100)
    def test_accuracy_equals_trace_over_n(self, pairs):
        y_true = np.array([a for a, _ in pairs])
        y_pred = np.array([b for _, b in pairs])
        cm = confusion_matrix(y_true, y_pred, 4)
        assert cm.sum() == len(pairs)
        assert accuracy(y_true, y_pred) == pytest.approx(np.trace(cm) / len(pairs))


class TestMajorityBaseline:
    def test_full_export_share(self, datagen):
        counts = tuple(c for _, c in datagen.CATEGORY_COUNTS)
        freq = ClassFrequencyTable(counts=counts, total=FULL_EXPORT_ROWS)
        acc, loss = majority_baseline(freq)
        assert acc == pytest.approx(TOP_CLASS_COUNT / FULL_EXPORT_ROWS, abs=1e-12)
        assert acc == pytest.approx(0.19919, abs=1e-5)
        assert 0.0 < loss < math.log(39)  # entropy of a skewed 39-class prior

    def test_single_class(self):
        acc, loss = majority_baseline(ClassFrequencyTable(counts=(9,), total=9))
        assert acc == 1.0
        assert loss == 0.0

    def test_two_equal_classes(self):
        acc, loss = majority_baseline(ClassFrequencyTable(counts=(5, 5), total=10))
        assert acc == 0.5
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_empty_table(self):
        with pytest.raises(ValueError):
            majority_baseline(ClassFrequencyTable(counts=(), total=0))


class TestPermutationInvariance:
    def test_metrics_invariant_under_class_relabeling(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 4, size=80)
        probs = rng.dirichlet(np.ones(4), size=80)
        perm = np.array([3, 1, 0, 2])
        y_perm = perm[y]
        probs_perm = np.empty_like(probs)
        probs_perm[:, perm] = probs  # column c moves to perm[c]
        assert log_loss(y, probs) == pytest.approx(log_loss(y_perm, probs_perm), rel=1e-12)
        pred = np.argmax(probs, axis=1)
        assert accuracy(y, pred) == accuracy(y_perm, perm[pred])
        cm = confusion_matrix(y, pred, 4)
        cm_perm = confusion_matrix(y_perm, perm[pred], 4)
        assert np.array_equal(cm_perm[np.ix_(perm, perm)], cm)


class TestEvaluate:
    def test_report_consistency(self):
        rng = np.random.default_rng(3)
        probs = rng.dirichlet(np.ones(3), size=50)
        y = rng.integers(0, 3, size=50)
        report = evaluate(y, probs, 3)
        assert report.n_test == 50
        assert report.confusion.sum() == 50
        assert report.accuracy == pytest.approx(np.trace(report.confusion) / 50)
        for cls in range(3):
            row = report.confusion[cls]
            expected = row[cls] / row.sum() if row.sum() else 0.0
            assert report.per_class_recall[cls] == pytest.approx(expected)

    def test_record_round_trip(self, tmp_path):
        report = EvaluationReport(
            accuracy=0.5, log_loss=1.25,
            confusion=np.array([[1, 1], [1, 1]]),
            n_test=4, per_class_recall=np.array([0.5, 0.5]))
        path = tmp_path / "report.json"
        write_report_record(path, "cell", {"alpha": 1}, report, seed=7)
        record = read_report_record(path)
        assert record["name"] == "cell"
        assert record["seed"] == 7
        assert record["report"].accuracy == 0.5
        assert np.array_equal(record["report"].confusion, report.confusion)

    def test_record_bytes_deterministic(self, tmp_path):
        report = EvaluationReport(
            accuracy=1 / 3, log_loss=2.5,
            confusion=np.array([[1, 0], [2, 0]]),
            n_test=3, per_class_recall=np.array([1.0, 0.0]))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_report_record(a, "x", {"p": [1, 2]}, report, seed=0)
        write_report_record(b, "x", {"p": [1, 2]}, report, seed=0)
        assert a.read_bytes() == b.read_bytes()
