from __future__ import annotations

import math
import random

import pytest

from dualquality.errors import ArgumentError
from dualquality.evaluation import (ConfusionMatrix, aggregate_runs, evaluate, sum_confusions)
from dualquality.labels import LABEL_ORDER, Label


def oracle_evaluate(gold, pred):
    """Independent brute-force counting oracle (no shared code with evaluate)."""
    classes = list(LABEL_ORDER)
    counts = {g: {p: 0 for p in classes} for g in classes}
    for g, p in zip(gold, pred):
        counts[g][p] += 1
    per_class = {}
    for c in classes:
        tp = counts[c][c]
        fp = sum(counts[g][c] for g in classes if g is not c)
        fn = sum(counts[c][p] for p in classes if p is not c)
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        per_class[c] = (precision, recall, f1)
    accuracy = sum(counts[c][c] for c in classes) / len(gold)
    macro = tuple(sum(per_class[c][i] for c in classes) / len(classes) for i in range(3))
    return counts, per_class, accuracy, macro


class TestEvaluate:
    def test_perfect_predictions(self):
        gold = [Label.DUAL_QUALITY, Label.OTHER_PROBLEMS, Label.STANDARD] * 3
        report = evaluate(gold, list(gold))
        assert report.accuracy == 1.0
        for metrics in report.per_class.values():
            assert metrics.f1 == 1.0

    def test_hand_counted_case(self):
        gold = [Label.DUAL_QUALITY, Label.DUAL_QUALITY, Label.STANDARD]
        pred = [Label.DUAL_QUALITY, Label.STANDARD, Label.DUAL_QUALITY]
        report = evaluate(gold, pred)
        dq = report.per_class[Label.DUAL_QUALITY]
        assert dq.precision == 0.5
        assert dq.recall == 0.5
        assert dq.f1 == 0.5
        assert abs(report.accuracy - 1 / 3) <= 1e-15

    def test_matches_oracle_on_200_random_sets(self):
        rng = random.Random(2024)
        for _ in range(200):
            n = rng.randint(1, 50)
            gold = [rng.choice(LABEL_ORDER) for _ in range(n)]
            pred = [rng.choice(LABEL_ORDER) for _ in range(n)]
            report = evaluate(gold, pred)
            counts, per_class, accuracy, macro = oracle_evaluate(gold, pred)
            for i, g in enumerate(LABEL_ORDER):
                for j, p in enumerate(LABEL_ORDER):
                    assert report.cm.counts[i][j] == counts[g][p]
            for c in LABEL_ORDER:
                precision, recall, f1 = per_class[c]
                assert abs(report.per_class[c].precision - precision) <= 1e-12
                assert abs(report.per_class[c].recall - recall) <= 1e-12
                assert abs(report.per_class[c].f1 - f1) <= 1e-12
            assert abs(report.accuracy - accuracy) <= 1e-12
            assert abs(report.macro_precision - macro[0]) <= 1e-12
            assert abs(report.macro_recall - macro[1]) <= 1e-12
            assert abs(report.macro_f1 - macro[2]) <= 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            evaluate([Label.STANDARD], [])

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            evaluate([], [])

    def test_zero_support_class_warns_and_scores_zero(self):
        gold = [Label.STANDARD, Label.STANDARD]
        pred = [Label.STANDARD, Label.STANDARD]
        report = evaluate(gold, pred)
        assert report.per_class[Label.DUAL_QUALITY].f1 == 0.0
        assert any("dual quality" in w for w in report.warnings)
        # macro still averages over all three classes
        assert abs(report.macro_f1 - 1 / 3) <= 1e-12

    def test_permutation_invariance(self):
        rng = random.Random(9)
        gold = [rng.choice(LABEL_ORDER) for _ in range(40)]
        pred = [rng.choice(LABEL_ORDER) for _ in range(40)]
        base = evaluate(gold, pred)
        order = list(range(40))
        rng.shuffle(order)
        shuffled = evaluate([gold[i] for i in order], [pred[i] for i in order])
        assert shuffled == base

    def test_all_metrics_within_bounds(self):
        rng = random.Random(10)
        for _ in range(50):
            n = rng.randint(1, 30)
            gold = [rng.choice(LABEL_ORDER) for _ in range(n)]
            pred = [rng.choice(LABEL_ORDER) for _ in range(n)]
            report = evaluate(gold, pred)
            for value in report.metric_values().values():
                assert 0.0 <= value <= 1.0


class TestAggregateRuns:
    def _report(self, accuracy_pairs):
        gold, pred = zip(*accuracy_pairs)
        return evaluate(list(gold), list(pred))

    def test_identical_reports_std_zero(self):
        report = self._report([(Label.STANDARD, Label.STANDARD),
                               (Label.DUAL_QUALITY, Label.STANDARD)])
        aggregate = aggregate_runs([report] * 5)
        assert aggregate.n == 5
        for summary in aggregate.metrics.values():
            assert summary.std == 0.0

    def test_hand_arithmetic_mean_and_std(self):
        # accuracies 0.5 and 0.7 -> mean 0.6, sample std sqrt(0.02)
        r1 = evaluate([Label.STANDARD, Label.DUAL_QUALITY] * 5,
                      [Label.STANDARD, Label.STANDARD] * 5)
        r2 = evaluate([Label.STANDARD] * 10,
                      [Label.STANDARD] * 7 + [Label.DUAL_QUALITY] * 3)
        assert r1.accuracy == 0.5
        assert r2.accuracy == 0.7
        aggregate = aggregate_runs([r1, r2])
        acc = aggregate.metrics["accuracy"]
        assert abs(acc.mean - 0.6) <= 1e-12
        assert abs(acc.std - math.sqrt(0.02)) <= 1e-12

    def test_single_report(self):
        report = self._report([(Label.STANDARD, Label.STANDARD)])
        aggregate = aggregate_runs([report])
        assert aggregate.n == 1
        assert aggregate.metrics["accuracy"].mean == report.accuracy
        assert aggregate.metrics["accuracy"].std == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            aggregate_runs([])


class TestSumConfusions:
    def _cm(self, counts):
        return ConfusionMatrix(classes=LABEL_ORDER, counts=tuple(tuple(r) for r in counts))

    def test_zero_identity(self):
        cm = self._cm([[3, 1, 0], [0, 2, 1], [1, 0, 5]])
        zero = self._cm([[0] * 3] * 3)
        assert sum_confusions([cm, zero]) == cm

    def test_five_copies(self):
        cm = self._cm([[3, 1, 0], [0, 2, 1], [1, 0, 5]])
        summed = sum_confusions([cm] * 5)
        assert summed.counts == tuple(tuple(5 * c for c in row) for row in cm.counts)

    def test_mismatched_class_order(self):
        cm = self._cm([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        other = ConfusionMatrix(classes=(Label.STANDARD, Label.DUAL_QUALITY),
                                counts=((1, 0), (0, 1)))
        with pytest.raises(ArgumentError):
            sum_confusions([cm, other])

    def test_csv_export_shape(self):
        cm = self._cm([[3, 1, 0], [0, 2, 1], [1, 0, 5]])
        lines = cm.to_csv().strip().split("\n")
        assert lines[0] == "gold\\pred,dual quality,other problems,standard"
        assert lines[1] == "dual quality,3,1,0"
        assert len(lines) == 4
