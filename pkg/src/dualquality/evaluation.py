"""Confusion matrices, per-class and macro metrics, multi-seed aggregation.

Conventions: f1 = 2PR/(P+R) with 0 when P+R = 0; zero-support or
never-predicted classes score 0 and raise a warning flag on the report;
macro averages are unweighted means over all classes; run aggregation uses
the sample (n-1) standard deviation, 0 for a single run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ArgumentError
from .labels import LABEL_ORDER, Label


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[Label, ...]
    counts: tuple[tuple[int, ...], ...]  # gold row x predicted column

    def __post_init__(self) -> None:
        k = len(self.classes)
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ArgumentError("confusion matrix must be square over its classes")
        if any(cell < 0 for row in self.counts for cell in row):
            raise ArgumentError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(cell for row in self.counts for cell in row)

    def support(self, label: Label) -> int:
        return sum(self.counts[self.classes.index(label)])

    def to_json(self) -> dict:
        return {"classes": [c.value for c in self.classes],
                "counts": [list(row) for row in self.counts]}

    def to_csv(self) -> str:
        """Heat-map-ready CSV: header = predicted classes, rows = gold classes."""
        header = "gold\\pred," + ",".join(c.value for c in self.classes)
        lines = [header]
        for label, row in zip(self.classes, self.counts):
            lines.append(label.value + "," + ",".join(str(cell) for cell in row))
        return "\n".join(lines) + "\n"

    def save_csv(self, path: str | Path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.to_csv(), encoding="utf-8")
        return p


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class EvaluationReport:
    cm: ConfusionMatrix
    per_class: dict[Label, ClassMetrics]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    warnings: tuple[str, ...] = ()

    def metric_values(self) -> dict[str, float]:
        """Flat metric map used for aggregation across runs."""
        values = {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }
        for label, metrics in self.per_class.items():
            values[f"{label.value}/precision"] = metrics.precision
            values[f"{label.value}/recall"] = metrics.recall
            values[f"{label.value}/f1"] = metrics.f1
        return values

    def to_json(self) -> dict:
        return {
            "confusion_matrix": self.cm.to_json(),
            "per_class": {label.value: metrics.to_json() for label, metrics in self.per_class.items()},
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "warnings": list(self.warnings),
        }


def evaluate(gold: Sequence[Label], pred: Sequence[Label],
             classes: tuple[Label, ...] = LABEL_ORDER) -> EvaluationReport:
    """Exact confusion counts and the derived metrics for one run."""
    if len(gold) != len(pred):
        raise ArgumentError(f"gold has {len(gold)} items, pred has {len(pred)}")
    if len(gold) == 0:
        raise ArgumentError("cannot evaluate an empty prediction set")
    index = {label: i for i, label in enumerate(classes)}
    counts = [[0] * len(classes) for _ in classes]
    for g, p in zip(gold, pred):
        if g not in index:
            raise ArgumentError(f"gold label {g} not in class order")
        if p not in index:
            raise ArgumentError(f"predicted label {p} not in class order")
        counts[index[g]][index[p]] += 1

    cm = ConfusionMatrix(classes=classes, counts=tuple(tuple(row) for row in counts))
    warnings: list[str] = []
    per_class: dict[Label, ClassMetrics] = {}
    for i, label in enumerate(classes):
        tp = counts[i][i]
        gold_support = sum(counts[i])
        predicted = sum(counts[r][i] for r in range(len(classes)))
        if gold_support == 0:
            warnings.append(f"no gold examples of class {label.value!r}")
        if predicted == 0:
            warnings.append(f"class {label.value!r} never predicted")
        precision = tp / predicted if predicted else 0.0
        recall = tp / gold_support if gold_support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        per_class[label] = ClassMetrics(precision=precision, recall=recall, f1=f1)

    total = len(gold)
    accuracy = sum(counts[i][i] for i in range(len(classes))) / total
    k = len(classes)
    return EvaluationReport(
        cm=cm,
        per_class=per_class,
        accuracy=accuracy,
        macro_precision=sum(m.precision for m in per_class.values()) / k,
        macro_recall=sum(m.recall for m in per_class.values()) / k,
        macro_f1=sum(m.f1 for m in per_class.values()) / k,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float

    def to_json(self) -> dict:
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class RunAggregate:
    n: int
    metrics: dict[str, MetricSummary] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"n": self.n, "metrics": {k: v.to_json() for k, v in self.metrics.items()}}


def aggregate_runs(reports: Sequence[EvaluationReport]) -> RunAggregate:
    """Per-metric mean and sample standard deviation over seeded runs."""
    if not reports:
        raise ArgumentError("need at least one report to aggregate")
    keys = reports[0].metric_values().keys()
    series = {key: [report.metric_values()[key] for report in reports] for key in keys}
    n = len(reports)
    metrics = {}
    for key, values in series.items():
        mean = sum(values) / n
        if n == 1 or all(v == values[0] for v in values):
            # exact zero when runs agree; mean rounding must not leak into std
            mean = values[0] if values else mean
            std = 0.0
        else:
            std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
        metrics[key] = MetricSummary(mean=mean, std=std)
    return RunAggregate(n=n, metrics=metrics)


def sum_confusions(cms: Sequence[ConfusionMatrix]) -> ConfusionMatrix:
    """Element-wise sum; all matrices must share one class order."""
    if not cms:
        raise ArgumentError("need at least one confusion matrix")
    classes = cms[0].classes
    for cm in cms[1:]:
        if cm.classes != classes:
            raise ArgumentError("confusion matrices have mismatched class orders")
    k = len(classes)
    summed = [[sum(cm.counts[i][j] for cm in cms) for j in range(k)] for i in range(k)]
    return ConfusionMatrix(classes=classes, counts=tuple(tuple(row) for row in summed))
