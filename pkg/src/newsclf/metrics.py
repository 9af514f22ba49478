"""Confusion matrices, per-class / macro / micro precision-recall-F1, and report tables.

For class k with a = cm[k][k] (true positives), b = column sum minus a
(false positives) and c = row sum minus a (false negatives):
precision = a/(a+b), recall = a/(a+c), F1 = 2PR/(P+R). Undefined quotients
(0/0) are reported as 0 and flagged. Macro values are unweighted means of
the per-class values; micro values pool the counts.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np

from src.newsclf.errors import DimensionError, EmptyDatasetError, LabelError

Average = Literal["macro", "micro"]

CSV_HEADER = ("model", "precision", "recall", "f1", "accuracy")


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = examples with true class i predicted as class j."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds: Sequence[int], labels: Sequence[int], num_classes: int) -> ConfusionMatrix:
    p = np.asarray(preds, dtype=np.int64)
    t = np.asarray(labels, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise DimensionError(f"{p.size} predictions vs {t.size} labels")
    for name, ids in (("prediction", p), ("label", t)):
        if ids.size and (ids.min() < 0 or ids.max() >= num_classes):
            raise LabelError(f"{name} ids must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts)


def _ratio(num: float, den: float) -> tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


def harmonic_f1(precision: float, recall: float) -> float:
    """2PR/(P+R), 0 when both are 0."""
    return 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    precision_undefined: bool = False
    recall_undefined: bool = False
    f1_undefined: bool = False


@dataclass(frozen=True)
class MetricsReport:
    per_class: list[ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    accuracy: float
    total: int = 0
    undefined: list[str] = field(default_factory=list)

    def averaged(self, average: Average = "macro") -> tuple[float, float, float]:
        if average == "micro":
            return self.micro_precision, self.micro_recall, self.micro_f1
        return self.macro_precision, self.macro_recall, self.macro_f1


def precision_recall_f1(cm: ConfusionMatrix) -> MetricsReport:
    counts = cm.counts
    if counts.size == 0 or cm.total == 0:
        raise EmptyDatasetError("cannot score an empty confusion matrix")
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0).astype(np.float64)
    actual = counts.sum(axis=1).astype(np.float64)

    per_class: list[ClassMetrics] = []
    undefined: list[str] = []
    for k in range(cm.num_classes):
        p, p_undef = _ratio(tp[k], predicted[k])
        r, r_undef = _ratio(tp[k], actual[k])
        f1_undef = p_undef or r_undef or (p + r == 0)
        f1 = 0.0 if f1_undef else harmonic_f1(p, r)
        per_class.append(ClassMetrics(p, r, f1, int(actual[k]), p_undef, r_undef, f1_undef))
        undefined += [f"{name}[{k}]" for name, flag in (("precision", p_undef), ("recall", r_undef)) if flag]

    accuracy = float(tp.sum()) / cm.total
    return MetricsReport(
        per_class=per_class,
        macro_precision=float(np.mean([c.precision for c in per_class])),
        macro_recall=float(np.mean([c.recall for c in per_class])),
        macro_f1=float(np.mean([c.f1 for c in per_class])),
        # single-label: pooled FP and FN both equal total − trace
        micro_precision=accuracy,
        micro_recall=accuracy,
        micro_f1=accuracy,
        accuracy=accuracy,
        total=cm.total,
        undefined=undefined,
    )


class RenderedReport(NamedTuple):
    text: str
    csv: str


def report(named: Sequence[tuple[str, MetricsReport]], average: Average = "macro") -> RenderedReport:
    """Aligned comparison table (3 decimals) and its full-precision CSV twin."""
    width = max([len("Model")] + [len(name) for name, _ in named])
    title = f"{'Model':<{width}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}"
    lines = [title, "-" * len(title)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for name, rep in named:
        p, r, f1 = rep.averaged(average)
        lines.append(f"{name:<{width}}  {p:>9.3f}  {r:>9.3f}  {f1:>9.3f}")
        writer.writerow([name, repr(p), repr(r), repr(f1), repr(rep.accuracy)])
    return RenderedReport(text="\n".join(lines), csv=buf.getvalue())
