"""Confusion matrices, classification reports and labeler agreement."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import LABELS, SentimentLabel


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are gold classes, columns predictions, both in Negative/Neutral/Positive order."""

    counts: np.ndarray
    classes: tuple[SentimentLabel, ...] = LABELS

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, key):
        g, p = key
        return int(self.counts[int(g), int(p)])


def confusion_matrix(gold: Sequence[SentimentLabel], pred: Sequence[SentimentLabel]) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise EvaluationError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    if not gold:
        raise EvaluationError("empty input")
    counts = np.zeros((len(LABELS), len(LABELS)), dtype=np.int64)
    for g, p in zip(gold, pred):
        counts[int(g), int(p)] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    label: SentimentLabel
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    classes: tuple[ClassMetrics, ...]
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    zero_division_hit: bool = False

    def __getitem__(self, label: SentimentLabel) -> ClassMetrics:
        for c in self.classes:
            if c.label == label:
                return c
        raise KeyError(label)

    def to_json(self) -> dict:
        return {
            "classes": [
                {"label": c.label.text, "precision": c.precision, "recall": c.recall,
                 "f1": c.f1, "support": c.support}
                for c in self.classes
            ],
            "accuracy": self.accuracy,
            "weighted": {"precision": self.weighted_precision, "recall": self.weighted_recall,
                         "f1": self.weighted_f1},
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "macro_f1": self.macro_f1,
            "zero_division_hit": self.zero_division_hit,
        }

    def to_text(self, title: str = "") -> str:
        """Fixed-width table, classes as columns, whole-number percentages."""
        heads = ["Neg", "Neu", "Pos", "All(w)", "All(m)"]
        rows = [
            ("Precision", [c.precision for c in self.classes], self.weighted_precision, self.macro_precision),
            ("Recall", [c.recall for c in self.classes], self.weighted_recall, self.macro_recall),
            ("F1-score", [c.f1 for c in self.classes], self.weighted_f1, self.macro_f1),
        ]
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'Class':<10}" + "".join(f"{h:>8}" for h in heads))
        for name, per, w, m in rows:
            cells = [_pct(v) for v in per] + [_pct(w), _pct(m)]
            lines.append(f"{name:<10}" + "".join(f"{c:>8}" for c in cells))
        lines.append(f"{'Accuracy':<10}" + " " * 24 + f"{_pct(self.accuracy):>8}")
        lines.append(f"{'Support':<10}" + "".join(f"{c.support:>8}" for c in self.classes)
                     + f"{sum(c.support for c in self.classes):>8}")
        return "\n".join(lines) + "\n"


def _pct(v: float) -> str:
    # round half up, matching how the whole-number percentages are printed
    return str(int(np.floor(v * 100 + 0.5)))


def classification_report(m: ConfusionMatrix) -> ClassificationReport:
    counts = np.asarray(m.counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EvaluationError("confusion matrix is empty")
    tp = np.diag(counts)
    pred_tot = counts.sum(axis=0)
    gold_tot = counts.sum(axis=1)
    zero_hit = bool(np.any(pred_tot == 0) or np.any(gold_tot == 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        recall = np.where(gold_tot > 0, tp / gold_tot, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    zero_hit = zero_hit or bool(np.any(denom == 0))
    weights = gold_tot / total
    present = gold_tot > 0
    per_class = tuple(
        ClassMetrics(m.classes[i], float(precision[i]), float(recall[i]), float(f1[i]), int(gold_tot[i]))
        for i in range(len(m.classes))
    )
    n_present = max(int(present.sum()), 1)
    return ClassificationReport(
        classes=per_class,
        accuracy=float(tp.sum() / total),
        weighted_precision=float(weights @ precision),
        weighted_recall=float(weights @ recall),
        weighted_f1=float(weights @ f1),
        macro_precision=float(precision[present].sum() / n_present),
        macro_recall=float(recall[present].sum() / n_present),
        macro_f1=float(f1[present].sum() / n_present),
        zero_division_hit=zero_hit,
    )


def weighted_f1(gold: Sequence[SentimentLabel], pred: Sequence[SentimentLabel]) -> float:
    return classification_report(confusion_matrix(gold, pred)).weighted_f1


@dataclass(frozen=True)
class AgreementReport:
    overall: float
    matches: int
    total: int
    per_class: dict[SentimentLabel, float]
    per_group: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "matches": self.matches,
            "total": self.total,
            "per_class": {k.text: v for k, v in self.per_class.items()},
            "per_group": dict(self.per_group),
        }


def agreement(gold: Sequence[SentimentLabel], alt: Sequence[SentimentLabel],
              groups: Sequence[str] | None = None) -> AgreementReport:
    """Exact-match rate overall, per gold class (the alternate labeler's recall) and per group."""
    if len(gold) != len(alt):
        raise EvaluationError(f"length mismatch: {len(gold)} vs {len(alt)}")
    if groups is not None and len(groups) != len(gold):
        raise EvaluationError("groups must align with labels")
    if not gold:
        raise EvaluationError("empty input")
    hit = [g == a for g, a in zip(gold, alt)]

    def rate(mask):
        sel = [h for h, keep in zip(hit, mask) if keep]
        return sum(sel) / len(sel)

    per_class = {lab: rate([g == lab for g in gold]) for lab in LABELS if lab in gold}
    per_group = {}
    if groups is not None:
        for name in dict.fromkeys(groups):
            per_group[name] = rate([gr == name for gr in groups])
    return AgreementReport(sum(hit) / len(hit), sum(hit), len(hit), per_class, per_group)


@dataclass(frozen=True)
class LabelingFixture:
    groups: tuple[str, ...]
    texts: tuple[str, ...]
    columns: dict[str, tuple[SentimentLabel, ...]]


def load_fixture(path=None) -> LabelingFixture:
    """Read a TSV with columns ``group, text, hand`` and any number of alternate labelers."""
    if path is None:
        path = Path(str(resources.files("vaxsent") / "data" / "table3.tsv"))
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader((l for l in fh if not l.startswith("#")), delimiter="\t")]
    if not rows:
        raise EvaluationError(f"empty fixture {path}")
    header, body = rows[0], rows[1:]
    if header[:3] != ["group", "text", "hand"]:
        raise EvaluationError("fixture header must start with group, text, hand")
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise EvaluationError(f"{path}: row {lineno} has {len(r)} columns, expected {len(header)}")
    columns = {name: tuple(SentimentLabel.parse(r[i]) for r in body)
               for i, name in enumerate(header) if i >= 2}
    return LabelingFixture(tuple(r[0] for r in body), tuple(r[1] for r in body), columns)


def fixture_agreement(alt: str, path=None) -> AgreementReport:
    fx = load_fixture(path)
    if alt not in fx.columns or alt == "hand":
        raise EvaluationError(f"fixture has no alternate labeler {alt!r}")
    return agreement(fx.columns["hand"], fx.columns[alt], fx.groups)
