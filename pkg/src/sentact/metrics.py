"""Evaluation metrics: per-class F1, the two task metrics, and Cohen's kappa.

Sentiment is scored as the macro-average of the positive-class and
negative-class F1 only (neutral predictions still count in the confusion
matrix). Dialog acts are scored as the prevalence-weighted average of the
per-class F1 over the 15 labels, with prevalence taken from the gold labels
of the evaluated set. A 0/0 precision, recall or F1 is defined as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus
from .corpus import DA_LABELS, SENTIMENT_LABELS, DialogActLabel, SentimentLabel


@dataclass
class ConfusionMatrix:
    """Square count matrix, rows = gold, columns = predicted."""

    labels: tuple
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("negative count in confusion matrix")

    @classmethod
    def from_pairs(cls, gold, predicted, labels):
        if len(gold) != len(predicted):
            raise ValueError(f"length mismatch: {len(gold)} gold vs {len(predicted)} predicted")
        index = {lab: i for i, lab in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for g, p in zip(gold, predicted):
            counts[index[g], index[p]] += 1
        return cls(labels=tuple(labels), counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def index_of(self, label) -> int:
        return self.labels.index(label)


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def f1_per_class(cm: ConfusionMatrix):
    """Per-class (precision, recall, F1) arrays in the matrix's label order."""
    diag = np.diag(cm.counts).astype(float)
    precision = _safe_div(diag, cm.counts.sum(axis=0))
    recall = _safe_div(diag, cm.counts.sum(axis=1))
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def sentiment_macro_f1(cm: ConfusionMatrix) -> float:
    """Mean of the positive and negative F1; neutral is left out of the mean."""
    _, _, f1 = f1_per_class(cm)
    pos = cm.index_of(SentimentLabel.POSITIVE)
    neg = cm.index_of(SentimentLabel.NEGATIVE)
    return float((f1[pos] + f1[neg]) / 2.0)


def macro_f1_all_classes(cm: ConfusionMatrix) -> float:
    """Plain macro F1 over every class (reported alongside for comparison)."""
    _, _, f1 = f1_per_class(cm)
    return float(f1.mean())


def da_weighted_f1(cm: ConfusionMatrix) -> float:
    """Sum of per-class F1 weighted by the gold prevalence of each class."""
    _, _, f1 = f1_per_class(cm)
    total = cm.total
    if total == 0:
        return 0.0
    prevalence = cm.support() / total
    return float((prevalence * f1).sum())


@dataclass
class KappaResult:
    kappa: float
    observed_agreement: float
    expected_agreement: float


def cohen_kappa(labels_a, labels_b) -> KappaResult:
    """Chance-corrected agreement between two equal-length label sequences."""
    if len(labels_a) != len(labels_b):
        raise ValueError(f"length mismatch: {len(labels_a)} vs {len(labels_b)}")
    if not labels_a:
        raise ValueError("empty label sequences")
    n = len(labels_a)
    classes = sorted(set(labels_a) | set(labels_b), key=str)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)))
    for a, b in zip(labels_a, labels_b):
        counts[index[a], index[b]] += 1
    p_o = float(np.trace(counts) / n)
    p_e = float((counts.sum(axis=1) / n) @ (counts.sum(axis=0) / n))
    if p_e >= 1.0 - 1e-15:
        if p_o >= 1.0 - 1e-15:
            return KappaResult(1.0, p_o, p_e)
        raise ValueError("expected agreement is 1 but observed is not; kappa undefined")
    return KappaResult((p_o - p_e) / (1.0 - p_e), p_o, p_e)


@dataclass
class MetricsReport:
    """Scores for one task on one evaluation set."""

    task: str
    labels: tuple
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    score: float  # the task's headline metric
    extras: dict

    @classmethod
    def for_sentiment(cls, cm: ConfusionMatrix):
        precision, recall, f1 = f1_per_class(cm)
        return cls(
            task="sentiment",
            labels=cm.labels,
            precision=precision,
            recall=recall,
            f1=f1,
            support=cm.support(),
            score=sentiment_macro_f1(cm),
            extras={"macro_f1_3class": macro_f1_all_classes(cm)},
        )

    @classmethod
    def for_dialog_acts(cls, cm: ConfusionMatrix):
        precision, recall, f1 = f1_per_class(cm)
        return cls(
            task="dialog_act",
            labels=cm.labels,
            precision=precision,
            recall=recall,
            f1=f1,
            support=cm.support(),
            score=da_weighted_f1(cm),
            extras={},
        )

    def to_dict(self) -> dict:
        rows = {}
        for i, lab in enumerate(self.labels):
            name = lab.name if hasattr(lab, "name") else str(lab)
            rows[name] = {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.support[i]),
            }
        return {
            "task": self.task,
            "score": self.score,
            "per_class": rows,
            **{k: float(v) for k, v in self.extras.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        lines = [f"{self.task}  score={self.score:.4f}"]
        lines.append(f"{'label':<14}{'prec':>8}{'rec':>8}{'f1':>8}{'support':>9}")
        for i, lab in enumerate(self.labels):
            name = lab.name if hasattr(lab, "name") else str(lab)
            lines.append(
                f"{name:<14}{self.precision[i]:>8.3f}{self.recall[i]:>8.3f}"
                f"{self.f1[i]:>8.3f}{int(self.support[i]):>9d}"
            )
        return "\n".join(lines)


def score_predictions(pairs_gold, pairs_pred):
    """Score aligned gold/predicted (sentiment, dialog_act) label pairs.

    Posts missing a gold label for a task are skipped for that task only.
    Returns (sentiment report, dialog-act report).
    """
    sent_gold, sent_pred, da_gold, da_pred = [], [], [], []
    for (gs, gd), (ps, pd) in zip(pairs_gold, pairs_pred):
        if gs is not None:
            sent_gold.append(gs)
            sent_pred.append(ps)
        if gd is not None:
            da_gold.append(gd)
            da_pred.append(pd)
    sent_cm = ConfusionMatrix.from_pairs(sent_gold, sent_pred, SENTIMENT_LABELS)
    da_cm = ConfusionMatrix.from_pairs(da_gold, da_pred, DA_LABELS)
    return MetricsReport.for_sentiment(sent_cm), MetricsReport.for_dialog_acts(da_cm)


def read_prediction_file(path):
    """Parse a 10-column linearized TSV with two trailing predicted-label
    columns into aligned (gold, predicted) label-pair lists."""
    gold, pred = [], []
    sent_by_code = {lab.code: lab for lab in SentimentLabel}
    da_by_code = {lab.code: lab for lab in DialogActLabel}
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise corpus.CorpusFormatError(
                    f"expected 10 columns in prediction file, got {len(cols)}",
                    path,
                    line_no,
                )
            try:
                gs = None if cols[5] == corpus.WITHHELD else sent_by_code[cols[5]]
                if cols[6] == corpus.WITHHELD:
                    gd = None
                else:
                    gd = corpus.normalize_da_code(cols[6])
                    gd = None if gd is corpus.REMOVED else gd
                ps, pd = sent_by_code[cols[8]], da_by_code[cols[9]]
            except (KeyError, ValueError) as exc:
                raise corpus.CorpusFormatError(
                    f"bad label code: {exc}", path, line_no
                ) from exc
            gold.append((gs, gd))
            pred.append((ps, pd))
    return gold, pred


def score_prediction_file(path):
    gold, pred = read_prediction_file(path)
    return score_predictions(gold, pred)
