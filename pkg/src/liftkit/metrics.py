"""Evaluation metrics and breakdown reports.

Counting quality is measured by off-by-one accuracy (fraction of samples
with |gt - pred| <= 1) and mean absolute error. Detection quality is the
partial-credit accuracy |P ∩ G| / |G| where P holds the classes whose
probability clears the confidence threshold tau and G is the ground-truth
word set; spurious extra predictions are deliberately not penalized, so a
separate F1 diagnostic is included for anyone who wants strictness.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SchemaError, ValidationError
from .labels import Label, Vocabulary, default_categories
from .model import predict_count, predict_detection

DEFAULT_TAU = 0.05


def _count_arrays(gt: Sequence[int], pred: Sequence[int]):
    if len(gt) != len(pred):
        raise ValidationError(f"length mismatch: {len(gt)} vs {len(pred)}")
    if not len(gt):
        raise ValidationError("empty count lists")
    if any(v is None for v in pred) or any(v is None for v in gt):
        raise ValidationError(
            "counts must be integers; map unrestricted None predictions "
            "to a count before scoring")
    return np.asarray(gt, dtype=np.float64), np.asarray(pred, dtype=np.float64)


def obo(gt: Sequence[int], pred: Sequence[int]) -> float:
    """Fraction of pairs whose counts differ by at most one."""
    g, p = _count_arrays(gt, pred)
    return float((np.abs(g - p) <= 1).mean())


def mae(gt: Sequence[int], pred: Sequence[int]) -> float:
    """Mean absolute difference between predicted and true counts."""
    g, p = _count_arrays(gt, pred)
    return float(np.abs(g - p).mean())


def partial_credit(probs: np.ndarray, gt: Label, vocab: Vocabulary,
                   tau: float = DEFAULT_TAU) -> float:
    """|P ∩ G| / |G| with P = classes at or above tau."""
    g = set(gt)
    if not g:
        raise ValidationError("empty ground-truth label")
    predicted = {cls for cls, _ in predict_detection(probs, vocab, tau)}
    return len(predicted & g) / len(g)


def detection_f1(probs: np.ndarray, gt: Label, vocab: Vocabulary,
                 tau: float = DEFAULT_TAU) -> float:
    """Stricter diagnostic that also penalizes spurious predicted words;
    not part of the headline detection accuracy."""
    g = set(gt)
    if not g:
        raise ValidationError("empty ground-truth label")
    predicted = {cls for cls, _ in predict_detection(probs, vocab, tau)}
    if not predicted:
        return 0.0
    hits = len(predicted & g)
    precision = hits / len(predicted)
    recall = hits / len(g)
    if hits == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def exact_match(pred_label: str, gt_label: str) -> int:
    """All-or-nothing comparison of whole normalized label strings."""
    return int(pred_label == gt_label)


@dataclass
class EvalRecord:
    """One scored sample: the distribution plus its ground truth."""

    sample_id: str
    task: str  # "detection" or "counting"
    ground_truth: object  # Label for detection, int for counting
    probs: np.ndarray

    def __post_init__(self) -> None:
        if self.task not in ("detection", "counting"):
            raise ValidationError(f"unknown task {self.task!r}")
        if self.task == "counting" and not isinstance(self.ground_truth, (int, np.integer)):
            raise ValidationError("counting record needs an integer ground truth")
        if self.task == "detection" and not isinstance(self.ground_truth, (list, tuple)):
            raise ValidationError("detection record needs a word-list ground truth")


def write_records(records: Sequence[EvalRecord], path: str | Path,
                  classes: Sequence[str], tau: float = DEFAULT_TAU) -> None:
    """JSONL with a header line carrying the class order and tau, so a
    records file can be re-scored on its own."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"classes": list(classes), "tau": tau}) + "\n")
        for r in records:
            gt = int(r.ground_truth) if r.task == "counting" else list(r.ground_truth)
            fh.write(json.dumps({
                "id": r.sample_id,
                "task": r.task,
                "ground_truth": gt,
                "probs": [float(p) for p in r.probs],
            }) + "\n")


def read_records(path: str | Path) -> tuple[list[EvalRecord], list[str], float]:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            classes = [str(c) for c in header["classes"]]
            tau = float(header["tau"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}:1: bad records header: {exc}") from exc
        records: list[EvalRecord] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                task = str(rec["task"])
                gt = rec["ground_truth"]
                gt = int(gt) if task == "counting" else [str(w) for w in gt]
                probs = np.asarray(rec["probs"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad record: {exc}") from exc
            if len(probs) != len(classes):
                raise SchemaError(
                    f"{path}:{lineno}: {len(probs)} probs for {len(classes)} classes")
            records.append(EvalRecord(sample_id=str(rec["id"]), task=task,
                                      ground_truth=gt, probs=probs))
    return records, classes, tau


def vocabulary_from_classes(classes: Sequence[str]) -> Vocabulary:
    """Rebuild a Vocabulary (weights from the default category table) from
    a stored class order, e.g. a records header or checkpoint echo."""
    table = default_categories()
    return Vocabulary(
        classes=tuple(classes),
        weights=np.array([table.weight(c) for c in classes], dtype=np.float64),
        categories=tuple(table.category_of(c) for c in classes))


@dataclass
class MetricsReport:
    tau: float
    num_samples: int
    num_detection: int
    num_counting: int
    detection_accuracy: float | None
    detection_f1: float | None
    exact_match_rate: float | None
    obo: float | None
    mae: float | None
    # gt word-set size -> {"n", "accuracy"}
    per_label_length: dict[int, dict[str, float]] = field(default_factory=dict)
    # confusion[gt word count][predicted word count] = sample count
    word_count_confusion: dict[int, dict[int, int]] = field(default_factory=dict)
    # gt count -> {"n", "obo", "mae"}
    per_count: dict[int, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "num_samples": self.num_samples,
            "num_detection": self.num_detection,
            "num_counting": self.num_counting,
            "detection_accuracy": self.detection_accuracy,
            "detection_f1": self.detection_f1,
            "exact_match_rate": self.exact_match_rate,
            "obo": self.obo,
            "mae": self.mae,
            "per_label_length": {str(k): v for k, v in sorted(self.per_label_length.items())},
            "word_count_confusion": {
                str(k): {str(kk): vv for kk, vv in sorted(row.items())}
                for k, row in sorted(self.word_count_confusion.items())},
            "per_count": {str(k): v for k, v in sorted(self.per_count.items())},
        }


def build_report(records: Sequence[EvalRecord], vocab: Vocabulary,
                 tau: float = DEFAULT_TAU) -> MetricsReport:
    """Aggregate metrics over records; detection or counting fields are None
    when a task has no records. Order of records does not matter."""
    if not records:
        raise ValidationError("no records to score")

    det_scores: list[float] = []
    f1_scores: list[float] = []
    exact_hits: list[int] = []
    by_length: dict[int, list[float]] = {}
    confusion: dict[int, dict[int, int]] = {}
    gt_counts: list[int] = []
    pred_counts: list[int] = []

    for r in records:
        if r.task == "detection":
            gt_words = list(r.ground_truth)
            score = partial_credit(r.probs, gt_words, vocab, tau)
            det_scores.append(score)
            f1_scores.append(detection_f1(r.probs, gt_words, vocab, tau))
            predicted = sorted(cls for cls, _ in predict_detection(r.probs, vocab, tau))
            exact_hits.append(exact_match(" ".join(predicted),
                                          " ".join(sorted(set(gt_words)))))
            glen = len(set(gt_words))
            by_length.setdefault(glen, []).append(score)
            confusion.setdefault(glen, {}).setdefault(len(predicted), 0)
            confusion[glen][len(predicted)] += 1
        else:
            gt_counts.append(int(r.ground_truth))
            pred_counts.append(predict_count(r.probs, vocab))

    per_count: dict[int, dict[str, float]] = {}
    if gt_counts:
        buckets: dict[int, list[tuple[int, int]]] = {}
        for g, p in zip(gt_counts, pred_counts):
            buckets.setdefault(g, []).append((g, p))
        for g in sorted(buckets):
            gs = [x[0] for x in buckets[g]]
            ps = [x[1] for x in buckets[g]]
            per_count[g] = {"n": len(gs), "obo": obo(gs, ps), "mae": mae(gs, ps)}

    return MetricsReport(
        tau=tau,
        num_samples=len(records),
        num_detection=len(det_scores),
        num_counting=len(gt_counts),
        detection_accuracy=float(np.mean(det_scores)) if det_scores else None,
        detection_f1=float(np.mean(f1_scores)) if f1_scores else None,
        exact_match_rate=float(np.mean(exact_hits)) if exact_hits else None,
        obo=obo(gt_counts, pred_counts) if gt_counts else None,
        mae=mae(gt_counts, pred_counts) if gt_counts else None,
        per_label_length={
            k: {"n": len(v), "accuracy": float(np.mean(v))}
            for k, v in sorted(by_length.items())},
        word_count_confusion={k: dict(sorted(row.items()))
                              for k, row in sorted(confusion.items())},
        per_count=per_count,
    )


def save_report(report: MetricsReport, out_dir: str | Path,
                make_plots: bool = True) -> list[Path]:
    """Write report.json, the CSV tables, and (optionally) PNG plots.
    Returns the list of files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    path = out_dir / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    written.append(path)

    if report.per_label_length:
        path = out_dir / "accuracy_by_label_length.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("label_length,n,accuracy\n")
            for k, row in sorted(report.per_label_length.items()):
                fh.write(f"{k},{int(row['n'])},{row['accuracy']!r}\n")
        written.append(path)

    if report.word_count_confusion:
        cols = sorted({c for row in report.word_count_confusion.values() for c in row})
        path = out_dir / "word_count_confusion.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("gt_length," + ",".join(f"pred_{c}" for c in cols) + "\n")
            for k, row in sorted(report.word_count_confusion.items()):
                fh.write(f"{k}," + ",".join(str(row.get(c, 0)) for c in cols) + "\n")
        written.append(path)

    if report.per_count:
        path = out_dir / "counting_by_count.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("count,n,obo,mae\n")
            for k, row in sorted(report.per_count.items()):
                fh.write(f"{k},{int(row['n'])},{row['obo']!r},{row['mae']!r}\n")
        written.append(path)

    if make_plots:
        from . import plots
        written.extend(plots.plot_report(report, out_dir))
    return written
