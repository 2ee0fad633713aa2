"""Measurement surfaces: entity, token, BIOES, and binary scores plus
confusion matrices.

Entity scoring is exact span-and-category matching over lenient span
decodes of both sides; token scoring is prefix-insensitive (category
only); BIOES scoring is exact over the 37-label universe; binary scoring
collapses every special label against O.  Rates are computed in full
precision and rendered as percentages with two decimals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .labels import CATEGORIES, LABELS, Category, Label, labels_to_spans


class AlignmentError(ValueError):
    """Gold and predicted sequences do not line up."""


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _rate(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def _check_alignment(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> None:
    if len(gold) != len(pred):
        raise AlignmentError(
            f"{len(gold)} gold sentences vs {len(pred)} predicted"
        )
    for index, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise AlignmentError(
                f"sentence {index}: {len(g)} gold tokens vs {len(p)} predicted"
            )


@dataclass(frozen=True)
class CategoryRow:
    precision: float
    recall: float
    f1: float
    found: int


@dataclass(frozen=True)
class EntityReport:
    """Overall Acc/Pre/Rec/F1/Corr plus nine per-category rows."""

    acc: float
    precision: float
    recall: float
    f1: float
    corr: int
    per_category: dict[Category, CategoryRow]


def entity_level_eval(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> EntityReport:
    """Score predictions at the event/medication (full span) level.

    An entity counts as correct only when category, start, and end all
    match a gold span.  ``found`` counts predicted entities per category
    including wrong ones; Acc is exact-label token accuracy.
    """
    _check_alignment(gold, pred)
    corr = {c: 0 for c in CATEGORIES}
    found = {c: 0 for c in CATEGORIES}
    gold_count = {c: 0 for c in CATEGORIES}
    token_hits = 0
    token_total = 0
    for gold_labels, pred_labels in zip(gold, pred):
        token_total += len(gold_labels)
        token_hits += sum(1 for a, b in zip(gold_labels, pred_labels) if a == b)
        gold_spans = labels_to_spans(gold_labels, "lenient")
        pred_spans = labels_to_spans(pred_labels, "lenient")
        for span in gold_spans:
            gold_count[span.category] += 1
        for span in pred_spans:
            found[span.category] += 1
        for span in gold_spans & pred_spans:
            corr[span.category] += 1

    per_category = {
        c: CategoryRow(
            precision=_rate(corr[c], found[c]),
            recall=_rate(corr[c], gold_count[c]),
            f1=_f1(_rate(corr[c], found[c]), _rate(corr[c], gold_count[c])),
            found=found[c],
        )
        for c in CATEGORIES
    }
    total_corr = sum(corr.values())
    precision = _rate(total_corr, sum(found.values()))
    recall = _rate(total_corr, sum(gold_count.values()))
    return EntityReport(
        acc=_rate(token_hits, token_total),
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        corr=total_corr,
        per_category=per_category,
    )


@dataclass(frozen=True)
class TokenRow:
    precision: float
    recall: float
    f1: float
    support: int


def token_level_eval(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> dict[Category, TokenRow]:
    """Per-category token scores, insensitive to the B/I/E/S prefix."""
    _check_alignment(gold, pred)
    tp = {c: 0 for c in CATEGORIES}
    gold_tokens = {c: 0 for c in CATEGORIES}
    pred_tokens = {c: 0 for c in CATEGORIES}
    for gold_labels, pred_labels in zip(gold, pred):
        for g, p in zip(gold_labels, pred_labels):
            if g.category is not None:
                gold_tokens[g.category] += 1
            if p.category is not None:
                pred_tokens[p.category] += 1
            if g.category is not None and g.category == p.category:
                tp[g.category] += 1
    report = {}
    for c in CATEGORIES:
        precision = _rate(tp[c], pred_tokens[c])
        recall = _rate(tp[c], gold_tokens[c])
        report[c] = TokenRow(precision, recall, _f1(precision, recall), gold_tokens[c])
    return report


def bioes_level_eval(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> dict[Label, TokenRow]:
    """Exact-label token scores over all 37 BIOES sub-classes."""
    _check_alignment(gold, pred)
    tp = {l: 0 for l in LABELS}
    gold_tokens = {l: 0 for l in LABELS}
    pred_tokens = {l: 0 for l in LABELS}
    for gold_labels, pred_labels in zip(gold, pred):
        for g, p in zip(gold_labels, pred_labels):
            gold_tokens[g] += 1
            pred_tokens[p] += 1
            if g == p:
                tp[g] += 1
    report = {}
    for l in LABELS:
        precision = _rate(tp[l], pred_tokens[l])
        recall = _rate(tp[l], gold_tokens[l])
        report[l] = TokenRow(precision, recall, _f1(precision, recall), gold_tokens[l])
    return report


@dataclass(frozen=True)
class BinaryReport:
    """Special (any non-O) versus O detection scores."""

    precision: float
    recall: float
    f1: float
    acc: float


def binary_eval(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> BinaryReport:
    _check_alignment(gold, pred)
    tp = fp = fn = tn = 0
    for gold_labels, pred_labels in zip(gold, pred):
        for g, p in zip(gold_labels, pred_labels):
            if not g.is_outside and not p.is_outside:
                tp += 1
            elif g.is_outside and not p.is_outside:
                fp += 1
            elif not g.is_outside and p.is_outside:
                fn += 1
            else:
                tn += 1
    precision = _rate(tp, tp + fp)
    recall = _rate(tp, tp + fn)
    return BinaryReport(
        precision, recall, _f1(precision, recall), _rate(tp + tn, tp + fp + fn + tn)
    )


@dataclass(frozen=True)
class ConfusionMatrix:
    """Gold-by-predicted token counts; ``names`` orders rows and columns."""

    names: tuple[str, ...]
    counts: np.ndarray


def confusion(
    gold: Sequence[Sequence[Label]],
    pred: Sequence[Sequence[Label]],
    mode: str = "full",
) -> ConfusionMatrix:
    """Token confusion counts, either over all 37 labels or collapsed to
    {O, special}."""
    _check_alignment(gold, pred)
    if mode == "full":
        names = tuple(LABELS.names())
        index = {l: i for i, l in enumerate(LABELS)}
        counts = np.zeros((37, 37), dtype=np.int64)
        for gold_labels, pred_labels in zip(gold, pred):
            for g, p in zip(gold_labels, pred_labels):
                counts[index[g], index[p]] += 1
    elif mode == "binary":
        names = ("O", "special")
        counts = np.zeros((2, 2), dtype=np.int64)
        for gold_labels, pred_labels in zip(gold, pred):
            for g, p in zip(gold_labels, pred_labels):
                counts[0 if g.is_outside else 1, 0 if p.is_outside else 1] += 1
    else:
        raise ValueError(f"unknown confusion mode {mode!r}")
    return ConfusionMatrix(names, counts)


@dataclass(frozen=True)
class EvalBundle:
    entity: EntityReport
    token: dict[Category, TokenRow]
    bioes: dict[Label, TokenRow]
    binary: BinaryReport
    confusion_full: ConfusionMatrix
    confusion_binary: ConfusionMatrix


def evaluate_all(
    gold: Sequence[Sequence[Label]], pred: Sequence[Sequence[Label]]
) -> EvalBundle:
    return EvalBundle(
        entity=entity_level_eval(gold, pred),
        token=token_level_eval(gold, pred),
        bioes=bioes_level_eval(gold, pred),
        binary=binary_eval(gold, pred),
        confusion_full=confusion(gold, pred, "full"),
        confusion_binary=confusion(gold, pred, "binary"),
    )


def _pct(value: float) -> str:
    return f"{100.0 * value:.2f}"


def write_entity_report(report: EntityReport, sink: IO[str]) -> None:
    """Two-part table: overall Acc/Pre/Rec/F1/Corr header row, then nine
    category rows with Pre/Rec/F1/found columns."""
    sink.write("Acc,Pre,Rec,F1,Corr\n")
    sink.write(
        f"{_pct(report.acc)}%,{_pct(report.precision)}%,{_pct(report.recall)}%,"
        f"{_pct(report.f1)}%,{report.corr}\n"
    )
    sink.write("Category,Pre,Rec,F1,found\n")
    for c in CATEGORIES:
        row = report.per_category[c]
        sink.write(
            f"{c.value},{_pct(row.precision)}%,{_pct(row.recall)}%,"
            f"{_pct(row.f1)}%,{row.found}\n"
        )


def write_token_report(report: dict[Category, TokenRow], sink: IO[str]) -> None:
    sink.write("category,precision,recall,f1,support\n")
    for c in CATEGORIES:
        row = report[c]
        sink.write(
            f"{c.value},{_pct(row.precision)},{_pct(row.recall)},"
            f"{_pct(row.f1)},{row.support}\n"
        )


def write_bioes_report(report: dict[Label, TokenRow], sink: IO[str]) -> None:
    sink.write("label,precision,recall,f1,support\n")
    for l in LABELS:
        row = report[l]
        sink.write(
            f"{l},{_pct(row.precision)},{_pct(row.recall)},{_pct(row.f1)},{row.support}\n"
        )


def write_binary_report(report: BinaryReport, sink: IO[str]) -> None:
    sink.write("precision,recall,f1,accuracy\n")
    sink.write(
        f"{_pct(report.precision)},{_pct(report.recall)},"
        f"{_pct(report.f1)},{_pct(report.acc)}\n"
    )


def write_confusion(matrix: ConfusionMatrix, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["gold\\pred", *matrix.names])
    for name, row in zip(matrix.names, matrix.counts):
        writer.writerow([name, *row.tolist()])


def render_report(bundle: EvalBundle, out_dir, prefix: str = "") -> list[Path]:
    """Write the six report artifacts and return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = [
        (f"{prefix}entity_report.csv", write_entity_report, bundle.entity),
        (f"{prefix}token_report.csv", write_token_report, bundle.token),
        (f"{prefix}bioes_report.csv", write_bioes_report, bundle.bioes),
        (f"{prefix}binary_report.csv", write_binary_report, bundle.binary),
        (f"{prefix}confusion_full.csv", write_confusion, bundle.confusion_full),
        (f"{prefix}confusion_binary.csv", write_confusion, bundle.confusion_binary),
    ]
    paths = []
    for filename, writer_fn, payload in artifacts:
        path = out_dir / filename
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            writer_fn(payload, handle)
        paths.append(path)
    return paths
