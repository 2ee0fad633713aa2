"""Clinical label universe: BIOES tagging over nine event/medication categories.

The label set is closed: 9 categories x 4 positions (B, I, E, S) plus the
outside label O, 37 labels in total.  This module owns the label<->string
syntax (``O`` or ``<POS>-<Category>``), the span<->label-sequence codecs,
and the BIOES transition grammar shared by the CRF decoder and the
evaluation harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class Category(Enum):
    """The nine clinical event and medication categories."""

    ADE = "ADE"
    DOSAGE = "Dosage"
    DRUG = "Drug"
    DURATION = "Duration"
    FORM = "Form"
    FREQUENCY = "Frequency"
    REASON = "Reason"
    ROUTE = "Route"
    STRENGTH = "Strength"


#: Categories in ascending name order (also their declaration order).
CATEGORIES: tuple[Category, ...] = tuple(sorted(Category, key=lambda c: c.value))

#: Span positions in canonical B, I, E, S order.
POSITIONS: tuple[str, ...] = ("B", "I", "E", "S")


class LabelGrammarError(ValueError):
    """A label sequence violates the BIOES grammar.

    ``position`` is the first offending token index.
    """

    def __init__(self, message: str, position: int):
        super().__init__(message)
        self.position = position


class SpanValidationError(ValueError):
    """A span set is out of range or overlapping."""


@dataclass(frozen=True)
class Label:
    """One of the 37 labels: the outside label or a (position, category) pair."""

    position: str
    category: Category | None = None

    def __post_init__(self) -> None:
        if self.position == "O":
            if self.category is not None:
                raise ValueError("outside label carries no category")
        elif self.position in POSITIONS:
            if self.category is None:
                raise ValueError(f"position {self.position!r} requires a category")
        else:
            raise ValueError(f"unknown label position {self.position!r}")

    @property
    def is_outside(self) -> bool:
        return self.position == "O"

    def __str__(self) -> str:
        if self.is_outside:
            return "O"
        assert self.category is not None
        return f"{self.position}-{self.category.value}"


#: The outside label.
OUTSIDE = Label("O")

_CATEGORY_BY_NAME = {c.value: c for c in Category}


def parse_label(text: str) -> Label:
    """Parse the canonical label string syntax: ``O`` or ``<POS>-<Category>``."""
    if text == "O":
        return OUTSIDE
    position, sep, name = text.partition("-")
    if not sep or position not in POSITIONS:
        raise ValueError(f"malformed label string {text!r}")
    category = _CATEGORY_BY_NAME.get(name)
    if category is None:
        raise ValueError(f"unknown category in label string {text!r}")
    return Label(position, category)


@dataclass(frozen=True)
class Span:
    """A labelled token span; ``end`` is exclusive."""

    category: Category
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise SpanValidationError(f"degenerate span {self!r}")

    def __str__(self) -> str:
        return f"{self.category.value}[{self.start},{self.end})"


class LabelSet:
    """The ordered 37-label universe with a stable label<->index bijection.

    Index 0 is the outside label; the remaining labels are sorted by
    category name ascending, with positions in B, I, E, S order inside a
    category.  The ordering is the contract for emission-lattice columns,
    transition matrices, and serialized models.
    """

    def __init__(self) -> None:
        labels = [OUTSIDE]
        for category in CATEGORIES:
            labels.extend(Label(position, category) for position in POSITIONS)
        self._labels: tuple[Label, ...] = tuple(labels)
        self._index: dict[Label, int] = {lab: i for i, lab in enumerate(labels)}

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self):
        return iter(self._labels)

    @property
    def labels(self) -> tuple[Label, ...]:
        return self._labels

    def index_of(self, label: Label) -> int:
        return self._index[label]

    def label_at(self, index: int) -> Label:
        return self._labels[index]

    def names(self) -> list[str]:
        return [str(lab) for lab in self._labels]

    def encode(self, labels: Iterable[Label]) -> list[int]:
        return [self._index[lab] for lab in labels]

    def decode(self, indices: Iterable[int]) -> list[Label]:
        return [self._labels[i] for i in indices]


#: Shared default universe; LabelSet() instances are all identical.
LABELS = LabelSet()


def spans_to_labels(spans: Iterable[Span], length: int) -> list[Label]:
    """Encode non-overlapping spans as a BIOES label sequence of ``length``.

    A length-1 span becomes S-cat; a longer span becomes B, I..., E.
    Positions outside every span are O.  Raises SpanValidationError for
    out-of-range or overlapping spans, naming the offending span.
    """
    labels: list[Label | None] = [None] * length
    for span in sorted(spans, key=lambda s: (s.start, s.end)):
        if span.end > length:
            raise SpanValidationError(f"span {span} exceeds sentence length {length}")
        if any(labels[i] is not None for i in range(span.start, span.end)):
            raise SpanValidationError(f"span {span} overlaps another span")
        if span.end - span.start == 1:
            labels[span.start] = Label("S", span.category)
        else:
            labels[span.start] = Label("B", span.category)
            for i in range(span.start + 1, span.end - 1):
                labels[i] = Label("I", span.category)
            labels[span.end - 1] = Label("E", span.category)
    return [lab if lab is not None else OUTSIDE for lab in labels]


def is_valid_transition(prev: Label, current: Label) -> bool:
    """True iff the ordered pair may appear adjacently in a BIOES sequence.

    After O, E-* or S-* a span may not be continued: only O, B-* or S-*
    follow.  After B-c or I-c the open span must continue with I-c or E-c
    of the same category.
    """
    if prev.position in ("O", "E", "S"):
        return current.position in ("O", "B", "S")
    return current.position in ("I", "E") and current.category == prev.category


def is_valid_start(label: Label) -> bool:
    """True iff a grammatical sequence may begin with ``label``."""
    return label.position in ("O", "B", "S")


def is_valid_end(label: Label) -> bool:
    """True iff a grammatical sequence may end with ``label``."""
    return label.position in ("O", "E", "S")


def check_grammar(labels: Sequence[Label]) -> None:
    """Raise LabelGrammarError at the first position violating the grammar."""
    if not labels:
        return
    if not is_valid_start(labels[0]):
        raise LabelGrammarError(f"{labels[0]} cannot start a sequence", 0)
    for i in range(1, len(labels)):
        if not is_valid_transition(labels[i - 1], labels[i]):
            raise LabelGrammarError(
                f"invalid transition {labels[i - 1]} -> {labels[i]}", i
            )
    last = len(labels) - 1
    if not is_valid_end(labels[last]):
        raise LabelGrammarError(f"{labels[last]} cannot end a sequence", last)


def labels_to_spans(labels: Sequence[Label], mode: str = "strict") -> set[Span]:
    """Decode a label sequence back into its span set.

    In ``strict`` mode the sequence must be grammatical (the exact inverse
    of :func:`spans_to_labels`); the first offending position raises
    LabelGrammarError.  In ``lenient`` mode malformed sequences are
    repaired: an I/E with no open span of its category opens a new span,
    an unclosed B/I closes at the last contiguous same-category token, and
    S always emits a length-1 span.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if mode == "strict":
        check_grammar(labels)

    spans: set[Span] = set()
    open_category: Category | None = None
    open_start = 0
    for i, label in enumerate(labels):
        if open_category is not None and (
            label.is_outside or label.position in ("B", "S") or label.category != open_category
        ):
            spans.add(Span(open_category, open_start, i))
            open_category = None
        if label.position == "S":
            assert label.category is not None
            spans.add(Span(label.category, i, i + 1))
        elif label.position == "B":
            open_category, open_start = label.category, i
        elif label.position == "I":
            if open_category is None:
                open_category, open_start = label.category, i
        elif label.position == "E":
            if open_category is None:
                open_category, open_start = label.category, i
            spans.add(Span(open_category, open_start, i + 1))
            open_category = None
    if open_category is not None:
        spans.add(Span(open_category, open_start, len(labels)))
    return spans
