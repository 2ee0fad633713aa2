"""CoNLL-style corpus IO, vocabulary building, splitting, and statistics.

The canonical corpus file is UTF-8 with one ``token<SPACE>label`` pair per
line and a blank line between sentences.  Input is assumed pre-tokenized;
raw-text tokenization happens upstream of this toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections import Counter
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .labels import LABELS, Label, parse_label

PAD_ID = 0
UNKNOWN_ID = 1


class CorpusFormatError(ValueError):
    """A corpus stream violates the two-column CoNLL contract."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Sentence:
    """Pre-tokenized token sequence with one gold label per token."""

    tokens: tuple[str, ...]
    gold: tuple[Label, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.gold):
            raise ValueError("token and label sequences differ in length")
        if not self.tokens:
            raise ValueError("empty sentence")
        for token in self.tokens:
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"token {token!r} contains whitespace")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of sentences under a split name."""

    sentences: tuple[Sentence, ...]
    name: str = "unnamed"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


def _text_lines(source: IO[bytes] | IO[str] | str) -> list[str]:
    if isinstance(source, str):
        data: str | bytes = source
    else:
        data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as err:
            raise CorpusFormatError(f"not valid UTF-8: {err}") from err
    return data.split("\n")


def read_conll(source: IO[bytes] | IO[str] | str, name: str = "unnamed") -> Dataset:
    """Parse a two-column corpus stream into a Dataset.

    Each non-blank line is ``<token><whitespace><label>``; a blank line
    terminates the current sentence.  Empty sentences are skipped
    silently; malformed lines raise CorpusFormatError with the 1-based
    line number.
    """
    sentences: list[Sentence] = []
    tokens: list[str] = []
    gold: list[Label] = []

    def flush() -> None:
        if tokens:
            sentences.append(Sentence(tuple(tokens), tuple(gold)))
            tokens.clear()
            gold.clear()

    for lineno, line in enumerate(_text_lines(source), start=1):
        if not line.strip():
            flush()
            continue
        fields = line.split()
        if len(fields) != 2:
            raise CorpusFormatError(
                f"expected 'token label', got {line.strip()!r}", lineno
            )
        try:
            label = parse_label(fields[1])
        except ValueError as err:
            raise CorpusFormatError(str(err), lineno) from err
        tokens.append(fields[0])
        gold.append(label)
    flush()
    return Dataset(tuple(sentences), name)


def read_conll_file(path, name: str | None = None) -> Dataset:
    with open(path, "rb") as handle:
        return read_conll(handle, name if name is not None else str(path))


def write_conll(dataset: Iterable[Sentence], sink: IO[str]) -> None:
    """Write sentences in canonical form: single-space columns, one blank
    line between sentences, single trailing newline."""
    blocks = []
    for sentence in dataset:
        blocks.append(
            "\n".join(f"{tok} {lab}" for tok, lab in zip(sentence.tokens, sentence.gold))
        )
    if blocks:
        sink.write("\n\n".join(blocks) + "\n")


def write_conll_file(dataset: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        write_conll(dataset, handle)


def split_train_dev(
    dataset: Dataset, dev_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Deterministic sentence-level split into (train, dev) datasets.

    The dev split holds round(dev_fraction * N) sentences chosen by a
    seeded permutation; both splits keep the original corpus order.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    total = len(dataset)
    dev_size = int(round(dev_fraction * total))
    if dev_size <= 0 or dev_size >= total:
        raise ValueError(
            f"dev split of {dev_size} out of {total} sentences is degenerate"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(total)
    dev_indices = set(order[:dev_size].tolist())
    train = tuple(s for i, s in enumerate(dataset.sentences) if i not in dev_indices)
    dev = tuple(s for i, s in enumerate(dataset.sentences) if i in dev_indices)
    return Dataset(train, "train"), Dataset(dev, "dev")


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-id map with reserved padding (0) and unknown (1) ids."""

    token_to_id: dict[str, int]
    min_frequency: int

    def __len__(self) -> int:
        return len(self.token_to_id) + 2

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNKNOWN_ID)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.lookup(t) for t in tokens], dtype=np.int64)

    def id_ordered_tokens(self) -> list[str]:
        """Tokens sorted by id, the serialization order for checkpoints."""
        return [t for t, _ in sorted(self.token_to_id.items(), key=lambda kv: kv[1])]

    @classmethod
    def from_id_ordered_tokens(cls, tokens: Sequence[str], min_frequency: int = 1) -> "Vocabulary":
        return cls({t: i + 2 for i, t in enumerate(tokens)}, min_frequency)


def build_vocabulary(dataset: Dataset, min_frequency: int = 1) -> Vocabulary:
    """Assign dense ids to tokens seen at least ``min_frequency`` times.

    Ids start at 2 (after padding and unknown) in descending-frequency
    order, ties broken lexicographically.
    """
    if min_frequency < 1:
        raise ValueError(f"min_frequency must be >= 1, got {min_frequency}")
    if len(dataset) == 0:
        raise ValueError("cannot build a vocabulary from an empty dataset")
    counts: Counter[str] = Counter()
    for sentence in dataset:
        counts.update(sentence.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_frequency),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary({t: i + 2 for i, t in enumerate(kept)}, min_frequency)


@dataclass(frozen=True)
class LabelDistribution:
    """Per-split label counts and token percentages over the 37 labels."""

    counts: dict[str, dict[Label, int]] = field(default_factory=dict)

    def percent(self, split: str, label: Label) -> float:
        per_split = self.counts[split]
        total = sum(per_split.values())
        return 100.0 * per_split[label] / total if total else 0.0

    def splits(self) -> list[str]:
        return list(self.counts)


def label_distribution(splits: Sequence[Dataset]) -> LabelDistribution:
    """Count every label per split; percentages are per-split token shares."""
    counts: dict[str, dict[Label, int]] = {}
    for dataset in splits:
        per_split = {label: 0 for label in LABELS}
        for sentence in dataset:
            for label in sentence.gold:
                per_split[label] += 1
        counts[dataset.name] = per_split
    return LabelDistribution(counts)


def write_distribution_csv(distribution: LabelDistribution, sink: IO[str]) -> None:
    sink.write("split,label,count,percent\n")
    for split, per_split in distribution.counts.items():
        for label in LABELS:
            sink.write(
                f"{split},{label},{per_split[label]},"
                f"{distribution.percent(split, label):.6f}\n"
            )


@dataclass(frozen=True)
class WindowedDataset:
    """Long sentences cut into grammar-safe chunks plus the reassembly map.

    chunk_owner[k] is the index of the source sentence of chunk k; chunks
    of one sentence are consecutive.
    """

    chunks: Dataset
    chunk_owner: tuple[int, ...]
    source_count: int

    def reassemble(self, per_chunk: Sequence[Sequence]) -> list[list]:
        """Concatenate per-chunk sequences back into per-sentence sequences."""
        if len(per_chunk) != len(self.chunk_owner):
            raise ValueError("chunk count mismatch")
        merged: list[list] = [[] for _ in range(self.source_count)]
        for owner, piece in zip(self.chunk_owner, per_chunk):
            merged[owner].extend(piece)
        return merged


def _safe_cut(gold: Sequence[Label], limit: int) -> int:
    """Largest cut <= limit that does not fall strictly inside a span."""
    for cut in range(limit, 0, -1):
        left_ok = gold[cut - 1].position in ("O", "E", "S")
        right_ok = cut == len(gold) or gold[cut].position in ("O", "B", "S")
        if left_ok and right_ok:
            return cut
    return limit


def window_dataset(dataset: Dataset, max_length: int) -> WindowedDataset:
    """Cut sentences longer than ``max_length`` into consecutive chunks.

    Cut points avoid splitting a span where possible; a span longer than
    the window is hard-cut and each fragment's labels are re-encoded from
    its lenient span decode so every chunk stays grammatical.
    """
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    from .labels import labels_to_spans, spans_to_labels

    chunks: list[Sentence] = []
    owners: list[int] = []
    for index, sentence in enumerate(dataset):
        position = 0
        while position < len(sentence):
            remaining = len(sentence) - position
            if remaining <= max_length:
                cut = remaining
            else:
                cut = _safe_cut(sentence.gold[position:], max_length)
            piece_tokens = sentence.tokens[position : position + cut]
            piece_gold = sentence.gold[position : position + cut]
            spans = labels_to_spans(piece_gold, "lenient")
            piece_gold = tuple(spans_to_labels(spans, cut))
            chunks.append(Sentence(piece_tokens, piece_gold))
            owners.append(index)
            position += cut
    return WindowedDataset(Dataset(tuple(chunks), dataset.name), tuple(owners), len(dataset))
