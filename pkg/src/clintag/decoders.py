"""Decoding heads over emission lattices.

Two heads are provided: independent per-token classification (argmax with
a softmax cross-entropy loss) and a linear-chain CRF with dedicated
start/end score vectors (log-partition, NLL with exact gradients, Viterbi,
and forward-backward marginals).  The lattice recursions run on the
backend selected in :mod:`clintag._backend`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from ._backend import kernels
from .labels import (
    LABELS,
    Label,
    LabelGrammarError,
    LabelSet,
    check_grammar,
    is_valid_end,
    is_valid_start,
    is_valid_transition,
)

#: Finite stand-in for minus infinity on constrained transitions.
PIN_VALUE = -1e4


class EmissionFormatError(ValueError):
    """An emission stream violates the lattice file contract."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class EmissionLattice:
    """Per-sentence T x L score matrix feeding a decoding head."""

    scores: np.ndarray
    source: str = "encoder_head"

    def __post_init__(self) -> None:
        if self.scores.ndim != 2:
            raise ValueError("emission lattice must be a T x L matrix")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("emission lattice contains non-finite entries")


def _scores(lattice: EmissionLattice | np.ndarray) -> np.ndarray:
    scores = lattice.scores if isinstance(lattice, EmissionLattice) else lattice
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 1:
        raise ValueError("emission lattice must be a non-empty T x L matrix")
    return scores


def _bioes_pin_masks(labelset: LabelSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    size = len(labelset)
    trans_mask = np.zeros((size, size), dtype=bool)
    for i, a in enumerate(labelset):
        for j, b in enumerate(labelset):
            trans_mask[i, j] = not is_valid_transition(a, b)
    start_mask = np.array([not is_valid_start(l) for l in labelset])
    end_mask = np.array([not is_valid_end(l) for l in labelset])
    return trans_mask, start_mask, end_mask


_PIN_MASKS_37 = _bioes_pin_masks(LABELS)


@dataclass
class TransitionMatrix:
    """Learnable CRF transition scores with optional BIOES constraining.

    When ``constrain_bioes`` is on (requires the 37-label universe) the
    entries for grammatically impossible pairs, starts, and ends are
    pinned to PIN_VALUE and excluded from training updates.
    """

    trans: np.ndarray
    start: np.ndarray
    end: np.ndarray
    constrain_bioes: bool = False

    def __post_init__(self) -> None:
        self.trans = np.ascontiguousarray(self.trans, dtype=np.float64)
        self.start = np.ascontiguousarray(self.start, dtype=np.float64)
        self.end = np.ascontiguousarray(self.end, dtype=np.float64)
        size = self.trans.shape[0]
        if self.trans.shape != (size, size) or self.start.shape != (size,) or self.end.shape != (size,):
            raise ValueError("inconsistent transition tensor shapes")
        for tensor in (self.trans, self.start, self.end):
            if not np.all(np.isfinite(tensor)):
                raise ValueError("transition scores must be finite")
        if self.constrain_bioes and size != len(LABELS):
            raise ValueError("BIOES constraining requires the 37-label universe")
        self.apply_pins()

    @property
    def size(self) -> int:
        return self.trans.shape[0]

    @classmethod
    def zeros(cls, size: int = len(LABELS), constrain_bioes: bool = False) -> "TransitionMatrix":
        return cls(np.zeros((size, size)), np.zeros(size), np.zeros(size), constrain_bioes)

    def apply_pins(self) -> None:
        """Re-impose PIN_VALUE on constrained entries (after updates)."""
        if not self.constrain_bioes:
            return
        trans_mask, start_mask, end_mask = _PIN_MASKS_37
        self.trans[trans_mask] = PIN_VALUE
        self.start[start_mask] = PIN_VALUE
        self.end[end_mask] = PIN_VALUE

    def zero_pinned(self, grad_trans: np.ndarray, grad_start: np.ndarray, grad_end: np.ndarray) -> None:
        """Zero gradient entries of pinned (non-trainable) transitions."""
        if not self.constrain_bioes:
            return
        trans_mask, start_mask, end_mask = _PIN_MASKS_37
        grad_trans[trans_mask] = 0.0
        grad_start[start_mask] = 0.0
        grad_end[end_mask] = 0.0


@dataclass(frozen=True)
class DecodedPath:
    """A decoded label-id sequence with its unnormalized path score."""

    label_ids: np.ndarray
    score: float


@dataclass(frozen=True)
class TransitionGradients:
    trans: np.ndarray
    start: np.ndarray
    end: np.ndarray


def classify_decode(lattice: EmissionLattice | np.ndarray) -> np.ndarray:
    """Independent per-position argmax; ties go to the lowest label index."""
    return _scores(lattice).argmax(axis=1)


def softmax_xent(
    lattice: EmissionLattice | np.ndarray, gold: Sequence[int] | np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean per-token cross-entropy and its gradient (softmax minus one-hot,
    divided by the token count)."""
    scores = _scores(lattice)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (scores.shape[0],):
        raise ValueError("gold length does not match the lattice")
    peak = scores.max(axis=1, keepdims=True)
    log_z = peak[:, 0] + np.log(np.exp(scores - peak).sum(axis=1))
    loss = float(np.mean(log_z - scores[np.arange(len(gold)), gold]))
    grad = np.exp(scores - log_z[:, None])
    grad[np.arange(len(gold)), gold] -= 1.0
    grad /= len(gold)
    return loss, grad


def score_path(
    lattice: EmissionLattice | np.ndarray, t: TransitionMatrix, path: Sequence[int] | np.ndarray
) -> float:
    """Unnormalized score of one label path under emissions and transitions."""
    scores = _scores(lattice)
    path = np.asarray(path, dtype=np.int64)
    total = t.start[path[0]] + t.end[path[-1]]
    total += scores[np.arange(len(path)), path].sum()
    total += t.trans[path[:-1], path[1:]].sum()
    return float(total)


def crf_log_partition(lattice: EmissionLattice | np.ndarray, t: TransitionMatrix) -> float:
    """Log of the summed exponentiated scores over all label paths."""
    scores = _scores(lattice)
    alphas = kernels.forward_alphas(scores, t.trans, t.start)
    return float(kernels.log_partition_from_alphas(alphas, t.end))


def crf_marginals(lattice: EmissionLattice | np.ndarray, t: TransitionMatrix) -> np.ndarray:
    """Posterior probability of each label at each position (rows sum to 1)."""
    scores = _scores(lattice)
    alphas = kernels.forward_alphas(scores, t.trans, t.start)
    betas = kernels.backward_betas(scores, t.trans, t.end)
    log_z = kernels.log_partition_from_alphas(alphas, t.end)
    return np.exp(alphas + betas - log_z)


def _check_gold_grammar(gold: np.ndarray) -> None:
    labels = [LABELS.label_at(int(i)) for i in gold]
    try:
        check_grammar(labels)
    except LabelGrammarError as err:
        pos = err.position
        if pos == 0:
            pair = f"<start> -> {labels[0]}"
        elif pos == len(labels) - 1 and is_valid_transition(labels[pos - 1], labels[pos]):
            pair = f"{labels[pos]} -> <end>"
        else:
            pair = f"{labels[pos - 1]} -> {labels[pos]}"
        raise LabelGrammarError(
            f"gold sequence ungrammatical under BIOES constraints at {pair}", pos
        ) from err


def crf_nll(
    lattice: EmissionLattice | np.ndarray,
    t: TransitionMatrix,
    gold: Sequence[int] | np.ndarray,
) -> tuple[float, np.ndarray, TransitionGradients]:
    """Negative log-likelihood of the gold path with exact gradients.

    grad_e holds posterior marginals minus the gold one-hot; transition
    gradients are expected adjacent-pair counts minus observed counts
    (same for start/end).  Pinned entries get zero gradient.
    """
    scores = _scores(lattice)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (scores.shape[0],):
        raise ValueError("gold length does not match the lattice")
    if t.constrain_bioes:
        _check_gold_grammar(gold)

    alphas = kernels.forward_alphas(scores, t.trans, t.start)
    betas = kernels.backward_betas(scores, t.trans, t.end)
    log_z = kernels.log_partition_from_alphas(alphas, t.end)
    loss = log_z - score_path(scores, t, gold)

    positions = np.arange(len(gold))
    grad_e = np.exp(alphas + betas - log_z)
    grad_e[positions, gold] -= 1.0

    grad_trans = kernels.transition_expectations(scores, t.trans, alphas, betas, log_z)
    np.subtract.at(grad_trans, (gold[:-1], gold[1:]), 1.0)
    grad_start = np.exp(alphas[0] + betas[0] - log_z)
    grad_start[gold[0]] -= 1.0
    grad_end = np.exp(alphas[-1] + betas[-1] - log_z)
    grad_end[gold[-1]] -= 1.0
    t.zero_pinned(grad_trans, grad_start, grad_end)
    return float(loss), grad_e, TransitionGradients(grad_trans, grad_start, grad_end)


def crf_viterbi(lattice: EmissionLattice | np.ndarray, t: TransitionMatrix) -> DecodedPath:
    """Globally best path; ties resolved toward the lowest label index."""
    scores = _scores(lattice)
    path, score = kernels.viterbi_path(scores, t.trans, t.start, t.end)
    return DecodedPath(path, float(score))


def invalid_transition_count(label_ids: Sequence[int] | np.ndarray, labelset: LabelSet = LABELS) -> int:
    """Number of adjacent pairs violating the BIOES grammar."""
    labels = [labelset.label_at(int(i)) for i in label_ids]
    return sum(
        1
        for a, b in zip(labels, labels[1:])
        if not is_valid_transition(a, b)
    )


# ---------------------------------------------------------------------------
# Emission lattice files: the contract for externally produced logits.
# ---------------------------------------------------------------------------

EMISSION_HEADER_PREFIX = "#labels:"


def write_emissions(
    lattices: Iterable[EmissionLattice | np.ndarray], labelset: LabelSet, sink: IO[str]
) -> None:
    """Write lattices with a column-order header; 17 significant digits keep
    the round trip bit-exact."""
    sink.write(f"{EMISSION_HEADER_PREFIX} {','.join(labelset.names())}\n")
    blocks = []
    for lattice in lattices:
        scores = _scores(lattice)
        if scores.shape[1] != len(labelset):
            raise EmissionFormatError(
                f"lattice has {scores.shape[1]} columns, labelset has {len(labelset)}"
            )
        blocks.append("\n".join(" ".join(f"{v:.17g}" for v in row) for row in scores))
    if blocks:
        sink.write("\n\n".join(blocks) + "\n")


def load_emissions(source: IO[str] | str, labelset: LabelSet) -> list[EmissionLattice]:
    """Read per-sentence lattices, validating the header and column counts."""
    text = source if isinstance(source, str) else source.read()
    lines = text.split("\n")
    if not lines or not lines[0].startswith(EMISSION_HEADER_PREFIX):
        raise EmissionFormatError(f"missing '{EMISSION_HEADER_PREFIX}' header", line=1)
    declared = lines[0][len(EMISSION_HEADER_PREFIX):].strip().split(",")
    if declared != labelset.names():
        raise EmissionFormatError("header label order does not match the labelset", line=1)

    expected = len(labelset)
    lattices: list[EmissionLattice] = []
    rows: list[list[float]] = []

    def flush() -> None:
        if rows:
            lattices.append(EmissionLattice(np.array(rows, dtype=np.float64), "external_file"))
            rows.clear()

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            flush()
            continue
        fields = line.split()
        if len(fields) != expected:
            raise EmissionFormatError(
                f"expected {expected} columns, got {len(fields)}", lineno
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError as err:
            raise EmissionFormatError(f"non-numeric field: {err}", lineno) from err
    flush()
    return lattices


def check_emission_alignment(lattices: Sequence[EmissionLattice], sentence_lengths: Sequence[int]) -> None:
    """Validate one lattice per sentence with matching token counts."""
    if len(lattices) != len(sentence_lengths):
        raise EmissionFormatError(
            f"{len(lattices)} lattices for {len(sentence_lengths)} sentences"
        )
    for index, (lattice, length) in enumerate(zip(lattices, sentence_lengths)):
        if lattice.scores.shape[0] != length:
            raise EmissionFormatError(
                f"sentence {index}: lattice has {lattice.scores.shape[0]} rows, "
                f"sentence has {length} tokens"
            )
