"""Adam training loop with patience-based early stopping on dev entity F1.

Every source of randomness (shuffling, dropout) is derived from the
config seed plus the epoch and sentence counters, so a run replays
bit-for-bit and resuming from a checkpoint reproduces the exact
continuation of the original run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import IO, Callable, Sequence

import numpy as np

from .checkpoint import Checkpoint
from .corpus import Dataset, Vocabulary, window_dataset
from .decoders import EmissionLattice, check_emission_alignment
from .encoder import EncoderConfig, ParameterStore
from .evaluation import entity_level_eval
from .labels import LABELS
from .models import MODEL_SHAPES, TaggerModel, predict_dataset


class TrainingDivergedError(RuntimeError):
    """Loss or gradients left the finite range."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        location = ""
        if epoch is not None:
            location = f" (epoch {epoch}" + (f", batch {batch})" if batch is not None else ")")
        super().__init__(message + location)
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    model_shape: str = "transformer_crf"
    batch_size: int = 4
    learning_rate: float = 0.005
    max_epochs: int = 100
    patience: int = 20
    dropout: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    grad_clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model_shape not in MODEL_SHAPES:
            raise ValueError(f"unknown model shape {self.model_shape!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: ParameterStore) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), 0)


def adam_step(
    params: ParameterStore,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam update, with optional global-norm clipping."""
    for name, grad in grads.items():
        if np.isnan(grad).any():
            raise TrainingDivergedError(f"NaN gradient in tensor {name!r}")
    if config.grad_clip_norm is not None:
        total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
        if total > config.grad_clip_norm:
            factor = config.grad_clip_norm / total
            grads = {name: g * factor for name, g in grads.items()}

    state.step += 1
    bias1 = 1.0 - config.adam_beta1 ** state.step
    bias2 = 1.0 - config.adam_beta2 ** state.step
    for name, grad in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= config.adam_beta1
        m += (1.0 - config.adam_beta1) * grad
        v *= config.adam_beta2
        v += (1.0 - config.adam_beta2) * np.square(grad)
        params[name] -= config.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + config.adam_epsilon)
    params.bump_version()


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    dev_token_acc: float
    dev_entity_p: float
    dev_entity_r: float
    dev_entity_f1: float
    seconds: float


EPOCH_LOG_HEADER = "epoch,train_loss,dev_token_acc,dev_entity_p,dev_entity_r,dev_entity_f1,seconds"


def write_epoch_log_csv(logs: Sequence[EpochLog], sink: IO[str]) -> None:
    sink.write(EPOCH_LOG_HEADER + "\n")
    for log in logs:
        sink.write(
            f"{log.epoch},{log.train_loss!r},{log.dev_token_acc!r},"
            f"{log.dev_entity_p!r},{log.dev_entity_r!r},{log.dev_entity_f1!r},"
            f"{log.seconds:.6f}\n"
        )


def _sentence_seed(seed: int, epoch: int, counter: int) -> int:
    state = np.random.SeedSequence(seed, spawn_key=(epoch, counter)).generate_state(1)
    return int(state[0])


def _epoch_order(seed: int, epoch: int, count: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(epoch,))))
    return rng.permutation(count)


@dataclass
class _Sample:
    token_ids: np.ndarray | None
    gold_ids: np.ndarray
    lattice: EmissionLattice | None


def _make_checkpoint(
    model: TaggerModel,
    adam: AdamState,
    config: TrainConfig,
    epoch: int,
    best_f1: float,
    best_epoch: int,
) -> Checkpoint:
    return Checkpoint(
        model_shape=model.shape,
        constrain_bioes=model.constrain_bioes,
        params=model.params.copy(),
        adam_m={k: v.copy() for k, v in adam.m.items()},
        adam_v={k: v.copy() for k, v in adam.v.items()},
        step=adam.step,
        seed=config.seed,
        completed_epochs=epoch,
        best_dev_f1=best_f1,
        best_epoch=best_epoch,
        encoder_config=model.encoder_config,
        train_config=asdict(config),
        vocabulary_tokens=(
            None if model.vocabulary is None else model.vocabulary.id_ordered_tokens()
        ),
    )


def train(
    train_data: Dataset,
    dev_data: Dataset,
    config: TrainConfig,
    encoder_config: EncoderConfig | None = None,
    vocabulary: Vocabulary | None = None,
    train_emissions: Sequence[EmissionLattice] | None = None,
    dev_emissions: Sequence[EmissionLattice] | None = None,
    resume_from: Checkpoint | None = None,
    constrain_bioes: bool = True,
    clock: Callable[[], float] | None = time.perf_counter,
) -> tuple[Checkpoint, list[EpochLog]]:
    """Train a tagger and return the best checkpoint plus per-epoch logs.

    Early stopping keeps the checkpoint with the highest dev entity F1
    (ties keep the earlier epoch) and stops after ``patience`` epochs
    without improvement.  Pass ``clock=None`` to zero the wall-time
    column for byte-reproducible logs.
    """
    if len(train_data) == 0 or len(dev_data) == 0:
        raise ValueError("train and dev datasets must be non-empty")

    frozen = config.model_shape == "frozen_emissions_crf"
    if frozen:
        if train_emissions is None or dev_emissions is None:
            raise ValueError("frozen_emissions_crf requires train and dev emissions")
        check_emission_alignment(train_emissions, [len(s) for s in train_data])
        check_emission_alignment(dev_emissions, [len(s) for s in dev_data])
        samples = [
            _Sample(None, np.array(LABELS.encode(s.gold), dtype=np.int64), lattice)
            for s, lattice in zip(train_data, train_emissions)
        ]
    else:
        if encoder_config is None:
            raise ValueError(f"{config.model_shape} requires an encoder config")
        if vocabulary is None:
            raise ValueError(f"{config.model_shape} requires a vocabulary")
        windowed = window_dataset(train_data, encoder_config.max_sequence)
        samples = [
            _Sample(
                vocabulary.encode(chunk.tokens),
                np.array(LABELS.encode(chunk.gold), dtype=np.int64),
                None,
            )
            for chunk in windowed.chunks
        ]

    if resume_from is not None:
        if resume_from.model_shape != config.model_shape:
            raise ValueError("checkpoint shape does not match the training config")
        model = TaggerModel.from_checkpoint(resume_from)
        adam = AdamState(
            {k: v.copy() for k, v in resume_from.adam_m.items()},
            {k: v.copy() for k, v in resume_from.adam_v.items()},
            resume_from.step,
        )
        start_epoch = resume_from.completed_epochs + 1
        best_f1 = resume_from.best_dev_f1
        best_epoch = resume_from.best_epoch
        best_checkpoint: Checkpoint | None = resume_from
    else:
        model = TaggerModel.build(
            config.model_shape, encoder_config, vocabulary, constrain_bioes, config.seed
        )
        adam = AdamState.zeros(model.params)
        start_epoch = 1
        best_f1 = -1.0
        best_epoch = 0
        best_checkpoint = None

    dev_gold = [list(s.gold) for s in dev_data]
    logs: list[EpochLog] = []

    for epoch in range(start_epoch, config.max_epochs + 1):
        started = clock() if clock is not None else None
        order = _epoch_order(config.seed, epoch, len(samples))
        batch_losses: list[float] = []
        counter = 0
        for batch_no, offset in enumerate(range(0, len(order), config.batch_size)):
            batch = [samples[i] for i in order[offset : offset + config.batch_size]]
            if config.model_shape == "classify_head":
                scale = 1.0 / sum(len(s.gold_ids) for s in batch)
            else:
                scale = 1.0 / len(batch)
            accum: dict[str, np.ndarray] = {}
            batch_loss = 0.0
            for sample in batch:
                raw, grads = model.sentence_loss_and_grads(
                    sample.token_ids,
                    sample.gold_ids,
                    scale,
                    train_mode=True,
                    dropout_seed=_sentence_seed(config.seed, epoch, counter),
                    lattice=sample.lattice,
                )
                counter += 1
                batch_loss += raw * scale
                for name, grad in grads.items():
                    if name in accum:
                        accum[name] += grad
                    else:
                        accum[name] = grad
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    "training loss is not finite", epoch=epoch, batch=batch_no
                )
            try:
                adam_step(model.params, accum, adam, config)
            except TrainingDivergedError as err:
                raise TrainingDivergedError(str(err), epoch=epoch, batch=batch_no) from err
            model.apply_transition_pins()
            batch_losses.append(batch_loss)

        train_loss = float(np.mean(batch_losses))
        dev_pred = predict_dataset(model, dev_data, dev_emissions)
        report = entity_level_eval(dev_gold, dev_pred)
        seconds = (clock() - started) if started is not None else 0.0
        logs.append(
            EpochLog(
                epoch=epoch,
                train_loss=train_loss,
                dev_token_acc=report.acc,
                dev_entity_p=report.precision,
                dev_entity_r=report.recall,
                dev_entity_f1=report.f1,
                seconds=seconds,
            )
        )

        if report.f1 > best_f1:
            best_f1 = report.f1
            best_epoch = epoch
            best_checkpoint = _make_checkpoint(model, adam, config, epoch, best_f1, best_epoch)
        if epoch - best_epoch >= config.patience:
            break

    assert best_checkpoint is not None
    return best_checkpoint, logs


def sweep_batch_sizes(
    sizes: Sequence[int],
    config: TrainConfig,
    out_dir,
    train_data: Dataset,
    dev_data: Dataset,
    **train_kwargs,
) -> list[tuple[int, Path | Exception]]:
    """Run one training per batch size (identical seeds) and write one
    learning-curve CSV per size; per-size failures do not stop the sweep.

    Filenames embed the batch size (repeat sizes get a run suffix).
    """
    if not sizes:
        raise ValueError("no batch sizes given")
    if any(size < 1 for size in sizes):
        raise ValueError("batch sizes must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: list[tuple[int, Path | Exception]] = []
    seen: dict[int, int] = {}
    for size in sizes:
        run_config = TrainConfig(**{**asdict(config), "batch_size": size})
        try:
            _, logs = train(train_data, dev_data, run_config, **train_kwargs)
        except Exception as err:  # propagate per size without aborting
            results.append((size, err))
            continue
        seen[size] = seen.get(size, 0) + 1
        suffix = "" if seen[size] == 1 else f"_run{seen[size]}"
        path = out_dir / f"epochlog_bs{size}{suffix}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            write_epoch_log_csv(logs, handle)
        results.append((size, path))
    return results
