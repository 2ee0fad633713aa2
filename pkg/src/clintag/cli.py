"""Command-line entry point: prepare, train, predict, evaluate, sweep.

Every command reads an optional ``key = value`` config file (``#`` starts
a comment), applies command-line overrides, and writes a resolved-config
echo file that replays the run exactly.  The CLINTAG_OUTPUT_ROOT
environment variable re-roots relative output directories.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from .checkpoint import Checkpoint
from .corpus import (
    build_vocabulary,
    label_distribution,
    read_conll_file,
    split_train_dev,
    write_conll_file,
    write_distribution_csv,
)
from .decoders import invalid_transition_count, load_emissions
from .encoder import EncoderConfig
from .evaluation import AlignmentError, evaluate_all, render_report
from .labels import LABELS
from .models import MODEL_SHAPES, TaggerModel, predict_dataset
from .training import (
    TrainConfig,
    sweep_batch_sizes,
    train,
    write_epoch_log_csv,
)

OUTPUT_ROOT_ENV = "CLINTAG_OUTPUT_ROOT"


class UsageError(ValueError):
    """Bad invocation: missing inputs or malformed option values."""


@dataclass
class RunConfig:
    """Flat key-value configuration shared by all commands."""

    command: str = ""
    # paths
    train: str = ""
    dev: str = ""
    test: str = ""
    input: str = ""
    gold: str = ""
    pred: str = ""
    emissions: str = ""
    dev_emissions: str = ""
    checkpoint: str = ""
    output_dir: str = "runs"
    output_name: str = "predictions.conll"
    # corpus preparation
    dev_fraction: float = 0.1
    min_frequency: int = 1
    # model shape and encoder size
    model_shape: str = "transformer_crf"
    d_model: int = 512
    heads: int = 8
    layers: int = 6
    d_ff: int = 2048
    max_sequence: int = 128
    token_embedding_dim: int = 600
    constrain_bioes: bool = True
    # optimization
    batch_size: int = 4
    learning_rate: float = 0.005
    max_epochs: int = 100
    patience: int = 20
    dropout: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    grad_clip_norm: float = 0.0  # 0 disables clipping
    seed: int = 0
    log_timing: bool = True
    # evaluation and sweep
    report_epoch: int = 0  # 0 means unlabeled reports
    batch_sizes: str = "1,4,10"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind in ("bool", bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise UsageError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError as err:
        raise UsageError(f"config key {key!r}: {err}") from err
    return raw


def parse_config_file(path) -> dict:
    """Parse ``key = value`` lines; unknown keys are rejected."""
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, raw = stripped.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, raw.strip())
    return values


def resolve_config(namespace: argparse.Namespace) -> RunConfig:
    """Defaults, then config file values, then command-line overrides."""
    overrides = {
        key: value
        for key, value in vars(namespace).items()
        if key in _FIELD_TYPES and value is not None
    }
    merged: dict = {}
    config_path = getattr(namespace, "config", None)
    if config_path:
        merged.update(parse_config_file(config_path))
    merged.update(overrides)
    merged["command"] = namespace.command
    config = RunConfig(**merged)
    if config.model_shape not in MODEL_SHAPES:
        raise UsageError(
            f"unknown model shape {config.model_shape!r}; pick one of {MODEL_SHAPES}"
        )
    return config


def output_dir_for(config: RunConfig) -> Path:
    path = Path(config.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_config_echo(config: RunConfig, out_dir: Path) -> Path:
    path = out_dir / "resolved_config.txt"
    lines = []
    for field in fields(RunConfig):
        value = getattr(config, field.name)
        rendered = str(value).lower() if isinstance(value, bool) else value
        lines.append(f"{field.name} = {rendered}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _require(config: RunConfig, *keys: str) -> None:
    for key in keys:
        if not getattr(config, key):
            raise UsageError(f"{config.command}: --{key.replace('_', '-')} is required")


def _encoder_config(config: RunConfig, vocabulary_size: int) -> EncoderConfig:
    return EncoderConfig(
        vocabulary_size=vocabulary_size,
        d_model=config.d_model,
        heads=config.heads,
        layers=config.layers,
        d_ff=config.d_ff,
        max_sequence=config.max_sequence,
        dropout=config.dropout,
        token_embedding_dim=config.token_embedding_dim,
        seed=config.seed,
    )


def _train_config(config: RunConfig, batch_size: int | None = None) -> TrainConfig:
    return TrainConfig(
        model_shape=config.model_shape,
        batch_size=batch_size if batch_size is not None else config.batch_size,
        learning_rate=config.learning_rate,
        max_epochs=config.max_epochs,
        patience=config.patience,
        dropout=config.dropout,
        adam_beta1=config.adam_beta1,
        adam_beta2=config.adam_beta2,
        adam_epsilon=config.adam_epsilon,
        grad_clip_norm=config.grad_clip_norm or None,
        seed=config.seed,
    )


def cmd_prepare(config: RunConfig) -> int:
    _require(config, "input")
    out_dir = output_dir_for(config)
    dataset = read_conll_file(config.input, "full")
    train_split, dev_split = split_train_dev(dataset, config.dev_fraction, config.seed)
    write_conll_file(train_split, out_dir / "train.conll")
    write_conll_file(dev_split, out_dir / "dev.conll")
    splits = [train_split, dev_split]
    if config.test:
        test_split = read_conll_file(config.test, "test")
        write_conll_file(test_split, out_dir / "test.conll")
        splits.append(test_split)
    with open(out_dir / "label_distribution.csv", "w", encoding="utf-8", newline="\n") as handle:
        write_distribution_csv(label_distribution(splits), handle)
    write_config_echo(config, out_dir)
    print(
        f"prepared {len(train_split)} train / {len(dev_split)} dev sentences"
        + (f" / {len(splits[2])} test" if config.test else "")
    )
    return 0


def _load_training_inputs(config: RunConfig):
    _require(config, "train", "dev")
    train_data = read_conll_file(config.train, "train")
    dev_data = read_conll_file(config.dev, "dev")
    frozen = config.model_shape == "frozen_emissions_crf"
    kwargs: dict = {"constrain_bioes": config.constrain_bioes}
    if frozen:
        if not config.emissions or not config.dev_emissions:
            raise UsageError(
                "frozen_emissions_crf requires --emissions and --dev-emissions"
            )
        with open(config.emissions, encoding="utf-8") as handle:
            kwargs["train_emissions"] = load_emissions(handle, LABELS)
        with open(config.dev_emissions, encoding="utf-8") as handle:
            kwargs["dev_emissions"] = load_emissions(handle, LABELS)
    else:
        vocabulary = build_vocabulary(train_data, config.min_frequency)
        kwargs["vocabulary"] = vocabulary
        kwargs["encoder_config"] = _encoder_config(config, len(vocabulary))
    kwargs["clock"] = time.perf_counter if config.log_timing else None
    return train_data, dev_data, kwargs


def _write_training_artifacts(out_dir: Path, checkpoint: Checkpoint, logs) -> None:
    checkpoint.save(out_dir / "model.ckpt")
    with open(out_dir / "epochlog.csv", "w", encoding="utf-8", newline="\n") as handle:
        write_epoch_log_csv(logs, handle)
    with open(out_dir / "f1_curve.csv", "w", encoding="utf-8", newline="\n") as handle:
        handle.write("epoch,dev_entity_f1\n")
        for log in logs:
            handle.write(f"{log.epoch},{log.dev_entity_f1!r}\n")
    summary = [
        f"model shape: {checkpoint.model_shape}",
        f"trainable parameters: {checkpoint.parameter_count()}",
        f"best dev entity F1: {100.0 * checkpoint.best_dev_f1:.2f}% (epoch {checkpoint.best_epoch})",
        f"epochs run: {len(logs)}",
    ]
    (out_dir / "model_summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")


def cmd_train(config: RunConfig) -> int:
    train_data, dev_data, kwargs = _load_training_inputs(config)
    out_dir = output_dir_for(config)
    checkpoint, logs = train(train_data, dev_data, _train_config(config), **kwargs)
    _write_training_artifacts(out_dir, checkpoint, logs)
    write_config_echo(config, out_dir)
    print(
        f"trained {config.model_shape}: {checkpoint.parameter_count()} parameters, "
        f"best dev F1 {100.0 * checkpoint.best_dev_f1:.2f}% at epoch {checkpoint.best_epoch}"
    )
    return 0


def cmd_predict(config: RunConfig) -> int:
    _require(config, "checkpoint", "input")
    out_dir = output_dir_for(config)
    checkpoint = Checkpoint.load(config.checkpoint)
    model = TaggerModel.from_checkpoint(checkpoint)
    dataset = read_conll_file(config.input, "input")
    emissions = None
    if model.shape == "frozen_emissions_crf":
        if not config.emissions:
            raise UsageError("frozen_emissions_crf prediction requires --emissions")
        with open(config.emissions, encoding="utf-8") as handle:
            emissions = load_emissions(handle, LABELS)
    predictions = predict_dataset(model, dataset, emissions)
    out_path = out_dir / config.output_name
    blocks = []
    for sentence, labels in zip(dataset, predictions):
        blocks.append(
            "\n".join(f"{token} {label}" for token, label in zip(sentence.tokens, labels))
        )
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        if blocks:
            handle.write("\n\n".join(blocks) + "\n")
    write_config_echo(config, out_dir)
    print(f"wrote {len(predictions)} predicted sentences to {out_path}")
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    _require(config, "gold", "pred")
    out_dir = output_dir_for(config)
    gold_data = read_conll_file(config.gold, "gold")
    pred_data = read_conll_file(config.pred, "pred")
    if len(gold_data) != len(pred_data):
        raise AlignmentError(
            f"{len(gold_data)} gold sentences vs {len(pred_data)} predicted"
        )
    for index, (g, p) in enumerate(zip(gold_data, pred_data)):
        if g.tokens != p.tokens:
            raise AlignmentError(f"sentence {index}: token mismatch between files")
    bundle = evaluate_all(
        [list(s.gold) for s in gold_data], [list(s.gold) for s in pred_data]
    )
    invalid = sum(
        invalid_transition_count(LABELS.encode(s.gold)) for s in pred_data
    )
    pairs = sum(max(len(s) - 1, 0) for s in pred_data)
    prefix = f"epoch_{config.report_epoch:04d}_" if config.report_epoch else ""
    paths = render_report(bundle, out_dir, prefix)
    write_config_echo(config, out_dir)
    print(
        f"entity F1 {100.0 * bundle.entity.f1:.2f}% "
        f"(Acc {100.0 * bundle.entity.acc:.2f}%, Corr {bundle.entity.corr}); "
        f"invalid transitions {invalid}/{pairs}; "
        f"wrote {len(paths)} artifacts to {out_dir}"
    )
    return 0


def cmd_sweep(config: RunConfig) -> int:
    try:
        sizes = [int(s) for s in config.batch_sizes.replace(" ", "").split(",") if s]
    except ValueError as err:
        raise UsageError(f"--batch-sizes: {err}") from err
    if not sizes or any(size < 1 for size in sizes):
        raise UsageError("--batch-sizes must be a comma list of integers >= 1")
    train_data, dev_data, kwargs = _load_training_inputs(config)
    out_dir = output_dir_for(config)
    results = sweep_batch_sizes(
        sizes, _train_config(config), out_dir, train_data, dev_data, **kwargs
    )
    write_config_echo(config, out_dir)
    failures = 0
    for size, outcome in results:
        if isinstance(outcome, Exception):
            failures += 1
            print(f"batch size {size}: FAILED ({outcome})", file=sys.stderr)
        else:
            print(f"batch size {size}: wrote {outcome}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clintag",
        description="Clinical sequence tagging: corpus prep, training, decoding, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--output-dir", dest="output_dir", help="artifact directory")
        p.add_argument("--seed", type=int, help="run seed")

    def add_model_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--train", help="training corpus (two-column)")
        p.add_argument("--dev", help="development corpus")
        p.add_argument("--model-shape", dest="model_shape", choices=MODEL_SHAPES)
        p.add_argument("--emissions", help="emission lattice file (frozen shape)")
        p.add_argument("--dev-emissions", dest="dev_emissions")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--dropout", type=float)
        p.add_argument("--grad-clip-norm", dest="grad_clip_norm", type=float)
        p.add_argument("--d-model", dest="d_model", type=int)
        p.add_argument("--heads", type=int)
        p.add_argument("--layers", type=int)
        p.add_argument("--d-ff", dest="d_ff", type=int)
        p.add_argument("--max-sequence", dest="max_sequence", type=int)
        p.add_argument("--token-embedding-dim", dest="token_embedding_dim", type=int)
        p.add_argument("--min-frequency", dest="min_frequency", type=int)
        p.add_argument(
            "--constrain-bioes", dest="constrain_bioes",
            type=lambda raw: _convert("constrain_bioes", raw), metavar="BOOL",
        )
        p.add_argument(
            "--log-timing", dest="log_timing",
            type=lambda raw: _convert("log_timing", raw), metavar="BOOL",
        )

    p_prepare = sub.add_parser("prepare", help="validate, split, and canonicalize corpora")
    add_common(p_prepare)
    p_prepare.add_argument("--input", help="full training corpus to split")
    p_prepare.add_argument("--test", help="held-out test corpus (reported only)")
    p_prepare.add_argument("--dev-fraction", dest="dev_fraction", type=float)

    p_train = sub.add_parser("train", help="train a tagger, write checkpoint and curves")
    add_common(p_train)
    add_model_flags(p_train)

    p_predict = sub.add_parser("predict", help="decode a corpus with a checkpoint")
    add_common(p_predict)
    p_predict.add_argument("--checkpoint", help="checkpoint file")
    p_predict.add_argument("--input", help="corpus to decode")
    p_predict.add_argument("--output-name", dest="output_name", help="prediction filename")
    p_predict.add_argument("--emissions", help="emission lattice file (frozen shape)")

    p_eval = sub.add_parser("evaluate", help="full report bundle from gold and predictions")
    add_common(p_eval)
    p_eval.add_argument("--gold", help="gold corpus file")
    p_eval.add_argument("--pred", help="prediction file")
    p_eval.add_argument("--report-epoch", dest="report_epoch", type=int)

    p_sweep = sub.add_parser("sweep", help="train once per batch size, emit curves")
    add_common(p_sweep)
    add_model_flags(p_sweep)
    p_sweep.add_argument("--batch-sizes", dest="batch_sizes", help="e.g. 1,4,10")
    return parser


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    try:
        config = resolve_config(namespace)
        return _COMMANDS[namespace.command](config)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # surfaced with a clean message, nonzero exit
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
