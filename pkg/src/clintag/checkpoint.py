"""Checkpoint container: a named-tensor file with config echo and checksum.

Layout: magic ``CTCP``, format version, header length, UTF-8 JSON header
(config echo, parameter count, seed, optimizer step, tensor directory),
then the tensor payload as 64-bit little-endian floats in directory
order, and a trailing SHA-256 over everything before it.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, ParameterStore, count_parameters

MAGIC = b"CTCP"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """The file is not a readable checkpoint."""


@dataclass
class Checkpoint:
    """Full training state: trainable tensors, Adam moments, and metadata."""

    model_shape: str
    constrain_bioes: bool
    params: ParameterStore
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int = 0
    seed: int = 0
    completed_epochs: int = 0
    best_dev_f1: float = 0.0
    best_epoch: int = 0
    encoder_config: EncoderConfig | None = None
    train_config: dict = field(default_factory=dict)
    vocabulary_tokens: list[str] | None = None

    def parameter_count(self) -> int:
        return count_parameters(self.params)

    def save(self, path) -> None:
        tensors: list[tuple[str, str, np.ndarray]] = []
        for name, value in self.params.items():
            tensors.append((name, "param", value))
        for name, value in self.adam_m.items():
            tensors.append((name, "adam_m", value))
        for name, value in self.adam_v.items():
            tensors.append((name, "adam_v", value))

        header = {
            "format_version": FORMAT_VERSION,
            "model_shape": self.model_shape,
            "constrain_bioes": self.constrain_bioes,
            "encoder_config": None
            if self.encoder_config is None
            else self.encoder_config.to_dict(),
            "train_config": self.train_config,
            "seed": self.seed,
            "step": self.step,
            "completed_epochs": self.completed_epochs,
            "best_dev_f1": self.best_dev_f1,
            "best_epoch": self.best_epoch,
            "parameter_count": self.parameter_count(),
            "vocabulary": self.vocabulary_tokens,
            "tensors": [
                {"name": name, "group": group, "shape": list(value.shape)}
                for name, group, value in tensors
            ],
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        digest = hashlib.sha256()
        with open(path, "wb") as handle:
            for chunk in (MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(header_bytes)), header_bytes):
                handle.write(chunk)
                digest.update(chunk)
            for _, _, value in tensors:
                raw = np.ascontiguousarray(value, dtype="<f8").tobytes()
                handle.write(raw)
                digest.update(raw)
            handle.write(digest.digest())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        blob = Path(path).read_bytes()
        if len(blob) < 48 or blob[:4] != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        stored_digest = blob[-32:]
        if hashlib.sha256(blob[:-32]).digest() != stored_digest:
            raise CheckpointError(f"{path}: checksum mismatch, file is corrupt")
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        (header_len,) = struct.unpack_from("<Q", blob, 8)
        header_start = 16
        header = json.loads(blob[header_start : header_start + header_len].decode("utf-8"))

        offset = header_start + header_len
        params = ParameterStore()
        adam_m: dict[str, np.ndarray] = {}
        adam_v: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            size = int(np.prod(shape)) if shape else 1
            raw = blob[offset : offset + size * 8]
            if len(raw) != size * 8:
                raise CheckpointError(f"{path}: truncated tensor {entry['name']!r}")
            value = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
            offset += size * 8
            group = entry["group"]
            if group == "param":
                params.add(entry["name"], value)
            elif group == "adam_m":
                adam_m[entry["name"]] = value
            elif group == "adam_v":
                adam_v[entry["name"]] = value
            else:
                raise CheckpointError(f"{path}: unknown tensor group {group!r}")

        encoder_config = (
            None
            if header["encoder_config"] is None
            else EncoderConfig(**header["encoder_config"])
        )
        checkpoint = cls(
            model_shape=header["model_shape"],
            constrain_bioes=header["constrain_bioes"],
            params=params,
            adam_m=adam_m,
            adam_v=adam_v,
            step=header["step"],
            seed=header["seed"],
            completed_epochs=header["completed_epochs"],
            best_dev_f1=header["best_dev_f1"],
            best_epoch=header["best_epoch"],
            encoder_config=encoder_config,
            train_config=header["train_config"],
            vocabulary_tokens=header["vocabulary"],
        )
        if checkpoint.parameter_count() != header["parameter_count"]:
            raise CheckpointError(f"{path}: parameter count disagrees with header")
        return checkpoint
