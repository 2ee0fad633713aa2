"""From-scratch Transformer encoder with exact reverse-mode gradients.

Everything is plain float64 numpy: embedding lookup, a linear projection
from the embedding width to the model width, sinusoidal positions, and a
stack of post-layer-norm blocks (multi-head self-attention and a ReLU
feed-forward, each with residual connections).  The forward pass caches
every intermediate needed by :func:`backward`, which produces gradients
that match central finite differences.

Dropout is realized through masks drawn from a per-call seeded generator,
so training runs replay bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LAYER_NORM_EPS = 1e-6


class StaleCacheError(RuntimeError):
    """The cached activations predate a parameter update."""


@dataclass(frozen=True)
class EncoderConfig:
    vocabulary_size: int
    d_model: int = 512
    heads: int = 8
    layers: int = 6
    d_ff: int = 2048
    max_sequence: int = 128
    dropout: float = 0.1
    token_embedding_dim: int = 600
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocabulary_size < 2:
            raise ValueError("vocabulary must contain at least padding and unknown")
        if self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even for sinusoidal positions")
        if self.max_sequence < 1:
            raise ValueError("max_sequence must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    def to_dict(self) -> dict:
        return {
            "vocabulary_size": self.vocabulary_size,
            "d_model": self.d_model,
            "heads": self.heads,
            "layers": self.layers,
            "d_ff": self.d_ff,
            "max_sequence": self.max_sequence,
            "dropout": self.dropout,
            "token_embedding_dim": self.token_embedding_dim,
            "seed": self.seed,
        }


class ParameterStore:
    """Ordered named float64 tensors; the single repository of trainables.

    ``version`` increments on every optimizer update so cached forward
    activations can detect staleness.
    """

    def __init__(self) -> None:
        self._tensors: dict[str, np.ndarray] = {}
        self.version = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._tensors:
            raise ValueError(f"duplicate tensor {name!r}")
        self._tensors[name] = np.ascontiguousarray(value, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self._tensors:
            raise KeyError(name)
        self._tensors[name][...] = value

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def bump_version(self) -> None:
        self.version += 1

    def copy(self) -> "ParameterStore":
        clone = ParameterStore()
        for name, value in self._tensors.items():
            clone.add(name, value.copy())
        clone.version = self.version
        return clone

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(value) for name, value in self._tensors.items()}


def count_parameters(params: ParameterStore) -> int:
    """Total number of trainable scalars across all tensors."""
    return sum(value.size for _, value in params.items())


def encoder_parameter_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Tensor names and shapes of the encoder, in creation order."""
    d, f = config.d_model, config.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "embedding": (config.vocabulary_size, config.token_embedding_dim),
        "input_projection": (config.token_embedding_dim, d),
    }
    for i in range(config.layers):
        prefix = f"layer{i}."
        shapes[prefix + "attention.query"] = (d, d)
        shapes[prefix + "attention.key"] = (d, d)
        shapes[prefix + "attention.value"] = (d, d)
        shapes[prefix + "attention.output"] = (d, d)
        shapes[prefix + "ffn.weight1"] = (d, f)
        shapes[prefix + "ffn.bias1"] = (f,)
        shapes[prefix + "ffn.weight2"] = (f, d)
        shapes[prefix + "ffn.bias2"] = (d,)
        shapes[prefix + "norm1.gain"] = (d,)
        shapes[prefix + "norm1.bias"] = (d,)
        shapes[prefix + "norm2.gain"] = (d,)
        shapes[prefix + "norm2.bias"] = (d,)
    return shapes


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    bound = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-bound, bound, size=shape)


def init_parameters(config: EncoderConfig) -> ParameterStore:
    """Seed-deterministic initialization: scaled-uniform weights, zero
    biases, unit layer-norm gains."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    params = ParameterStore()
    for name, shape in encoder_parameter_shapes(config).items():
        if len(shape) == 2:
            params.add(name, _glorot(rng, shape))
        elif name.endswith(".gain"):
            params.add(name, np.ones(shape))
        else:
            params.add(name, np.zeros(shape))
    return params


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal position matrix: (pos, 2i) -> sin, (pos, 2i+1) -> cos of
    pos / 10000^(2i/dim)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if dim % 2 != 0:
        raise ValueError("dimension must be even")
    positions = np.arange(length, dtype=np.float64)[:, None]
    angles = positions / np.power(10000.0, 2.0 * np.arange(dim // 2) / dim)[None, :]
    encoding = np.empty((length, dim))
    encoding[:, 0::2] = np.sin(angles)
    encoding[:, 1::2] = np.cos(angles)
    return encoding


def _layer_norm_forward(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = x.mean(axis=1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    normalized = (x - mean) * inv_std
    return gain * normalized + bias, normalized, inv_std


def _layer_norm_backward(
    grad_out: np.ndarray, normalized: np.ndarray, inv_std: np.ndarray, gain: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grad_gain = (grad_out * normalized).sum(axis=0)
    grad_bias = grad_out.sum(axis=0)
    grad_norm = grad_out * gain
    grad_x = inv_std * (
        grad_norm
        - grad_norm.mean(axis=1, keepdims=True)
        - normalized * (grad_norm * normalized).mean(axis=1, keepdims=True)
    )
    return grad_x, grad_gain, grad_bias


@dataclass
class LayerCache:
    attn_input: np.ndarray
    q_heads: np.ndarray
    k_heads: np.ndarray
    v_heads: np.ndarray
    attn_probs: np.ndarray
    context: np.ndarray
    attn_dropmask: np.ndarray | None
    norm1_in: np.ndarray
    norm1_normalized: np.ndarray
    norm1_inv_std: np.ndarray
    norm1_out: np.ndarray
    ffn_pre: np.ndarray
    ffn_hidden: np.ndarray
    ffn_dropmask: np.ndarray | None
    norm2_normalized: np.ndarray
    norm2_inv_std: np.ndarray


@dataclass
class SequenceRepresentation:
    """Encoder output plus the cached activations for the backward pass."""

    output: np.ndarray
    token_ids: np.ndarray
    key_mask: np.ndarray | None
    embedded: np.ndarray
    projected: np.ndarray
    layer_caches: list[LayerCache] = field(default_factory=list)
    param_version: int = 0


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    length, dim = x.shape
    return x.reshape(length, heads, dim // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    heads, length, head_dim = x.shape
    return x.transpose(1, 0, 2).reshape(length, heads * head_dim)


def forward(
    token_ids: np.ndarray,
    params: ParameterStore,
    config: EncoderConfig,
    train_mode: bool = False,
    dropout_seed: int = 0,
    key_mask: np.ndarray | None = None,
) -> SequenceRepresentation:
    """Run the encoder over one token-id sequence.

    ``key_mask`` marks real positions (True); padded keys are removed
    from every attention distribution.  In train mode dropout masks are
    drawn from a generator seeded with ``dropout_seed``.
    """
    token_ids = np.asarray(token_ids, dtype=np.int64)
    length = token_ids.shape[0]
    if length < 1:
        raise ValueError("cannot encode an empty sequence")
    if length > config.max_sequence:
        raise ValueError(
            f"sequence of {length} tokens exceeds max_sequence {config.max_sequence}; "
            "window the sentence first"
        )
    if token_ids.min() < 0 or token_ids.max() >= config.vocabulary_size:
        raise ValueError("token id out of vocabulary range")

    drop_rng = (
        np.random.Generator(np.random.PCG64(dropout_seed))
        if train_mode and config.dropout > 0.0
        else None
    )
    keep = 1.0 - config.dropout

    embedded = params["embedding"][token_ids]
    projected = embedded @ params["input_projection"]
    x = projected + positional_encoding(length, config.d_model)

    rep = SequenceRepresentation(
        output=x,
        token_ids=token_ids,
        key_mask=None if key_mask is None else np.asarray(key_mask, dtype=bool),
        embedded=embedded,
        projected=projected,
        param_version=params.version,
    )

    scale = 1.0 / math.sqrt(config.head_dim)
    for i in range(config.layers):
        prefix = f"layer{i}."
        attn_input = x
        q = _split_heads(attn_input @ params[prefix + "attention.query"], config.heads)
        k = _split_heads(attn_input @ params[prefix + "attention.key"], config.heads)
        v = _split_heads(attn_input @ params[prefix + "attention.value"], config.heads)
        scores = (q @ k.transpose(0, 2, 1)) * scale
        if rep.key_mask is not None:
            scores = np.where(rep.key_mask[None, None, :], scores, -np.inf)
        scores -= scores.max(axis=2, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=2, keepdims=True)
        context = _merge_heads(probs @ v)
        attn_out = context @ params[prefix + "attention.output"]

        attn_mask = None
        if drop_rng is not None:
            attn_mask = (drop_rng.random(attn_out.shape) >= config.dropout) / keep
            attn_out = attn_out * attn_mask
        norm1_in = attn_input + attn_out
        norm1_out, norm1_normalized, norm1_inv = _layer_norm_forward(
            norm1_in, params[prefix + "norm1.gain"], params[prefix + "norm1.bias"]
        )

        ffn_pre = norm1_out @ params[prefix + "ffn.weight1"] + params[prefix + "ffn.bias1"]
        ffn_hidden = np.maximum(ffn_pre, 0.0)
        ffn_out = ffn_hidden @ params[prefix + "ffn.weight2"] + params[prefix + "ffn.bias2"]

        ffn_mask = None
        if drop_rng is not None:
            ffn_mask = (drop_rng.random(ffn_out.shape) >= config.dropout) / keep
            ffn_out = ffn_out * ffn_mask
        norm2_in = norm1_out + ffn_out
        x, norm2_normalized, norm2_inv = _layer_norm_forward(
            norm2_in, params[prefix + "norm2.gain"], params[prefix + "norm2.bias"]
        )

        rep.layer_caches.append(
            LayerCache(
                attn_input=attn_input,
                q_heads=q,
                k_heads=k,
                v_heads=v,
                attn_probs=probs,
                context=context,
                attn_dropmask=attn_mask,
                norm1_in=norm1_in,
                norm1_normalized=norm1_normalized,
                norm1_inv_std=norm1_inv,
                norm1_out=norm1_out,
                ffn_pre=ffn_pre,
                ffn_hidden=ffn_hidden,
                ffn_dropmask=ffn_mask,
                norm2_normalized=norm2_normalized,
                norm2_inv_std=norm2_inv,
            )
        )

    rep.output = x
    return rep


def backward(
    rep: SequenceRepresentation,
    grad_output: np.ndarray,
    params: ParameterStore,
    config: EncoderConfig,
) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for every encoder tensor.

    ``rep`` must come from :func:`forward` against the current parameter
    version; a stale cache raises StaleCacheError.
    """
    if rep.param_version != params.version:
        raise StaleCacheError(
            "activations were computed against an older parameter version"
        )
    if len(rep.layer_caches) != config.layers:
        raise StaleCacheError("cache does not match the configured layer count")

    grads = {name: np.zeros_like(value) for name, value in params.items() if name in _encoder_names(config)}
    scale = 1.0 / math.sqrt(config.head_dim)
    grad_x = np.asarray(grad_output, dtype=np.float64)

    for i in range(config.layers - 1, -1, -1):
        prefix = f"layer{i}."
        cache = rep.layer_caches[i]

        grad_norm2_in, grad_g2, grad_b2 = _layer_norm_backward(
            grad_x, cache.norm2_normalized, cache.norm2_inv_std, params[prefix + "norm2.gain"]
        )
        grads[prefix + "norm2.gain"] += grad_g2
        grads[prefix + "norm2.bias"] += grad_b2

        grad_ffn_out = grad_norm2_in
        if cache.ffn_dropmask is not None:
            grad_ffn_out = grad_ffn_out * cache.ffn_dropmask
        grads[prefix + "ffn.weight2"] += cache.ffn_hidden.T @ grad_ffn_out
        grads[prefix + "ffn.bias2"] += grad_ffn_out.sum(axis=0)
        grad_hidden = grad_ffn_out @ params[prefix + "ffn.weight2"].T
        grad_pre = grad_hidden * (cache.ffn_pre > 0.0)
        grads[prefix + "ffn.weight1"] += cache.norm1_out.T @ grad_pre
        grads[prefix + "ffn.bias1"] += grad_pre.sum(axis=0)
        grad_norm1_out = grad_norm2_in + grad_pre @ params[prefix + "ffn.weight1"].T

        grad_norm1_in, grad_g1, grad_b1 = _layer_norm_backward(
            grad_norm1_out, cache.norm1_normalized, cache.norm1_inv_std, params[prefix + "norm1.gain"]
        )
        grads[prefix + "norm1.gain"] += grad_g1
        grads[prefix + "norm1.bias"] += grad_b1

        grad_attn_out = grad_norm1_in
        if cache.attn_dropmask is not None:
            grad_attn_out = grad_attn_out * cache.attn_dropmask
        grads[prefix + "attention.output"] += cache.context.T @ grad_attn_out
        grad_context = _split_heads(
            grad_attn_out @ params[prefix + "attention.output"].T, config.heads
        )

        grad_probs = grad_context @ cache.v_heads.transpose(0, 2, 1)
        grad_v = cache.attn_probs.transpose(0, 2, 1) @ grad_context
        inner = (grad_probs * cache.attn_probs).sum(axis=2, keepdims=True)
        grad_scores = cache.attn_probs * (grad_probs - inner)
        grad_q = (grad_scores @ cache.k_heads) * scale
        grad_k = (grad_scores.transpose(0, 2, 1) @ cache.q_heads) * scale

        merged_q = _merge_heads(grad_q)
        merged_k = _merge_heads(grad_k)
        merged_v = _merge_heads(grad_v)
        grads[prefix + "attention.query"] += cache.attn_input.T @ merged_q
        grads[prefix + "attention.key"] += cache.attn_input.T @ merged_k
        grads[prefix + "attention.value"] += cache.attn_input.T @ merged_v

        grad_x = (
            grad_norm1_in
            + merged_q @ params[prefix + "attention.query"].T
            + merged_k @ params[prefix + "attention.key"].T
            + merged_v @ params[prefix + "attention.value"].T
        )

    # Positional encoding is an additive constant: the gradient passes through.
    grads["input_projection"] += rep.embedded.T @ grad_x
    grad_embedded = grad_x @ params["input_projection"].T
    np.add.at(grads["embedding"], rep.token_ids, grad_embedded)
    return grads


def _encoder_names(config: EncoderConfig) -> set[str]:
    return set(encoder_parameter_shapes(config))
