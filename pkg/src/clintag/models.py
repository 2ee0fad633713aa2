"""Tagger assembly: encoder + emission head + transition scores.

Three shapes are supported:

* ``classify_head`` — encoder with an independent per-token classifier.
* ``transformer_crf`` — encoder feeding a linear-chain CRF.
* ``frozen_emissions_crf`` — externally supplied per-token logits feeding
  a trainable CRF; the only trainable tensors are transition scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import encoder as enc
from .checkpoint import Checkpoint
from .corpus import Dataset, Vocabulary, window_dataset
from .decoders import (
    EmissionLattice,
    TransitionMatrix,
    check_emission_alignment,
    classify_decode,
    crf_nll,
    crf_viterbi,
    softmax_xent,
)
from .labels import LABELS, Label

MODEL_SHAPES = ("classify_head", "transformer_crf", "frozen_emissions_crf")

EMISSION_WEIGHT = "emission.weight"
EMISSION_BIAS = "emission.bias"
CRF_TRANS = "crf.transitions"
CRF_START = "crf.start"
CRF_END = "crf.end"


@dataclass
class TaggerModel:
    shape: str
    params: enc.ParameterStore
    encoder_config: enc.EncoderConfig | None = None
    vocabulary: Vocabulary | None = None
    constrain_bioes: bool = True

    def __post_init__(self) -> None:
        if self.shape not in MODEL_SHAPES:
            raise ValueError(f"unknown model shape {self.shape!r}")
        self._transitions: TransitionMatrix | None = None

    @property
    def has_encoder(self) -> bool:
        return self.shape in ("classify_head", "transformer_crf")

    @property
    def has_crf(self) -> bool:
        return self.shape in ("transformer_crf", "frozen_emissions_crf")

    @classmethod
    def build(
        cls,
        shape: str,
        encoder_config: enc.EncoderConfig | None = None,
        vocabulary: Vocabulary | None = None,
        constrain_bioes: bool = True,
        seed: int = 0,
    ) -> "TaggerModel":
        """Create a freshly initialized model of the requested shape."""
        if shape not in MODEL_SHAPES:
            raise ValueError(f"unknown model shape {shape!r}")
        size = len(LABELS)
        if shape == "frozen_emissions_crf":
            params = enc.ParameterStore()
        else:
            if encoder_config is None or vocabulary is None:
                raise ValueError(f"{shape} requires an encoder config and a vocabulary")
            if encoder_config.vocabulary_size != len(vocabulary):
                raise ValueError(
                    f"encoder vocabulary_size {encoder_config.vocabulary_size} "
                    f"!= vocabulary size {len(vocabulary)}"
                )
            params = enc.init_parameters(encoder_config)
            head_rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,)))
            )
            bound = math.sqrt(6.0 / (encoder_config.d_model + size))
            params.add(
                EMISSION_WEIGHT,
                head_rng.uniform(-bound, bound, size=(encoder_config.d_model, size)),
            )
            params.add(EMISSION_BIAS, np.zeros(size))
        if shape in ("transformer_crf", "frozen_emissions_crf"):
            params.add(CRF_TRANS, np.zeros((size, size)))
            params.add(CRF_START, np.zeros(size))
            params.add(CRF_END, np.zeros(size))
        model = cls(shape, params, encoder_config, vocabulary, constrain_bioes)
        model.apply_transition_pins()
        return model

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "TaggerModel":
        vocabulary = (
            None
            if checkpoint.vocabulary_tokens is None
            else Vocabulary.from_id_ordered_tokens(checkpoint.vocabulary_tokens)
        )
        return cls(
            checkpoint.model_shape,
            checkpoint.params,
            checkpoint.encoder_config,
            vocabulary,
            checkpoint.constrain_bioes,
        )

    def transition_matrix(self) -> TransitionMatrix:
        """View over the stored CRF tensors; updates stay visible."""
        if not self.has_crf:
            raise ValueError(f"{self.shape} has no transition matrix")
        if self._transitions is None:
            self._transitions = TransitionMatrix(
                self.params[CRF_TRANS],
                self.params[CRF_START],
                self.params[CRF_END],
                self.constrain_bioes,
            )
        return self._transitions

    def apply_transition_pins(self) -> None:
        if self.has_crf:
            self.transition_matrix().apply_pins()

    def parameter_count(self) -> int:
        return enc.count_parameters(self.params)

    def emission_lattice(
        self,
        token_ids: np.ndarray,
        train_mode: bool = False,
        dropout_seed: int = 0,
    ) -> tuple[np.ndarray, enc.SequenceRepresentation]:
        """Encoder output projected to per-token label scores."""
        if not self.has_encoder:
            raise ValueError(f"{self.shape} consumes externally supplied emissions")
        assert self.encoder_config is not None
        rep = enc.forward(
            token_ids, self.params, self.encoder_config, train_mode, dropout_seed
        )
        scores = rep.output @ self.params[EMISSION_WEIGHT] + self.params[EMISSION_BIAS]
        return scores, rep

    def sentence_loss_and_grads(
        self,
        token_ids: np.ndarray | None,
        gold_ids: np.ndarray,
        scale: float,
        train_mode: bool = True,
        dropout_seed: int = 0,
        lattice: np.ndarray | EmissionLattice | None = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """One sentence's raw loss and grads already multiplied by ``scale``.

        The raw loss is the token-summed cross-entropy for the
        classification head and the sentence NLL for CRF heads; the
        trainer divides by the batch token count or sentence count.
        """
        grads: dict[str, np.ndarray] = {}
        if self.shape == "frozen_emissions_crf":
            if lattice is None:
                raise ValueError("frozen_emissions_crf requires an emission lattice")
            scores = lattice.scores if isinstance(lattice, EmissionLattice) else lattice
            loss, _, tgrads = crf_nll(scores, self.transition_matrix(), gold_ids)
            grads[CRF_TRANS] = tgrads.trans * scale
            grads[CRF_START] = tgrads.start * scale
            grads[CRF_END] = tgrads.end * scale
            return loss, grads

        assert token_ids is not None and self.encoder_config is not None
        scores, rep = self.emission_lattice(token_ids, train_mode, dropout_seed)
        if self.shape == "classify_head":
            mean_loss, grad_tokens = softmax_xent(scores, gold_ids)
            raw_loss = mean_loss * len(gold_ids)
            grad_emissions = grad_tokens * (len(gold_ids) * scale)
        else:
            raw_loss, grad_emissions, tgrads = crf_nll(
                scores, self.transition_matrix(), gold_ids
            )
            grad_emissions = grad_emissions * scale
            grads[CRF_TRANS] = tgrads.trans * scale
            grads[CRF_START] = tgrads.start * scale
            grads[CRF_END] = tgrads.end * scale

        grads[EMISSION_WEIGHT] = rep.output.T @ grad_emissions
        grads[EMISSION_BIAS] = grad_emissions.sum(axis=0)
        grad_output = grad_emissions @ self.params[EMISSION_WEIGHT].T
        grads.update(enc.backward(rep, grad_output, self.params, self.encoder_config))
        return raw_loss, grads

    def decode_lattice(self, lattice: np.ndarray | EmissionLattice) -> np.ndarray:
        scores = lattice.scores if isinstance(lattice, EmissionLattice) else lattice
        if self.has_crf:
            return crf_viterbi(scores, self.transition_matrix()).label_ids
        return classify_decode(scores)

    def decode_tokens(self, token_ids: np.ndarray) -> np.ndarray:
        scores, _ = self.emission_lattice(token_ids)
        return self.decode_lattice(scores)


def predict_dataset(
    model: TaggerModel,
    dataset: Dataset,
    emissions: Sequence[EmissionLattice] | None = None,
) -> list[list[Label]]:
    """Decode every sentence; long sentences are windowed and reassembled."""
    if model.shape == "frozen_emissions_crf":
        if emissions is None:
            raise ValueError("frozen_emissions_crf prediction requires emissions")
        check_emission_alignment(emissions, [len(s) for s in dataset])
        return [
            LABELS.decode(model.decode_lattice(lattice)) for lattice in emissions
        ]

    assert model.encoder_config is not None and model.vocabulary is not None
    windowed = window_dataset(dataset, model.encoder_config.max_sequence)
    per_chunk = [
        model.decode_tokens(model.vocabulary.encode(chunk.tokens)).tolist()
        for chunk in windowed.chunks
    ]
    return [LABELS.decode(ids) for ids in windowed.reassemble(per_chunk)]
