import numpy as np
import pytest

from clintag.encoder import (
    EncoderConfig,
    StaleCacheError,
    backward,
    count_parameters,
    encoder_parameter_shapes,
    forward,
    init_parameters,
    positional_encoding,
)
from oracles import finite_difference, max_relative_error

TINY = EncoderConfig(
    vocabulary_size=11,
    d_model=8,
    heads=2,
    layers=1,
    d_ff=16,
    max_sequence=16,
    dropout=0.1,
    token_embedding_dim=12,
    seed=3,
)


def tiny_setup(seed=3):
    config = EncoderConfig(**{**TINY.to_dict(), "seed": seed})
    return config, init_parameters(config)


class TestConfig:
    def test_head_divisibility_enforced(self):
        with pytest.raises(ValueError):
            EncoderConfig(vocabulary_size=10, d_model=10, heads=4)

    def test_dropout_range(self):
        with pytest.raises(ValueError):
            EncoderConfig(vocabulary_size=10, dropout=1.0)

    def test_defaults_match_reference_setting(self):
        config = EncoderConfig(vocabulary_size=100)
        assert (config.d_model, config.heads, config.layers) == (512, 8, 6)
        assert (config.d_ff, config.max_sequence) == (2048, 128)
        assert (config.dropout, config.token_embedding_dim) == (0.1, 600)


class TestInit:
    def test_deterministic_for_fixed_seed(self):
        _, a = tiny_setup()
        _, b = tiny_setup()
        assert a.names() == b.names()
        for name in a.names():
            assert np.array_equal(a[name], b[name])

    def test_seed_changes_weights(self):
        _, a = tiny_setup(seed=1)
        _, b = tiny_setup(seed=2)
        assert not np.array_equal(a["embedding"], b["embedding"])

    def test_layer_norm_gains_are_exactly_one(self):
        _, params = tiny_setup()
        assert np.all(params["layer0.norm1.gain"] == 1.0)
        assert np.all(params["layer0.norm2.gain"] == 1.0)
        assert np.all(params["layer0.norm1.bias"] == 0.0)

    def test_biases_zero_and_weights_within_glorot_bound(self):
        _, params = tiny_setup()
        assert np.all(params["layer0.ffn.bias1"] == 0.0)
        bound = np.sqrt(6.0 / (8 + 16))
        w = params["layer0.ffn.weight1"]
        assert np.all(np.abs(w) <= bound) and np.any(w != 0.0)

    def test_parameter_count_matches_hand_formula(self):
        config = EncoderConfig(
            vocabulary_size=10, d_model=4, heads=2, layers=1, d_ff=8,
            token_embedding_dim=6,
        )
        params = init_parameters(config)
        # By hand: 10*6 + 6*4 + 4*(4*4) + (4*8 + 8 + 8*4 + 4) + 4*4 = 240
        assert count_parameters(params) == 240

    def test_parameter_count_matches_shape_table(self):
        for seed in range(5):
            rng = np.random.Generator(np.random.PCG64(seed))
            config = EncoderConfig(
                vocabulary_size=int(rng.integers(3, 40)),
                d_model=int(rng.integers(1, 5)) * 2,
                heads=2,
                layers=int(rng.integers(1, 4)),
                d_ff=int(rng.integers(2, 12)),
                token_embedding_dim=int(rng.integers(2, 12)),
            )
            params = init_parameters(config)
            expected = sum(
                int(np.prod(shape)) for shape in encoder_parameter_shapes(config).values()
            )
            assert count_parameters(params) == expected


class TestPositionalEncoding:
    def test_position_zero_row(self):
        enc = positional_encoding(3, 6)
        assert np.array_equal(enc[0], np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]))

    def test_position_one_first_entry_is_sin_one(self):
        enc = positional_encoding(2, 4)
        assert enc[1, 0] == pytest.approx(0.8414709848078965, abs=1e-12)
        assert enc[1, 1] == pytest.approx(np.cos(1.0), abs=1e-12)

    def test_all_entries_within_unit_interval(self):
        enc = positional_encoding(50, 16)
        assert np.all(enc >= -1.0) and np.all(enc <= 1.0)

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            positional_encoding(4, 5)

    def test_frequency_progression(self):
        enc = positional_encoding(5, 4)
        assert enc[3, 2] == pytest.approx(np.sin(3.0 / 10000.0 ** 0.5), abs=1e-12)


class TestForward:
    def test_eval_mode_is_deterministic(self):
        config, params = tiny_setup()
        ids = np.array([1, 4, 2])
        a = forward(ids, params, config).output
        b = forward(ids, params, config).output
        assert np.array_equal(a, b)

    def test_output_shape_for_all_lengths(self):
        config, params = tiny_setup()
        for length in range(1, config.max_sequence + 1):
            ids = np.arange(length) % config.vocabulary_size
            assert forward(ids, params, config).output.shape == (length, 8)

    def test_single_token_finite(self):
        config, params = tiny_setup()
        rep = forward(np.array([5]), params, config)
        assert np.all(np.isfinite(rep.output))
        assert rep.layer_caches[0].attn_probs.shape == (2, 1, 1)
        assert np.allclose(rep.layer_caches[0].attn_probs, 1.0)

    def test_outputs_finite_on_random_inputs(self, rng):
        config, params = tiny_setup()
        for _ in range(10):
            ids = rng.integers(0, config.vocabulary_size, size=int(rng.integers(1, 16)))
            assert np.all(np.isfinite(forward(ids, params, config).output))

    def test_over_length_input_rejected(self):
        config, params = tiny_setup()
        with pytest.raises(ValueError, match="window"):
            forward(np.zeros(17, dtype=np.int64), params, config)

    def test_out_of_vocabulary_id_rejected(self):
        config, params = tiny_setup()
        with pytest.raises(ValueError):
            forward(np.array([11]), params, config)

    def test_attention_rows_are_distributions(self):
        config, params = tiny_setup()
        rep = forward(np.array([1, 2, 3, 4]), params, config)
        for cache in rep.layer_caches:
            sums = cache.attn_probs.sum(axis=2)
            assert np.abs(sums - 1.0).max() < 1e-9
            assert cache.attn_probs.min() >= 0.0

    def test_layer_norm_rows_standardized_before_gain(self):
        config, params = tiny_setup()
        rep = forward(np.array([1, 2, 3]), params, config)
        normalized = rep.layer_caches[0].norm1_normalized
        assert np.abs(normalized.mean(axis=1)).max() < 1e-6
        assert np.abs(normalized.var(axis=1) - 1.0).max() < 1e-4

    def test_zero_weights_output_is_normalized_positions(self):
        config, params = tiny_setup()
        for name in params.names():
            if name.endswith(".gain"):
                continue
            params[name] = np.zeros_like(params[name])

        def norm_rows(x):
            mean = x.mean(axis=1, keepdims=True)
            var = ((x - mean) ** 2).mean(axis=1, keepdims=True)
            return (x - mean) / np.sqrt(var + 1e-6)

        expected = norm_rows(norm_rows(positional_encoding(4, config.d_model)))
        got = forward(np.array([1, 2, 3, 4]), params, config).output
        assert np.abs(got - expected).max() < 1e-12

    def test_padding_mask_leaves_real_prefix_unchanged(self):
        config, params = tiny_setup()
        ids = np.array([3, 7, 2])
        plain = forward(ids, params, config).output
        padded_ids = np.array([3, 7, 2, 0, 0])
        mask = np.array([True, True, True, False, False])
        padded = forward(padded_ids, params, config, key_mask=mask).output
        assert np.abs(padded[:3] - plain).max() < 1e-12

    def test_masked_attention_rows_are_distributions_over_real_keys(self):
        config, params = tiny_setup()
        ids = np.array([3, 7, 2, 0, 0])
        mask = np.array([True, True, True, False, False])
        rep = forward(ids, params, config, key_mask=mask)
        for cache in rep.layer_caches:
            assert np.abs(cache.attn_probs.sum(axis=2) - 1.0).max() < 1e-9
            assert np.abs(cache.attn_probs[:, :, ~mask]).max() == 0.0

    def test_dropout_replays_with_same_seed(self):
        config, params = tiny_setup()
        ids = np.array([1, 2, 3])
        a = forward(ids, params, config, train_mode=True, dropout_seed=9).output
        b = forward(ids, params, config, train_mode=True, dropout_seed=9).output
        c = forward(ids, params, config, train_mode=True, dropout_seed=10).output
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestBackward:
    def test_zero_grad_output_gives_zero_grads(self):
        config, params = tiny_setup()
        rep = forward(np.array([1, 2]), params, config)
        grads = backward(rep, np.zeros_like(rep.output), params, config)
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_backward_is_linear_in_grad_output(self, rng):
        config, params = tiny_setup()
        rep = forward(np.array([1, 2, 3]), params, config)
        seed_grad = rng.normal(size=rep.output.shape)
        single = backward(rep, seed_grad, params, config)
        doubled = backward(rep, 2.0 * seed_grad, params, config)
        for name in single:
            assert np.allclose(doubled[name], 2.0 * single[name], atol=1e-12)

    def test_gradients_match_finite_differences(self, rng):
        config, params = tiny_setup()
        ids = np.array([1, 5, 9])
        probe = rng.normal(size=(3, config.d_model))

        rep = forward(ids, params, config)
        grads = backward(rep, probe, params, config)

        def loss():
            return float((forward(ids, params, config).output * probe).sum())

        for name in params.names():
            numeric = finite_difference(loss, params[name], step=1e-5)
            assert max_relative_error(grads[name], numeric) < 1e-4, name

    def test_train_mode_gradients_match_finite_differences(self, rng):
        config, params = tiny_setup()
        ids = np.array([2, 4])
        probe = rng.normal(size=(2, config.d_model))
        rep = forward(ids, params, config, train_mode=True, dropout_seed=17)
        grads = backward(rep, probe, params, config)

        def loss():
            out = forward(ids, params, config, train_mode=True, dropout_seed=17).output
            return float((out * probe).sum())

        for name in ("layer0.attention.query", "layer0.ffn.weight1", "embedding"):
            numeric = finite_difference(loss, params[name], step=1e-5)
            assert max_relative_error(grads[name], numeric) < 1e-4, name

    def test_masked_positions_do_not_leak_gradient(self, rng):
        config, params = tiny_setup()
        ids = np.array([3, 7, 2, 0])
        mask = np.array([True, True, True, False])
        rep = forward(ids, params, config, key_mask=mask)
        probe = np.zeros_like(rep.output)
        probe[:3] = rng.normal(size=(3, config.d_model))
        grads = backward(rep, probe, params, config)

        plain_rep = forward(ids[:3], params, config)
        plain = backward(plain_rep, probe[:3], params, config)
        # Real-token rows of the embedding gradient agree with the unpadded run.
        assert np.abs(grads["embedding"][[3, 7, 2]] - plain["embedding"][[3, 7, 2]]).max() < 1e-10

    def test_stale_cache_detected(self):
        config, params = tiny_setup()
        rep = forward(np.array([1]), params, config)
        params.bump_version()
        with pytest.raises(StaleCacheError):
            backward(rep, np.zeros_like(rep.output), params, config)
