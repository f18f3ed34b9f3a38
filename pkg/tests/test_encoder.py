import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convres.encoder import (
    ConvFilter,
    EncoderConfig,
    conv_feature_map,
    encode,
    encode_backward,
    encode_batch,
    encode_batch_backward,
    encode_forward,
    make_banks,
    max_over_time,
)
from convres.exceptions import ConfigError, ShapeError
from convres.numeric import ParamTensor, SeededRng, finite_diff_check
from convres.text import EmbeddingTable


def _filter(k, t, weights=None, bias=0.0):
    w = np.zeros((k, t)) if weights is None else np.asarray(weights, dtype=np.float64)
    return ConvFilter(t, ParamTensor("w", w), ParamTensor("b", np.array([bias])))


def _random_banks(config, seed, scale=0.6):
    banks = make_banks(config, SeededRng(seed))
    r = SeededRng(seed + 1)
    for b in banks:
        b.weights.value[...] = r.uniform(-scale, scale, b.weights.value.shape)
        b.bias.value[...] = r.uniform(-0.2, 0.2, b.bias.value.shape)
    return banks


class TestEncoderConfig:
    def test_default_output_dim(self):
        assert EncoderConfig().output_dim == 300

    def test_rejects_unsorted_windows(self):
        with pytest.raises(ConfigError):
            EncoderConfig(windows=(4, 3))

    def test_rejects_zero_filters(self):
        with pytest.raises(ConfigError):
            EncoderConfig(filters_per_window=0)


class TestConvFeatureMap:
    def test_zero_filter_gives_zeros(self):
        X = SeededRng(0).uniform(-1, 1, (3, 6))
        g = conv_feature_map(X, _filter(3, 2), valid_len=6)
        assert np.array_equal(g, np.zeros(5))

    def test_length_is_valid_len_minus_window_plus_one(self):
        X = np.zeros((2, 5))
        g = conv_feature_map(X, _filter(2, 3), valid_len=5)
        assert g.shape == (3,)

    def test_hand_convolution(self):
        X = np.array([[1.0, 2.0, 3.0]])
        g = conv_feature_map(X, _filter(1, 2, weights=[[1.0, 1.0]]), valid_len=3)
        assert np.allclose(g, np.tanh([3.0, 5.0]), atol=1e-15)

    def test_short_document_padded_to_window(self):
        X = np.zeros((2, 6))
        X[:, 0] = 1.0
        g = conv_feature_map(X, _filter(2, 3, bias=0.25), valid_len=1)
        assert g.shape == (1,)  # never an error, one padded position
        assert g[0] == np.tanh(0.25)

    def test_mismatched_filter_dim(self):
        with pytest.raises(ShapeError):
            conv_feature_map(np.zeros((3, 5)), _filter(2, 2), valid_len=5)


class TestMaxOverTime:
    def test_tie_breaks_to_lowest_index(self):
        assert max_over_time(np.array([0.1, 0.9, 0.9])) == (0.9, 1)

    def test_singleton(self):
        assert max_over_time(np.array([-0.5])) == (-0.5, 0)

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            max_over_time(np.array([]))

    @given(st.integers(0, 2**32), st.integers(1, 30))
    @settings(max_examples=60, deadline=None)
    def test_matches_linear_scan(self, seed, n):
        g = SeededRng(seed).uniform(-1, 1, (n,))
        val, idx = max_over_time(g)
        best_val, best_idx = g[0], 0
        for i in range(1, n):
            if g[i] > best_val:
                best_val, best_idx = g[i], i
        assert val == best_val and idx == best_idx


class TestEncode:
    def test_zero_everything_gives_zero_vector(self):
        config = EncoderConfig(windows=(3, 4, 5), filters_per_window=100, embedding_dim=4)
        banks = make_banks(config, SeededRng(0))
        for b in banks:
            b.weights.value[...] = 0.0
        enc = encode(np.zeros((4, 10)), 10, banks)
        assert enc.x.shape == (300,)
        assert np.array_equal(enc.x, np.zeros(300))

    def test_eval_mode_deterministic(self):
        config = EncoderConfig(windows=(2, 3), filters_per_window=4, embedding_dim=3)
        banks = _random_banks(config, 7)
        X = SeededRng(5).uniform(-1, 1, (3, 9))
        a = encode(X, 7, banks)
        b = encode(X, 7, banks)
        assert np.array_equal(a.x, b.x)

    def test_tanh_open_interval(self):
        config = EncoderConfig(windows=(2,), filters_per_window=8, embedding_dim=3)
        banks = _random_banks(config, 3)
        enc = encode(SeededRng(1).uniform(-1, 1, (3, 8)), 8, banks)
        assert (np.abs(enc.x) < 1.0).all()

    def test_padding_invariance_exact(self):
        config = EncoderConfig(windows=(2, 3), filters_per_window=5, embedding_dim=4)
        banks = _random_banks(config, 11)
        body = SeededRng(2).uniform(-1, 1, (4, 6))
        short = np.hstack([body, np.zeros((4, 2))])
        long = np.hstack([body, np.zeros((4, 30))])
        a = encode(short, 6, banks)
        b = encode(long, 6, banks)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.argmax_positions, b.argmax_positions)

    def test_dropout_keep_rate(self):
        config = EncoderConfig(windows=(2,), filters_per_window=10, embedding_dim=3)
        banks = _random_banks(config, 9)
        X = SeededRng(4).uniform(-1, 1, (3, 8))
        rng = SeededRng(100)
        kept = 0
        trials = 1000
        for _ in range(trials):
            enc = encode(X, 8, banks, train_mode=True, dropout_rng=rng)
            kept += np.count_nonzero(enc.x)
        rate = kept / (trials * 10)
        assert abs(rate - 0.5) < 0.02

    def test_dropout_scales_survivors(self):
        config = EncoderConfig(windows=(2,), filters_per_window=10, embedding_dim=3)
        banks = _random_banks(config, 9)
        X = SeededRng(4).uniform(-1, 1, (3, 8))
        base = encode(X, 8, banks).x
        enc = encode(X, 8, banks, train_mode=True, dropout_rng=SeededRng(0))
        surv = enc.x != 0.0
        assert np.allclose(enc.x[surv], 2.0 * base[surv], atol=1e-15)


class TestEncoderBackward:
    def test_gradients_match_finite_differences(self):
        config = EncoderConfig(windows=(2, 3), filters_per_window=3, embedding_dim=4)
        banks = _random_banks(config, 21)
        X = SeededRng(22).uniform(-1, 1, (4, 8))
        probe = SeededRng(23).uniform(-1, 1, (config.output_dim,))

        def loss():
            return float(encode(X, 8, banks).x @ probe)

        params = [p for b in banks for p in b.params()]
        for p in params:
            p.zero_grad()
        _, cache = encode_forward(X, 8, banks)
        dX = encode_backward(cache, probe, banks)
        assert finite_diff_check(loss, params) < 1e-4

        num = np.zeros_like(X)
        d = 1e-6
        for i in range(X.shape[0]):
            for j in range(X.shape[1]):
                orig = X[i, j]
                X[i, j] = orig + d
                up = loss()
                X[i, j] = orig - d
                down = loss()
                X[i, j] = orig
                num[i, j] = (up - down) / (2 * d)
        assert np.abs(dX - num).max() < 1e-6

    def test_pool_gradient_routes_only_to_argmax(self):
        # window of 1 keeps positions disjoint, exposing the routing directly
        config = EncoderConfig(windows=(1,), filters_per_window=1, embedding_dim=2)
        banks = _random_banks(config, 31)
        X = SeededRng(32).uniform(-1, 1, (2, 6))
        _, cache = encode_forward(X, 6, banks)
        dX = encode_backward(cache, np.array([1.0]), banks)
        j_star = cache.argmax[0][0]
        nonzero_cols = np.flatnonzero(np.abs(dX).sum(axis=0))
        assert list(nonzero_cols) == [j_star]


class TestEncodeBatch:
    def _setup(self):
        k = 4
        config = EncoderConfig(windows=(2, 3), filters_per_window=3, embedding_dim=k)
        banks = _random_banks(config, 41)
        emb = EmbeddingTable(
            ParamTensor("embedding", SeededRng(42).uniform(-0.5, 0.5, (12, k))), k
        )
        emb.freeze_pad()
        ids = np.array(
            [
                [2, 3, 4, 5, 6, 7, 0, 0],
                [8, 9, 2, 0, 0, 0, 0, 0],
                [4, 0, 0, 0, 0, 0, 0, 0],  # single-token document
            ]
        )
        lens = np.array([6, 3, 1])
        return config, banks, emb, ids, lens

    def test_matches_reference_per_doc(self):
        config, banks, emb, ids, lens = self._setup()
        x, argmax, _ = encode_batch(ids, lens, emb, banks)
        for d in range(ids.shape[0]):
            X = emb.weights.value[ids[d]].T.copy()
            ref = encode(X, int(lens[d]), banks)
            assert np.allclose(x[d], ref.x, atol=1e-12)
            assert np.array_equal(argmax[d], ref.argmax_positions)

    def test_result_independent_of_batch_padding_width(self):
        config, banks, emb, ids, lens = self._setup()
        x, _, _ = encode_batch(ids, lens, emb, banks)
        wide = np.hstack([ids, np.zeros((3, 5), dtype=ids.dtype)])
        x2, _, _ = encode_batch(wide, lens, emb, banks)
        assert np.array_equal(x, x2)

    def test_batch_gradients_match_finite_differences(self):
        config, banks, emb, ids, lens = self._setup()
        probe = SeededRng(43).uniform(-1, 1, (3, config.output_dim))

        def loss():
            xx, _, _ = encode_batch(ids, lens, emb, banks)
            return float((xx * probe).sum())

        params = [emb.weights] + [p for b in banks for p in b.params()]
        for p in params:
            p.zero_grad()
        _, _, cache = encode_batch(ids, lens, emb, banks)
        encode_batch_backward(cache, probe, emb, banks)
        assert finite_diff_check(loss, params) < 1e-4

    def test_untouched_embedding_rows_get_no_gradient(self):
        config, banks, emb, ids, lens = self._setup()
        emb.weights.zero_grad()
        for b in banks:
            b.weights.zero_grad()
            b.bias.zero_grad()
        _, _, cache = encode_batch(ids, lens, emb, banks)
        encode_batch_backward(cache, np.ones((3, config.output_dim)), emb, banks)
        # rows 10 and 11 appear in no document
        assert np.array_equal(emb.weights.grad[10], np.zeros(4))
        assert np.array_equal(emb.weights.grad[11], np.zeros(4))
