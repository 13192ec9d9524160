import numpy as np
import pytest

from proxyclust.embedding import TokenSequence, normalize
from proxyclust.encoder import (
    BuiltinEncoder,
    FiniteDiffBackend,
    central_difference,
    finite_diff_grad,
    loss_grad_wrt_proxy,
    similarity_loss,
    sinusoidal_positions,
)
from proxyclust.errors import ConfigError, DimensionError


# Output of the built-in encoder (seed 0, d = 4) for the single token
# [0.1, -0.2, 0.3, 0.05], frozen from an independent transcription of the
# forward formula (mean pool + positional, tanh layer, linear layer,
# unit normalization).
GOLDEN_INPUT = np.array([0.1, -0.2, 0.3, 0.05])
GOLDEN_OUTPUT = np.array([
    0.0554101943959886,
    -0.6336924188523486,
    0.05937443098945811,
    0.7693102791401766,
])


def _rand_seq(rng, length, d, slot=None):
    return TokenSequence(rng.normal(scale=0.3, size=(length, d)), slot_index=slot)


class TestSinusoidalPositions:
    def test_shape_and_determinism(self):
        a = sinusoidal_positions(8, 6)
        b = sinusoidal_positions(8, 6)
        assert a.shape == (8, 6)
        np.testing.assert_array_equal(a, b)

    def test_position_zero_is_interleaved_sin_cos(self):
        p = sinusoidal_positions(4, 6)
        # sin(0) = 0 on even slots, cos(0) = 1 on odd slots, then 1/sqrt(d).
        np.testing.assert_allclose(p[0, 0::2], 0.0, atol=0)
        np.testing.assert_allclose(p[0, 1::2], 1.0 / np.sqrt(6), atol=0)

    def test_distinct_positions_differ(self):
        p = sinusoidal_positions(3, 8)
        assert not np.allclose(p[0], p[1])


class TestBuiltinEncoder:
    def test_golden_fixture(self):
        enc = BuiltinEncoder(dim=4, seed=0)
        out = enc.encode(TokenSequence(GOLDEN_INPUT[None, :]))
        np.testing.assert_allclose(out.values, GOLDEN_OUTPUT, rtol=0, atol=1e-14)

    def test_determinism_across_instances(self, rng):
        seq = _rand_seq(rng, 4, 8)
        a = BuiltinEncoder(dim=8, seed=3).encode(seq)
        b = BuiltinEncoder(dim=8, seed=3).encode(seq)
        np.testing.assert_array_equal(a.values, b.values)

    def test_different_seeds_differ(self, rng):
        seq = _rand_seq(rng, 4, 8)
        a = BuiltinEncoder(dim=8, seed=3).encode(seq)
        b = BuiltinEncoder(dim=8, seed=4).encode(seq)
        assert not np.allclose(a.values, b.values)

    def test_unit_norm_1000_random_inputs(self, backend8):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            seq = _rand_seq(rng, int(rng.integers(1, 7)), 8)
            out = backend8.encode(seq)
            assert abs(np.linalg.norm(out.values) - 1.0) < 1e-6

    def test_dimension_mismatch(self, backend8, rng):
        with pytest.raises(DimensionError):
            backend8.encode(_rand_seq(rng, 3, 5))

    def test_too_long_sequence(self, rng):
        enc = BuiltinEncoder(dim=4, seed=0, max_len=2)
        with pytest.raises(DimensionError):
            enc.encode(_rand_seq(rng, 3, 4))

    def test_weights_frozen(self, backend8):
        with pytest.raises(ValueError):
            backend8.weights.W1[0, 0] = 0.0


class TestSimilarityLoss:
    def test_range_and_oracle(self, backend8, rng):
        # Oracle: recompute -<image, encode> by hand from the same forward.
        seq = _rand_seq(rng, 5, 8, slot=2)
        proxy = rng.normal(size=8)
        image = normalize(rng.normal(size=8))
        loss = similarity_loss(backend8, seq, proxy, image)
        out = backend8.encode(seq, proxy)
        assert loss == pytest.approx(-float(image.values @ out.values), abs=1e-10)
        assert -1.0 <= loss <= 1.0

    def test_aligned_image_gives_minus_one(self, backend8, rng):
        seq = _rand_seq(rng, 4, 8, slot=0)
        proxy = rng.normal(size=8)
        image = backend8.encode(seq, proxy)
        assert similarity_loss(backend8, seq, proxy, image) == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal_image_gives_zero(self, backend8, rng):
        seq = _rand_seq(rng, 4, 8, slot=0)
        proxy = rng.normal(size=8)
        out = backend8.encode(seq, proxy).values
        # Gram-Schmidt an orthogonal unit vector.
        v = rng.normal(size=8)
        v -= out * (out @ v)
        image = normalize(v)
        assert similarity_loss(backend8, seq, proxy, image) == pytest.approx(0.0, abs=1e-12)


class TestLossGrad:
    def test_matches_finite_differences_100_cases(self):
        rng = np.random.default_rng(5)
        for case in range(100):
            d = int(rng.integers(2, 33))
            enc = BuiltinEncoder(dim=d, seed=case)
            seq = _rand_seq(rng, int(rng.integers(1, 7)), d, slot=0)
            proxy = rng.normal(scale=0.3, size=d)
            image = normalize(rng.normal(size=d))
            g = loss_grad_wrt_proxy(enc, seq, proxy, image)
            fd = finite_diff_grad(enc, seq, proxy, image, step=1e-4)
            rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
            assert rel < 1e-4

    def test_zero_w2_gives_zero_gradient(self, rng):
        from types import SimpleNamespace

        w = BuiltinEncoder(dim=6, seed=0).weights
        zeroed = SimpleNamespace(
            W1=w.W1, b1=w.b1, W2=np.zeros_like(w.W2),
            b2=np.full(6, 0.5),  # keep the output nonzero
            positional=w.positional, dim=w.dim, max_len=w.max_len, seed=w.seed,
        )
        enc2 = BuiltinEncoder(weights=zeroed)
        seq = _rand_seq(rng, 3, 6, slot=1)
        g = enc2.loss_grad(seq, rng.normal(size=6), normalize(rng.normal(size=6)))
        np.testing.assert_allclose(g, 0.0, atol=1e-15)

    def test_requires_slot(self, backend8, rng):
        with pytest.raises(DimensionError):
            backend8.loss_grad(_rand_seq(rng, 3, 8), rng.normal(size=8),
                               normalize(rng.normal(size=8)))


class TestCentralDifference:
    def test_quadratic_exact(self):
        w = np.array([0.3, -1.2, 2.0])
        g = central_difference(lambda x: float(x @ x), w, step=1e-4)
        np.testing.assert_allclose(g, 2.0 * w, atol=1e-6)

    def test_zero_step_rejected(self, backend8, rng):
        seq = _rand_seq(rng, 3, 8, slot=0)
        with pytest.raises(ConfigError):
            finite_diff_grad(backend8, seq, rng.normal(size=8),
                             normalize(rng.normal(size=8)), step=0.0)

    def test_finite_diff_backend_wraps_forward_only(self, backend8, rng):
        class ForwardOnly:
            kind = "fwd"
            grad_supported = False
            dim = 8

            def encode(self, seq, proxy=None):
                return backend8.encode(seq, proxy)

        fdb = FiniteDiffBackend(ForwardOnly())
        seq = _rand_seq(rng, 3, 8, slot=1)
        proxy = rng.normal(size=8)
        image = normalize(rng.normal(size=8))
        fd = fdb.loss_grad(seq, proxy, image)
        g = backend8.loss_grad(seq, proxy, image)
        rel = np.linalg.norm(g - fd) / np.linalg.norm(g)
        assert rel < 1e-4

    def test_forward_only_dispatch(self, backend8, rng):
        class ForwardOnly:
            kind = "fwd"
            grad_supported = False
            dim = 8

            def encode(self, seq, proxy=None):
                return backend8.encode(seq, proxy)

        seq = _rand_seq(rng, 3, 8, slot=1)
        proxy = rng.normal(size=8)
        image = normalize(rng.normal(size=8))
        g = loss_grad_wrt_proxy(ForwardOnly(), seq, proxy, image)
        direct = finite_diff_grad(backend8, seq, proxy, image)
        np.testing.assert_allclose(g, direct, atol=1e-12)
