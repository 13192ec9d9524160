import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxyclust.embedding import (
    PromptTemplate,
    TokenSequence,
    TokenTable,
    dot,
    lookup_token,
    normalize,
    render_prompt,
    tokenize,
)
from proxyclust.errors import (
    ConfigError,
    DimensionError,
    NormalizationError,
    ParseError,
    UnknownTokenError,
)


def nonzero_vectors():
    return (
        st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=16)
        .map(np.array)
        .filter(lambda v: 1e-6 < np.linalg.norm(v) < 1e7)
    )


class TestNormalize:
    def test_already_unit(self):
        np.testing.assert_array_equal(normalize([1, 0, 0]).values, [1.0, 0.0, 0.0])

    def test_three_four_five(self):
        np.testing.assert_allclose(normalize([3, 4]).values, [0.6, 0.8], rtol=0, atol=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(NormalizationError):
            normalize([0.0, 0.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(NormalizationError):
            normalize([np.inf, 1.0])

    @given(nonzero_vectors())
    def test_idempotent(self, v):
        once = normalize(v).values
        twice = normalize(once).values
        assert np.max(np.abs(once - twice)) < 1e-12

    @given(nonzero_vectors(), st.floats(1e-3, 1e3))
    def test_positive_scale_invariance(self, v, c):
        assert np.max(np.abs(normalize(c * v).values - normalize(v).values)) < 1e-9


class TestUnitVector:
    def test_norm_enforced(self):
        from proxyclust.embedding import UnitVector

        with pytest.raises(NormalizationError):
            UnitVector(np.array([1.0, 1.0]))

    def test_must_be_1d(self):
        from proxyclust.embedding import UnitVector

        with pytest.raises(DimensionError):
            UnitVector(np.eye(2))

    def test_immutable(self):
        u = normalize([3, 4])
        with pytest.raises(ValueError):
            u.values[0] = 0.0


class TestDot:
    def test_self_similarity(self):
        u = normalize([1, 2, 2])
        assert dot(u, u) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert dot(normalize([1, 0]), normalize([0, 1])) == 0.0

    def test_hand_value(self):
        # 0.6*0.8 + 0.8*0.6 = 0.96
        assert dot(normalize([0.6, 0.8]), normalize([0.8, 0.6])) == pytest.approx(0.96, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            dot(normalize([1, 0]), normalize([1, 0, 0]))

    @given(nonzero_vectors())
    def test_bounded_and_symmetric(self, v):
        rng = np.random.default_rng(len(v))
        u = normalize(rng.normal(size=v.shape[0]))
        w = normalize(v)
        assert -1.0 - 1e-9 <= dot(u, w) <= 1.0 + 1e-9
        assert dot(u, w) == dot(w, u)


class TestTokenTable:
    def test_lookup_returns_stored_row(self):
        t = TokenTable(["red"], np.array([[0.1, 0.2]]))
        np.testing.assert_array_equal(lookup_token(t, "red"), [0.1, 0.2])

    def test_unknown_word(self):
        t = TokenTable(["red"], np.array([[0.1, 0.2]]))
        with pytest.raises(UnknownTokenError):
            t.lookup("zzz")

    def test_duplicate_vocabulary(self):
        with pytest.raises(ConfigError):
            TokenTable(["a", "a"], np.zeros((2, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            TokenTable(["a"], np.zeros((2, 3)))

    def test_random_seeded_and_bounded(self):
        a = TokenTable.random(["a", "b"], dim=16, seed=3)
        b = TokenTable.random(["a", "b"], dim=16, seed=3)
        np.testing.assert_array_equal(a.embeddings, b.embeddings)
        lim = 1.0 / np.sqrt(16)
        assert np.all(np.abs(a.embeddings) <= lim)

    def test_matrix_file_round_trip(self, tmp_path):
        from proxyclust.matrixio import (
            read_embedding_matrix,
            read_vocabulary,
            write_embedding_matrix,
            write_vocabulary,
        )

        t = TokenTable.random(["a", "b", "c"], dim=4, seed=1)
        write_embedding_matrix(tmp_path / "t.mmap", t.embeddings.astype(np.float32))
        write_vocabulary(tmp_path / "v.txt", t.vocabulary)
        back = TokenTable(
            read_vocabulary(tmp_path / "v.txt"),
            read_embedding_matrix(tmp_path / "t.mmap"),
        )
        np.testing.assert_array_equal(
            back.lookup("b"), t.embeddings[1].astype(np.float32).astype(np.float64)
        )


class TestPromptTemplate:
    def test_parse_slot_position(self):
        t = PromptTemplate.parse("fruit with the color of {}")
        assert len(t) == 6
        assert t.slot_index == 5

    def test_no_slot_rejected(self):
        with pytest.raises(ParseError):
            PromptTemplate.parse("fruit with no slot")

    def test_two_slots_rejected(self):
        with pytest.raises(ParseError):
            PromptTemplate.parse("{} and {}")

    def test_tokenize_lowercases(self):
        assert tokenize("Fruit WITH  the") == ["fruit", "with", "the"]


class TestRenderPrompt:
    def test_six_token_render(self, table8):
        t = PromptTemplate.parse("fruit with the color of {}")
        seq = render_prompt(t, "red", table8)
        assert len(seq) == 6
        assert seq.slot_index == 5
        np.testing.assert_array_equal(seq.embeddings[5], table8.lookup("red"))
        np.testing.assert_array_equal(seq.embeddings[0], table8.lookup("fruit"))

    def test_filler_last_when_no_suffix(self, table8):
        t = PromptTemplate.parse("the color {}")
        seq = render_prompt(t, "red", table8)
        np.testing.assert_array_equal(seq.embeddings[-1], table8.lookup("red"))

    def test_unknown_filler(self, table8):
        t = PromptTemplate.parse("the color {}")
        with pytest.raises(UnknownTokenError):
            render_prompt(t, "zzz", table8)

    def test_slot_substitution_identity(self, table8):
        t = PromptTemplate.parse("fruit with the color of {}")
        a = render_prompt(t, "red", table8).with_slot(table8.lookup("blue"))
        b = render_prompt(t, "blue", table8)
        np.testing.assert_array_equal(a.embeddings, b.embeddings)

    def test_non_slot_rows_independent_of_filler(self, table8):
        t = PromptTemplate.parse("fruit with the color of {}")
        a = render_prompt(t, "red", table8)
        b = render_prompt(t, "green", table8)
        mask = np.arange(len(a)) != a.slot_index
        np.testing.assert_array_equal(a.embeddings[mask], b.embeddings[mask])


class TestTokenSequence:
    def test_slot_index_validated(self):
        with pytest.raises(DimensionError):
            TokenSequence(np.zeros((2, 3)), slot_index=5)

    def test_with_slot_requires_slot(self):
        with pytest.raises(DimensionError):
            TokenSequence(np.zeros((2, 3))).with_slot(np.zeros(3))

    def test_with_slot_shape_checked(self):
        seq = TokenSequence(np.zeros((2, 3)), slot_index=0)
        with pytest.raises(DimensionError):
            seq.with_slot(np.zeros(4))
