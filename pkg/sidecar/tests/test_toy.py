import numpy as np
import pytest

from sidecar.formats import write_matrix, write_vocabulary
from sidecar.toy import EncodeError, TokenTable, ToyEncoder, positional_vectors

from _shared import EMBEDDINGS, VOCAB


def test_table_lookup_and_len():
    table = TokenTable(VOCAB, EMBEDDINGS)
    assert len(table) == 3
    assert table.dim == 4
    np.testing.assert_array_equal(table.lookup("red"), EMBEDDINGS[2])


def test_table_unknown_word():
    table = TokenTable(VOCAB, EMBEDDINGS)
    with pytest.raises(EncodeError, match="zzz"):
        table.lookup("zzz")


def test_table_from_files(tmp_path):
    write_vocabulary(tmp_path / "v.vocab", VOCAB)
    write_matrix(tmp_path / "m.mmap", EMBEDDINGS)
    table = TokenTable.from_files(tmp_path / "v.vocab", tmp_path / "m.mmap")
    assert len(table) == 3
    np.testing.assert_allclose(table.lookup("a"), EMBEDDINGS[0], atol=1e-6)


def test_table_row_count_mismatch(tmp_path):
    write_vocabulary(tmp_path / "v.vocab", VOCAB + ["extra"])
    write_matrix(tmp_path / "m.mmap", EMBEDDINGS)
    with pytest.raises(EncodeError):
        TokenTable.from_files(tmp_path / "v.vocab", tmp_path / "m.mmap")


def test_lowercasing(encoder):
    np.testing.assert_array_equal(
        encoder.encode(["RED", "A"], None, None),
        encoder.encode(["red", "a"], None, None))


def test_model_id(encoder):
    assert encoder.model_id == "toy:seed=0:dim=4"


def test_unit_output(encoder):
    out = encoder.encode(["b", "red", "a", "a"], None, None)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12


def test_max_len_enforced():
    enc = ToyEncoder(TokenTable(VOCAB, EMBEDDINGS), seed=0, max_len=2)
    with pytest.raises(EncodeError):
        enc.encode(["a", "b", "red"], None, None)


def test_empty_tokens(encoder):
    with pytest.raises(EncodeError):
        encoder.encode([], None, None)


def test_slot_out_of_range(encoder):
    with pytest.raises(EncodeError):
        encoder.encode(["a"], 3, [0.0, 0.0, 0.0, 0.0])


def test_proxy_wrong_shape(encoder):
    with pytest.raises(EncodeError):
        encoder.encode(["a"], 0, [1.0, 2.0])


def test_proxy_nonfinite(encoder):
    with pytest.raises(EncodeError):
        encoder.encode(["a"], 0, [np.nan, 0.0, 0.0, 0.0])


def test_proxy_replaces_slot_row(encoder):
    # Encoding with the slot filled by token "b"'s own embedding must
    # equal encoding the literal token sequence.
    with_proxy = encoder.encode(["a", "red"], 1, list(EMBEDDINGS[1]))
    literal = encoder.encode(["a", "b"], None, None)
    np.testing.assert_allclose(with_proxy, literal, atol=1e-12)


def test_positional_vectors_scaled():
    pos = positional_vectors(8, 4)
    assert pos.shape == (8, 4)
    # sin/cos values divided by sqrt(dim) stay within +/- 1/sqrt(dim)
    assert np.max(np.abs(pos)) <= 1.0 / np.sqrt(4) + 1e-12
    # position 0: sin(0)=0 on even columns, cos(0)=1 on odd columns
    np.testing.assert_allclose(pos[0], np.array([0.0, 1.0, 0.0, 1.0]) / 2.0, atol=1e-12)


def test_seed_changes_output():
    table = TokenTable(VOCAB, EMBEDDINGS)
    a = ToyEncoder(table, seed=0).encode(["a", "b"], None, None)
    b = ToyEncoder(table, seed=1).encode(["a", "b"], None, None)
    assert not np.allclose(a, b)
