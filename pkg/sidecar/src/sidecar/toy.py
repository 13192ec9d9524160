"""Toy text-encoder math for protocol cross-checks.

This is an independent transcription of the reference encoder the main
pipeline ships as its builtin backend: per-token embedding plus a
1/sqrt(d)-scaled interleaved sin/cos positional vector, mean pool, one
tanh layer, one linear layer, unit normalization. Weights are generated
from a seed in the fixed order W1, b1, W2, b2 with the same uniform
ranges, so equal seeds produce matching encoders across packages.
"""

from __future__ import annotations

import numpy as np

from .formats import read_matrix, read_vocabulary


class EncodeError(ValueError):
    """Client-side request problem (maps to HTTP 400)."""


class TokenTable:
    def __init__(self, vocabulary: list[str], embeddings: np.ndarray):
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.shape[0] != len(vocabulary):
            raise EncodeError("vocabulary and embedding row counts differ")
        self.vocabulary = list(vocabulary)
        self.embeddings = embeddings
        self._index = {w: i for i, w in enumerate(vocabulary)}

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return len(self.vocabulary)

    @staticmethod
    def from_files(vocab_path, matrix_path) -> "TokenTable":
        return TokenTable(read_vocabulary(vocab_path), read_matrix(matrix_path))

    def lookup(self, word: str) -> np.ndarray:
        try:
            return self.embeddings[self._index[word]]
        except KeyError:
            raise EncodeError(f"unknown token {word!r}") from None


def positional_vectors(max_len: int, dim: int) -> np.ndarray:
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (idx // 2)) / dim)
    enc = np.empty((max_len, dim))
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc / np.sqrt(dim)


class ToyEncoder:
    """Seeded frozen encoder serving the /v1/encode contract."""

    def __init__(self, table: TokenTable, seed: int, max_len: int = 64):
        d = table.dim
        rng = np.random.default_rng(seed)
        lim = np.sqrt(3.0 / d)
        self.W1 = rng.uniform(-lim, lim, size=(d, d))
        self.b1 = rng.uniform(-0.1, 0.1, size=d)
        self.W2 = rng.uniform(-lim, lim, size=(d, d))
        self.b2 = rng.uniform(-0.1, 0.1, size=d)
        self.positional = positional_vectors(max_len, d)
        self.table = table
        self.dim = d
        self.max_len = max_len
        self.seed = seed
        self.model_id = f"toy:seed={seed}:dim={d}"

    def encode(self, tokens: list[str], slot_index: int | None,
               proxy: np.ndarray | None) -> np.ndarray:
        if not tokens:
            raise EncodeError("tokens must be a non-empty list of words")
        if len(tokens) > self.max_len:
            raise EncodeError(f"{len(tokens)} tokens exceed max length {self.max_len}")
        if (slot_index is None) != (proxy is None) and proxy is not None:
            raise EncodeError("proxy_embedding given without slot_index")
        rows = np.stack([self.table.lookup(w.lower()) for w in tokens])
        if proxy is not None:
            proxy = np.asarray(proxy, dtype=np.float64)
            if not 0 <= slot_index < len(tokens):
                raise EncodeError(f"slot_index {slot_index} out of range")
            if proxy.shape != (self.dim,):
                raise EncodeError(
                    f"proxy_embedding has {proxy.shape[0] if proxy.ndim == 1 else '?'} "
                    f"entries, expected {self.dim}")
            if not np.all(np.isfinite(proxy)):
                raise EncodeError("proxy_embedding contains non-finite values")
            rows[slot_index] = proxy
        p = np.mean(rows + self.positional[: len(tokens)], axis=0)
        hdn = np.tanh(self.W1 @ p + self.b1)
        o = self.W2 @ hdn + self.b2
        n = float(np.linalg.norm(o))
        if n == 0.0 or not np.isfinite(n):
            raise RuntimeError("encoder produced a degenerate output")
        return o / n
