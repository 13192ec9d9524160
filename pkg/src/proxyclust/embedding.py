"""Vector and token primitives: unit vectors, the token-embedding table,
and prompt rendering with a learnable proxy slot.

All types are immutable after construction and all operations are pure.
Tokenization is whitespace splitting with lowercasing; one word is one
token, so the proxy always occupies exactly one slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NormalizationError, ParseError, UnknownTokenError

NORM_TOL = 1e-6


@dataclass(frozen=True)
class UnitVector:
    """An embedding on the unit sphere; the common currency of image
    features, prompt features, and encoder outputs."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > NORM_TOL:
            raise NormalizationError(f"norm {n} is not 1 within {NORM_TOL}")
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def normalize(v) -> UnitVector:
    """Project a nonzero vector onto the unit sphere."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not np.isfinite(n):
        raise NormalizationError(f"cannot normalize vector with norm {n}")
    return UnitVector(v / n)


def dot(a: UnitVector, b: UnitVector) -> float:
    """Cosine similarity of two unit vectors; always in [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.dot(a.values, b.values))


def tokenize(text: str) -> list[str]:
    return text.lower().split()


class TokenTable:
    """The word -> embedding map. Lookup of an unknown word is an error,
    never a silent default."""

    def __init__(self, vocabulary: list[str], embeddings: np.ndarray):
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.ndim != 2 or embeddings.shape[0] != len(vocabulary):
            raise DimensionError(
                f"embeddings shape {embeddings.shape} does not match "
                f"vocabulary of {len(vocabulary)} words"
            )
        if len(set(vocabulary)) != len(vocabulary):
            dupes = sorted({w for w in vocabulary if vocabulary.count(w) > 1})
            raise ConfigError(f"duplicate vocabulary words: {dupes}")
        self.vocabulary = list(vocabulary)
        self.embeddings = embeddings
        self.embeddings.setflags(write=False)
        self._index = {w: i for i, w in enumerate(vocabulary)}

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def lookup(self, word: str) -> np.ndarray:
        try:
            return self.embeddings[self._index[word]]
        except KeyError:
            raise UnknownTokenError(f"word {word!r} is not in the vocabulary") from None

    @staticmethod
    def random(vocabulary: list[str], dim: int, seed: int) -> "TokenTable":
        """Seeded table with entries uniform in [-1/sqrt(d), 1/sqrt(d)]."""
        rng = np.random.default_rng(seed)
        lim = 1.0 / np.sqrt(dim)
        return TokenTable(vocabulary, rng.uniform(-lim, lim, size=(len(vocabulary), dim)))


def lookup_token(table: TokenTable, word: str) -> np.ndarray:
    """Return the stored embedding row for a word, unmodified."""
    return table.lookup(word)


@dataclass(frozen=True)
class PromptTemplate:
    """A word sequence with one proxy slot, e.g. 'fruit with the color of {}'."""

    tokens_before_slot: tuple[str, ...]
    tokens_after_slot: tuple[str, ...]

    @property
    def slot_index(self) -> int:
        return len(self.tokens_before_slot)

    def __len__(self) -> int:
        return len(self.tokens_before_slot) + 1 + len(self.tokens_after_slot)

    @staticmethod
    def parse(text: str, marker: str = "{}") -> "PromptTemplate":
        words = tokenize(text)
        if words.count(marker) != 1:
            raise ParseError(f"template must contain exactly one {marker!r} slot: {text!r}")
        i = words.index(marker)
        return PromptTemplate(tuple(words[:i]), tuple(words[i + 1 :]))

    def words_with(self, filler: str) -> list[str]:
        return list(self.tokens_before_slot) + [filler] + list(self.tokens_after_slot)


@dataclass(frozen=True)
class TokenSequence:
    """A rendered prompt: per-token embeddings plus the position of the
    learnable proxy entry. `words` is kept for wire transport to remote
    encoders that tokenize on their own side."""

    embeddings: np.ndarray
    slot_index: int | None = None
    words: tuple[str, ...] | None = None

    def __post_init__(self):
        e = np.asarray(self.embeddings, dtype=np.float64)
        object.__setattr__(self, "embeddings", e)
        if e.ndim != 2:
            raise DimensionError(f"sequence embeddings must be 2-D, got shape {e.shape}")
        if self.slot_index is not None and not 0 <= self.slot_index < e.shape[0]:
            raise DimensionError(
                f"slot index {self.slot_index} out of range for length {e.shape[0]}"
            )
        self.embeddings.setflags(write=False)

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def with_slot(self, proxy: np.ndarray) -> "TokenSequence":
        """Return a copy with the slot entry replaced by `proxy`."""
        if self.slot_index is None:
            raise DimensionError("sequence has no slot to fill")
        proxy = np.asarray(proxy, dtype=np.float64)
        if proxy.shape != (self.dim,):
            raise DimensionError(f"proxy shape {proxy.shape} does not match dim {self.dim}")
        e = self.embeddings.copy()
        e[self.slot_index] = proxy
        return TokenSequence(e, self.slot_index, self.words)


def render_prompt(template: PromptTemplate, word: str, table: TokenTable) -> TokenSequence:
    """Render a template with a filler word via token-table lookups."""
    words = template.words_with(word.lower())
    rows = np.stack([table.lookup(w) for w in words])
    return TokenSequence(rows, template.slot_index, tuple(words))
