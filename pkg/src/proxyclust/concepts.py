"""Concept specifications and reference-word selection.

A concept spec carries the user's concept word, a prompt template with a
proxy slot, candidate reference words (captured offline from an LLM or
sampled from a lexicon), and sibling concepts for the contrastive term.
Scoring ranks each candidate prompt against an image embedding; the
argmax candidate becomes the image's reference word.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import PromptTemplate, TokenTable, UnitVector, render_prompt
from .encoder import encode
from .errors import ConfigError, ParseError

CANDIDATE_CACHE_ATTR = "_candidate_embedding_cache"


@dataclass(frozen=True)
class ConceptSpec:
    concept_word: str
    prompt_template: PromptTemplate
    candidates: tuple[str, ...]
    contrastive_concepts: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.candidates:
            raise ConfigError("candidate set must be non-empty")
        if len(set(self.candidates)) != len(self.candidates):
            raise ConfigError(f"duplicate candidate words in concept {self.concept_word!r}")
        if self.contrastive_concepts and self.concept_word not in self.contrastive_concepts:
            raise ConfigError(
                f"concept {self.concept_word!r} must appear among its contrastive concepts"
            )

    @property
    def target_index(self) -> int:
        return self.contrastive_concepts.index(self.concept_word)


@dataclass(frozen=True)
class SelectedReference:
    image_index: int
    word: str
    token_embedding: np.ndarray
    score: float


def load_concept_spec(path) -> ConceptSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    for field in ("concept", "template", "candidates"):
        if field not in raw:
            raise ParseError(f"{path}: missing field {field!r}")
    if not isinstance(raw["candidates"], list) or not all(
        isinstance(c, str) for c in raw["candidates"]
    ):
        raise ParseError(f"{path}: field 'candidates' must be a list of words")
    contrastive = raw.get("contrastive_concepts", [])
    if not isinstance(contrastive, list):
        raise ParseError(f"{path}: field 'contrastive_concepts' must be a list")
    return ConceptSpec(
        concept_word=str(raw["concept"]).lower(),
        prompt_template=PromptTemplate.parse(str(raw["template"])),
        candidates=tuple(c.lower() for c in raw["candidates"]),
        contrastive_concepts=tuple(c.lower() for c in contrastive),
    )


def save_concept_spec(spec: ConceptSpec, path) -> None:
    from .matrixio import atomic_write_text

    tmpl = " ".join(
        list(spec.prompt_template.tokens_before_slot)
        + ["{}"]
        + list(spec.prompt_template.tokens_after_slot)
    )
    payload = {
        "concept": spec.concept_word,
        "template": tmpl,
        "candidates": list(spec.candidates),
        "contrastive_concepts": list(spec.contrastive_concepts),
    }
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def validate_candidates(spec: ConceptSpec, table: TokenTable) -> None:
    """Reject candidates missing from the vocabulary; silent skipping
    would bias selection."""
    missing = [w for w in spec.candidates if w not in table]
    if missing:
        raise ConfigError(
            f"concept {spec.concept_word!r}: candidates not in vocabulary: {missing}"
        )


def candidate_prompt_embeddings(spec: ConceptSpec, backend, table: TokenTable) -> np.ndarray:
    """Encoder outputs of every candidate prompt, computed once per spec
    and cached on the spec object."""
    cache = getattr(spec, CANDIDATE_CACHE_ATTR, None)
    if cache is not None and cache[0] is backend and cache[1] is table:
        return cache[2]
    rows = np.stack(
        [
            encode(backend, render_prompt(spec.prompt_template, word, table)).values
            for word in spec.candidates
        ]
    )
    rows.setflags(write=False)
    object.__setattr__(spec, CANDIDATE_CACHE_ATTR, (backend, table, rows))
    return rows


def score_candidates(image: UnitVector, spec: ConceptSpec, backend, table: TokenTable) -> np.ndarray:
    """score_k = <image, encode(prompt rendered with candidate k)>."""
    prompts = candidate_prompt_embeddings(spec, backend, table)
    return prompts @ image.values


def select_reference(image_index: int, image: UnitVector, spec: ConceptSpec, backend,
                     table: TokenTable) -> SelectedReference:
    """Argmax candidate; ties broken by lowest candidate index."""
    scores = score_candidates(image, spec, backend, table)
    best = int(np.argmax(scores))  # argmax returns the first maximum
    word = spec.candidates[best]
    return SelectedReference(
        image_index=image_index,
        word=word,
        token_embedding=table.lookup(word),
        score=float(scores[best]),
    )


def load_lexicon(path) -> list[str]:
    words = [
        line.strip().lower()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    return words


def fallback_wordlist(lexicon_path, n: int, seed: int) -> list[str]:
    """n distinct words sampled uniformly without replacement, for concepts
    whose candidate labels carry no usable semantics."""
    words = load_lexicon(lexicon_path)
    if len(words) < n:
        raise ConfigError(f"lexicon has {len(words)} words, need {n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(words), size=n, replace=False)
    return [words[i] for i in idx]
