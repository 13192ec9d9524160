"""Synthetic multi-aspect dataset generator.

Builds a desk-scale dataset whose images carry several independent
semantic aspects (e.g. color and species). Each aspect value gets an
orthogonal code vector; the synthetic token table embeds each value word
on its code (scaled), and image embeddings are normalized sums of the
dual vectors of the per-aspect candidate prompt encodings plus Gaussian
noise. The dual construction makes candidate scoring exact at zero noise
while keeping every pipeline stage honest: selection, optimization, and
clustering all run against the real encoder.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .concepts import ConceptSpec, save_concept_spec
from .embedding import PromptTemplate, TokenTable, normalize
from .encoder import BuiltinEncoder, encode
from .errors import ConfigError
from .matrixio import write_embedding_matrix, write_labeling, write_vocabulary
from .pipeline import DatasetManifest, LabelingRef, load_manifest, save_manifest

TEMPLATE_WORDS = ("item", "with", "the", "of")
CODE_SCALE = 3.0


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int = 64
    aspects: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: {
            "color": ("red", "green", "blue"),
            "species": ("apple", "banana", "cherry", "grape"),
        }
    )
    noise: float = 0.05
    seed: int = 0
    code_scale: float = CODE_SCALE

    def __post_init__(self):
        values = [w for words in self.aspects.values() for w in words]
        if len(set(values)) != len(values):
            raise ConfigError("aspect value words must be globally unique")
        if not self.aspects or any(len(v) < 2 for v in self.aspects.values()):
            raise ConfigError("each aspect needs at least two values")
        if len(values) > self.d:
            raise ConfigError(
                f"dimension {self.d} is too small for {len(values)} orthogonal codes"
            )
        combos = int(np.prod([len(v) for v in self.aspects.values()]))
        if self.n % combos != 0:
            raise ConfigError(f"n={self.n} must be divisible by {combos} aspect combinations")
        if self.noise < 0:
            raise ConfigError("noise scale must be non-negative")

    def template_for(self, aspect: str) -> PromptTemplate:
        return PromptTemplate.parse(f"item with the {aspect} of {{}}")


def build_token_table(spec: SyntheticSpec) -> TokenTable:
    """Template and concept words get small random embeddings; each aspect
    value word sits on its own orthogonal code direction."""
    rng = np.random.default_rng(spec.seed)
    values = [w for words in spec.aspects.values() for w in words]
    others = list(TEMPLATE_WORDS) + [a for a in spec.aspects if a not in TEMPLATE_WORDS]
    lim = 1.0 / np.sqrt(spec.d)
    # Orthonormal codes from the QR of a random matrix.
    q, _ = np.linalg.qr(rng.normal(size=(spec.d, len(values))))
    rows = {w: spec.code_scale * q[:, i] for i, w in enumerate(values)}
    for w in others:
        rows[w] = rng.uniform(-lim, lim, size=spec.d)
    vocab = sorted(rows)
    return TokenTable(vocab, np.stack([rows[w] for w in vocab]))


def generate_synthetic(spec: SyntheticSpec, out_dir, encoder_seed: int | None = None) -> DatasetManifest:
    """Write the dataset files and return the loaded manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = build_token_table(spec)
    enc_seed = spec.seed if encoder_seed is None else encoder_seed
    backend = BuiltinEncoder(dim=spec.d, seed=enc_seed)
    rng = np.random.default_rng(spec.seed + 1)

    aspect_names = list(spec.aspects)
    prompt_vecs = {
        aspect: np.stack(
            [
                encode(backend, _render(spec, aspect, word, table)).values
                for word in spec.aspects[aspect]
            ]
        )
        for aspect in aspect_names
    }
    # Images are built from the dual basis of the stacked candidate prompt
    # encodings: <dual_j, encoding_k> = delta_jk, so at zero noise the
    # candidate argmax recovers each aspect value exactly, with margin 1.
    stacked = np.vstack([prompt_vecs[a] for a in aspect_names])
    duals = np.linalg.pinv(stacked)  # (d, V); column j is the dual of row j
    offsets = np.cumsum([0] + [len(spec.aspects[a]) for a in aspect_names])
    dual_vecs = {
        a: duals[:, offsets[ai]: offsets[ai + 1]].T for ai, a in enumerate(aspect_names)
    }

    combos = list(itertools.product(*(range(len(spec.aspects[a])) for a in aspect_names)))
    per_combo = spec.n // len(combos)
    images = np.empty((spec.n, spec.d))
    labels = {a: np.empty(spec.n, dtype=np.int64) for a in aspect_names}
    i = 0
    for combo in combos:
        for _ in range(per_combo):
            base = sum(dual_vecs[a][combo[ai]] for ai, a in enumerate(aspect_names))
            noise = spec.noise * rng.normal(size=spec.d)
            images[i] = normalize(base + noise).values
            for ai, a in enumerate(aspect_names):
                labels[a][i] = combo[ai]
            i += 1

    write_embedding_matrix(out / "images.mmap", images)
    write_embedding_matrix(out / "tokens.mmap", table.embeddings)
    write_vocabulary(out / "vocab.txt", table.vocabulary)
    refs = []
    for a in aspect_names:
        write_labeling(out / f"labels_{a}.txt", labels[a])
        refs.append(LabelingRef(a, f"labels_{a}.txt", len(spec.aspects[a])))
        save_concept_spec(
            ConceptSpec(
                concept_word=a,
                prompt_template=spec.template_for(a),
                candidates=tuple(spec.aspects[a]),
                contrastive_concepts=tuple(aspect_names),
            ),
            out / f"concept_{a}.json",
        )
    manifest = DatasetManifest(
        embeddings="images.mmap",
        token_table="tokens.mmap",
        vocabulary="vocab.txt",
        labelings=tuple(refs),
        encoder={"kind": "builtin", "seed": enc_seed, "dim": spec.d, "max_len": 64},
        base_dir=out,
    )
    save_manifest(manifest, out / "manifest.json")
    return load_manifest(out / "manifest.json")


def _render(spec: SyntheticSpec, aspect: str, word: str, table: TokenTable):
    from .embedding import render_prompt

    return render_prompt(spec.template_for(aspect), word, table)
