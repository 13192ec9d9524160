"""Batch image featurizer.

Reads image files, produces an n x d matrix in the shared binary format
with unit-norm rows, and writes an index file recording the model
identifier, the source path of every row, and any skipped inputs.

The default model is a deterministic pixel featurizer: resize to a fixed
grid, grayscale, center, then project through a seeded random matrix.
It carries no pretrained weights but exercises the full contract
(determinism, unit rows, duplicate images giving identical rows) and is
trivially swappable for a real vision tower behind the same interface.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .formats import write_matrix

GRID = 16


class EmbedError(RuntimeError):
    pass


class PixelFeaturizer:
    def __init__(self, dim: int = 64, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.projection = rng.normal(size=(GRID * GRID, dim)) / np.sqrt(GRID * GRID)
        self.dim = dim
        self.model_id = f"pixel-project-v1:dim={dim}:seed={seed}"

    def features(self, image: Image.Image) -> np.ndarray:
        gray = image.convert("L").resize((GRID, GRID), Image.BILINEAR)
        x = np.asarray(gray, dtype=np.float64).ravel() / 255.0
        x -= x.mean()
        v = x @ self.projection
        n = float(np.linalg.norm(v))
        if n == 0.0:
            # A perfectly flat image projects to zero; give it a fixed
            # deterministic direction instead of failing.
            v = self.projection[0].copy()
            n = float(np.linalg.norm(v))
        return v / n


def embed_images(paths, out_path, index_path=None, model: PixelFeaturizer | None = None):
    """Embed `paths` in order into `out_path`. Unreadable images are
    skipped and recorded; embedding nothing at all is an error."""
    model = model or PixelFeaturizer()
    rows = []
    kept: list[str] = []
    skipped: list[dict] = []
    for i, p in enumerate(paths):
        try:
            with Image.open(p) as img:
                rows.append(model.features(img))
            kept.append(str(p))
        except (OSError, UnidentifiedImageError) as exc:
            skipped.append({"index": i, "path": str(p), "reason": str(exc)})
    if not rows:
        raise EmbedError(f"no readable images among {len(list(paths))} inputs")
    matrix = np.stack(rows)
    write_matrix(out_path, matrix)
    index = {
        "model": model.model_id,
        "dim": model.dim,
        "rows": kept,
        "skipped": skipped,
    }
    if index_path is None:
        index_path = Path(out_path).with_suffix(".index.json")
    Path(index_path).write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return matrix, index
