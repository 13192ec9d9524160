"""End-to-end orchestration: load a dataset manifest and concept specs,
select references, optimize proxies, cluster, score against every ground
truth, and emit reports. Also hyperparameter grid search driven purely
by the (unsupervised) loss score: ground-truth labelings never reach any
optimization or model-selection path.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clustering import Labeling, RestartsResult, kmeans_restarts, nmi, rand_index
from .concepts import ConceptSpec, load_concept_spec
from .embedding import TokenTable, UnitVector, normalize
from .encoder import BuiltinEncoder, RemoteEncoder
from .errors import ConfigError, NumericalError, ProxyClustError
from .matrixio import (
    atomic_write_text,
    read_embedding_matrix,
    read_labeling,
    read_vocabulary,
    write_embedding_matrix,
    write_labeling,
)
from .optimizer import HyperParams, optimize_all

DEFAULT_RESTARTS = 10


def default_grids() -> dict[str, list[float]]:
    return {
        "learning_rate": [0.1, 0.05, 0.01, 0.005, 0.001, 0.0005],
        "weight_decay": [0.0005, 0.0001, 0.00005, 0.00001, 0.0],
        "alpha": [round(0.1 * i, 1) for i in range(11)],
        "beta": [round(0.1 * i, 1) for i in range(11)],
    }


@dataclass(frozen=True)
class LabelingRef:
    name: str
    path: str
    k: int


@dataclass(frozen=True)
class DatasetManifest:
    embeddings: str
    token_table: str
    vocabulary: str
    labelings: tuple[LabelingRef, ...] = ()
    encoder: dict | None = None
    base_dir: Path = Path(".")

    def resolve(self, rel: str) -> Path:
        return (self.base_dir / rel).resolve()


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for f in ("embeddings", "token_table", "vocabulary"):
        if f not in raw:
            raise ConfigError(f"{path}: missing manifest field {f!r}")
    labelings = tuple(
        LabelingRef(str(e["name"]), str(e["path"]), int(e["k"]))
        for e in raw.get("labelings", [])
    )
    return DatasetManifest(
        embeddings=raw["embeddings"],
        token_table=raw["token_table"],
        vocabulary=raw["vocabulary"],
        labelings=labelings,
        encoder=raw.get("encoder"),
        base_dir=path.parent,
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "embeddings": manifest.embeddings,
        "token_table": manifest.token_table,
        "vocabulary": manifest.vocabulary,
        "labelings": [
            {"name": l.name, "path": l.path, "k": l.k} for l in manifest.labelings
        ],
    }
    if manifest.encoder is not None:
        payload["encoder"] = manifest.encoder
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


@dataclass
class LoadedDataset:
    images: list[UnitVector]
    table: TokenTable
    truths: dict[str, Labeling]
    ks: dict[str, int]
    manifest: DatasetManifest


def load_dataset(manifest: DatasetManifest) -> LoadedDataset:
    image_matrix = read_embedding_matrix(manifest.resolve(manifest.embeddings))
    images = [normalize(row) for row in np.asarray(image_matrix, dtype=np.float64)]
    vocab = read_vocabulary(manifest.resolve(manifest.vocabulary))
    table = TokenTable(vocab, read_embedding_matrix(manifest.resolve(manifest.token_table)))
    truths: dict[str, Labeling] = {}
    ks: dict[str, int] = {}
    for ref in manifest.labelings:
        labels = read_labeling(manifest.resolve(ref.path))
        if len(labels) != len(images):
            raise ConfigError(
                f"labeling {ref.name!r} has {len(labels)} entries for {len(images)} images"
            )
        truths[ref.name] = Labeling(labels, ref.k)
        ks[ref.name] = ref.k
    return LoadedDataset(images, table, truths, ks, manifest)


@dataclass(frozen=True)
class RunConfig:
    manifest_path: str
    concept_paths: tuple[str, ...]
    hyper: HyperParams = HyperParams()
    grids: dict | None = None
    grid_scope: str = "concept"
    backend: str = "builtin"
    seed: int = 0
    out_dir: str = "out"
    parallel: int = 1
    restarts: int = DEFAULT_RESTARTS
    concept_k: dict[str, int] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def resolve(self, rel: str) -> Path:
        return (self.base_dir / rel).resolve()


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raw.update(overrides or {})
    if "manifest" not in raw or "concepts" not in raw:
        raise ConfigError(f"{path}: config needs 'manifest' and 'concepts' fields")
    hyper_fields = raw.get("hyper", {})
    try:
        hyper = HyperParams(**hyper_fields)
    except TypeError as exc:
        raise ConfigError(f"{path}: bad hyper section: {exc}") from exc
    cfg = RunConfig(
        manifest_path=str(raw["manifest"]),
        concept_paths=tuple(str(p) for p in raw["concepts"]),
        hyper=hyper,
        grids=raw.get("grids"),
        grid_scope=raw.get("grid_scope", "concept"),
        backend=str(raw.get("backend", "builtin")),
        seed=int(raw.get("seed", 0)),
        out_dir=str(raw.get("out", "out")),
        parallel=int(raw.get("parallel", 1)),
        restarts=int(raw.get("restarts", DEFAULT_RESTARTS)),
        concept_k={str(k): int(v) for k, v in raw.get("concept_k", {}).items()},
        base_dir=path.parent,
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if not cfg.concept_paths:
        raise ConfigError("no concepts configured")
    missing = [p for p in (cfg.manifest_path, *cfg.concept_paths) if not cfg.resolve(p).exists()]
    if missing:
        raise ConfigError(f"referenced files do not exist: {missing}")
    if cfg.grid_scope not in ("concept", "dataset"):
        raise ConfigError(f"unknown grid scope {cfg.grid_scope!r}")


def build_backend(spec: str, manifest: DatasetManifest, dim: int):
    if spec == "builtin":
        enc = manifest.encoder or {}
        return BuiltinEncoder(
            dim=int(enc.get("dim", dim)),
            seed=int(enc.get("seed", 0)),
            max_len=int(enc.get("max_len", 64)),
        )
    if spec.startswith("remote:"):
        return RemoteEncoder(spec.split(":", 1)[1])
    raise ConfigError(f"unknown backend {spec!r}")


@dataclass
class ConceptResult:
    concept: str
    restarts: RestartsResult
    proxies: np.ndarray
    references: list
    mean_final_loss: float
    metrics: dict[str, dict[str, float]]  # truth name -> metric name -> value


@dataclass
class PipelineResult:
    concepts: list[ConceptResult]
    errors: dict[str, str]
    out_dir: Path


def _concept_metrics(restarts: RestartsResult, truths: dict[str, Labeling]) -> dict:
    metrics = {}
    best = restarts.best.assignments
    for name, truth in truths.items():
        nmis = [nmi(run.assignments, truth) for run in restarts.runs]
        ris = [rand_index(run.assignments, truth) for run in restarts.runs]
        metrics[name] = {
            "nmi_mean": float(np.mean(nmis)),
            "nmi_best": nmi(best, truth),
            "ri_mean": float(np.mean(ris)),
            "ri_best": rand_index(best, truth),
        }
    return metrics


def _spec_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    validate_config(cfg)
    manifest = load_manifest(cfg.resolve(cfg.manifest_path))
    data = load_dataset(manifest)
    dim = data.table.dim
    backend = build_backend(cfg.backend, manifest, dim)
    out = cfg.resolve(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    results: list[ConceptResult] = []
    errors: dict[str, str] = {}
    run_records = []
    for spec_path in cfg.concept_paths:
        spec_file = cfg.resolve(spec_path)
        spec = load_concept_spec(spec_file)
        try:
            result = run_concept(spec, data, backend, cfg)
        except ProxyClustError as exc:
            errors[spec.concept_word] = f"{type(exc).__name__}: {exc}"
            continue
        results.append(result)
        write_embedding_matrix(out / f"proxies_{spec.concept_word}.mmap", result.proxies)
        write_labeling(out / f"labels_{spec.concept_word}.txt",
                       result.restarts.best.assignments.assignments)
        atomic_write_text(
            out / f"references_{spec.concept_word}.txt",
            "".join(r.word + "\n" for r in result.references),
        )
        run_records.append(
            {
                "concept": spec.concept_word,
                "spec_sha256": _spec_hash(spec_file),
                "mean_final_loss": result.mean_final_loss,
            }
        )
    export_report(results, out / "metrics.csv", out / "cross_matrix.csv")
    run_manifest = {
        "seed": cfg.seed,
        "backend": cfg.backend,
        "restarts": cfg.restarts,
        "hyper": {
            "alpha": cfg.hyper.alpha,
            "beta": cfg.hyper.beta,
            "lambda": cfg.hyper.lam,
            "learning_rate": cfg.hyper.learning_rate,
            "weight_decay": cfg.hyper.weight_decay,
            "momentum": cfg.hyper.momentum,
            "iterations": cfg.hyper.iterations,
            "anchor": cfg.hyper.anchor,
        },
        "concepts": run_records,
        "failures": errors,
    }
    atomic_write_text(out / "run_manifest.json",
                      json.dumps(run_manifest, indent=2, sort_keys=True) + "\n")
    return PipelineResult(results, errors, out)


def run_concept(spec: ConceptSpec, data: LoadedDataset, backend, cfg: RunConfig) -> ConceptResult:
    proxies, losses, refs = optimize_all(
        data.images, spec, cfg.hyper, backend, data.table, parallel=cfg.parallel
    )
    k = cfg.concept_k.get(spec.concept_word) or data.ks.get(spec.concept_word)
    if k is None:
        raise ConfigError(
            f"no cluster count for concept {spec.concept_word!r}: add a matching "
            f"ground-truth labeling or a concept_k entry"
        )
    restarts = kmeans_restarts(proxies, k, restarts=cfg.restarts, seed=cfg.seed)
    return ConceptResult(
        concept=spec.concept_word,
        restarts=restarts,
        proxies=proxies,
        references=refs,
        mean_final_loss=float(np.mean(losses)),
        metrics=_concept_metrics(restarts, data.truths),
    )


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def export_report(results: list[ConceptResult], metrics_path, matrix_path=None) -> None:
    """Comma-separated metrics table (all concept x ground-truth pairs,
    mean over restarts and best-restart values) plus the compact
    cross-clustering matrix of best-restart scores."""
    lines = ["concept,clustering,nmi_mean,nmi_best,ri_mean,ri_best,inertia"]
    for res in results:
        for truth_name in sorted(res.metrics):
            m = res.metrics[truth_name]
            lines.append(
                ",".join(
                    [res.concept, truth_name, _fmt(m["nmi_mean"]), _fmt(m["nmi_best"]),
                     _fmt(m["ri_mean"]), _fmt(m["ri_best"]), _fmt(res.restarts.best.inertia)]
                )
            )
    atomic_write_text(metrics_path, "\n".join(lines) + "\n")
    if matrix_path is None:
        return
    truth_names = sorted({t for res in results for t in res.metrics})
    header = "concept," + ",".join(
        f"nmi_{t},ri_{t}" for t in truth_names
    )
    rows = [header]
    for res in results:
        cells = [res.concept]
        for t in truth_names:
            m = res.metrics.get(t)
            cells += [_fmt(m["nmi_best"]), _fmt(m["ri_best"])] if m else ["", ""]
        rows.append(",".join(cells))
    atomic_write_text(matrix_path, "\n".join(rows) + "\n")


@dataclass
class GridSearchResult:
    best: dict[str, HyperParams]  # keyed by concept, or "dataset" for joint scope
    rows: list[tuple]  # (scope key, lr, wd, alpha, beta, mean loss)


def grid_points(grids: dict | None):
    g = dict(default_grids())
    g.update(grids or {})
    for lr, wd, alpha, beta in itertools.product(
        g["learning_rate"], g["weight_decay"], g["alpha"], g["beta"]
    ):
        yield float(lr), float(wd), float(alpha), float(beta)


def grid_search(cfg: RunConfig) -> GridSearchResult:
    """Evaluate each grid point's mean final objective and select the
    minimum-loss point (ties broken by earlier grid order). Ground truth
    is never consulted."""
    validate_config(cfg)
    manifest = load_manifest(cfg.resolve(cfg.manifest_path))
    data = load_dataset(manifest)
    backend = build_backend(cfg.backend, manifest, data.table.dim)
    specs = [load_concept_spec(cfg.resolve(p)) for p in cfg.concept_paths]
    points = list(grid_points(cfg.grids))
    if not points:
        raise ConfigError("empty hyperparameter grid")

    rows: list[tuple] = []
    losses: dict[str, list[float]] = {s.concept_word: [] for s in specs}
    for lr, wd, alpha, beta in points:
        hyper = replace(cfg.hyper, learning_rate=lr, weight_decay=wd, alpha=alpha, beta=beta)
        for spec in specs:
            try:
                _, final_losses, _ = optimize_all(
                    data.images, spec, hyper, backend, data.table, parallel=cfg.parallel
                )
                mean_loss = float(np.mean(final_losses))
            except NumericalError:
                mean_loss = float("inf")
            losses[spec.concept_word].append(mean_loss)
            rows.append((spec.concept_word, lr, wd, alpha, beta, mean_loss))

    best: dict[str, HyperParams] = {}
    if cfg.grid_scope == "dataset":
        joint = [float(np.mean([losses[s.concept_word][i] for s in specs]))
                 for i in range(len(points))]
        idx = _argmin_first(joint)
        lr, wd, alpha, beta = points[idx]
        best["dataset"] = replace(cfg.hyper, learning_rate=lr, weight_decay=wd,
                                  alpha=alpha, beta=beta)
    else:
        for spec in specs:
            idx = _argmin_first(losses[spec.concept_word])
            lr, wd, alpha, beta = points[idx]
            best[spec.concept_word] = replace(cfg.hyper, learning_rate=lr, weight_decay=wd,
                                              alpha=alpha, beta=beta)
    if all(not np.isfinite(min(v)) for v in losses.values()):
        raise NumericalError("every grid point diverged")
    return GridSearchResult(best, rows)


def _argmin_first(values: list[float]) -> int:
    best, idx = float("inf"), 0
    for i, v in enumerate(values):
        if v < best:
            best, idx = v, i
    return idx
