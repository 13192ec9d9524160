"""Command-line interface.

Exit codes: 0 success, 2 configuration/input error, 3 numerical error,
4 backend unavailable.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import bounds
from .clustering import Labeling, nmi, rand_index
from .concepts import load_concept_spec, select_reference
from .errors import (
    BackendUnavailableError,
    ConfigError,
    FormatError,
    IoError,
    NumericalError,
    ProxyClustError,
    TheoremViolation,
)
from .matrixio import read_labeling
from .pipeline import (
    build_backend,
    grid_search,
    load_dataset,
    load_manifest,
    load_run_config,
    run_pipeline,
)
from .synth import SyntheticSpec, generate_synthetic

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BACKEND = 4


def _exit_code(exc: ProxyClustError) -> int:
    if isinstance(exc, BackendUnavailableError):
        return EXIT_BACKEND
    if isinstance(exc, (NumericalError, TheoremViolation)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, FormatError, IoError)):
        return EXIT_CONFIG
    return EXIT_CONFIG


def _run(fn):
    try:
        fn()
    except ProxyClustError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


def _config_overrides(seed, backend, out, parallel):
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if backend is not None:
        overrides["backend"] = backend
    if out is not None:
        overrides["out"] = out
    if parallel is not None:
        overrides["parallel"] = parallel
    return overrides


config_opt = click.option("--config", "config_path", required=True, type=click.Path())
seed_opt = click.option("--seed", type=int, default=None)
backend_opt = click.option("--backend", type=str, default=None, help="builtin or remote:URL")
out_opt = click.option("--out", type=click.Path(), default=None)
parallel_opt = click.option("--parallel", type=int, default=None)


@click.group()
def main():
    """Interest-conditioned multiple clustering via learned proxy embeddings."""


@main.command()
@config_opt
@seed_opt
@backend_opt
@out_opt
@parallel_opt
def cluster(config_path, seed, backend, out, parallel):
    """Run the full pipeline: select, optimize, cluster, score, report."""

    def go():
        cfg = load_run_config(config_path, _config_overrides(seed, backend, out, parallel))
        result = run_pipeline(cfg)
        for res in result.concepts:
            click.echo(f"concept {res.concept}: mean final loss {res.mean_final_loss:.6f}")
            for truth, m in sorted(res.metrics.items()):
                click.echo(
                    f"  vs {truth}: nmi mean {m['nmi_mean']:.4f} best {m['nmi_best']:.4f}, "
                    f"ri mean {m['ri_mean']:.4f} best {m['ri_best']:.4f}"
                )
        for concept, msg in sorted(result.errors.items()):
            click.echo(f"concept {concept} failed: {msg}", err=True)
        click.echo(f"outputs written to {result.out_dir}")
        if result.errors and not result.concepts:
            raise NumericalError("every concept failed")

    _run(go)


@main.command(name="grid-search")
@config_opt
@seed_opt
@backend_opt
@parallel_opt
def grid_search_cmd(config_path, seed, backend, parallel):
    """Search hyperparameters by mean final loss (unsupervised)."""

    def go():
        cfg = load_run_config(config_path, _config_overrides(seed, backend, None, parallel))
        result = grid_search(cfg)
        for key, hyper in sorted(result.best.items()):
            click.echo(
                f"{key}: lr={hyper.learning_rate} wd={hyper.weight_decay} "
                f"alpha={hyper.alpha} beta={hyper.beta}"
            )

    _run(go)


@main.command(name="select-ref")
@config_opt
@seed_opt
@backend_opt
def select_ref(config_path, seed, backend):
    """Print each image's selected reference word per concept."""

    def go():
        cfg = load_run_config(config_path, _config_overrides(seed, backend, None, None))
        manifest = load_manifest(cfg.resolve(cfg.manifest_path))
        data = load_dataset(manifest)
        be = build_backend(cfg.backend, manifest, data.table.dim)
        for spec_path in cfg.concept_paths:
            spec = load_concept_spec(cfg.resolve(spec_path))
            click.echo(f"concept {spec.concept_word}:")
            for i, image in enumerate(data.images):
                ref = select_reference(i, image, spec, be, data.table)
                click.echo(f"  {i}\t{ref.word}\t{ref.score:.6f}")

    _run(go)


@main.command(name="verify-bound")
@click.option("--trials", type=int, default=10_000)
@click.option("--seed", type=int, default=0)
def verify_bound(trials, seed):
    """Check the discrete-reference error bound on the standard family battery."""

    def go():
        families = bounds.standard_family_battery()
        worst = 0.0
        for i, family in enumerate(families):
            report = bounds.verify_theorem(family, trials, seed=seed + i)
            worst = max(worst, report.max_gap_ratio)
            click.echo(f"family {i}: max gap ratio {report.max_gap_ratio:.6g}, "
                       f"nearest dominates {report.nearest_dominates}")
        click.echo(f"all {len(families)} families hold; worst ratio {worst:.6g}")

    _run(go)


@main.command()
@click.option("--n", type=int, default=300)
@click.option("--d", type=int, default=64)
@click.option("--noise", type=float, default=0.05)
@click.option("--seed", type=int, default=0)
@click.option("--aspects", type=str, default=None,
              help='JSON object, e.g. {"color": ["red", "green"], ...}')
@click.option("--out", type=click.Path(), required=True)
def synth(n, d, noise, seed, aspects, out):
    """Generate the synthetic multi-aspect dataset."""

    def go():
        kwargs = {}
        if aspects:
            try:
                parsed = json.loads(aspects)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad --aspects JSON: {exc}") from exc
            kwargs["aspects"] = {str(k): tuple(v) for k, v in parsed.items()}
        spec = SyntheticSpec(n=n, d=d, noise=noise, seed=seed, **kwargs)
        manifest = generate_synthetic(spec, out)
        click.echo(f"wrote dataset with {n} images, {len(manifest.labelings)} aspects to {out}")

    _run(go)


@main.command()
@click.option("--pred", "pred_path", required=True, type=click.Path())
@click.option("--truth", "truth_path", required=True, type=click.Path())
def metrics(pred_path, truth_path):
    """Score a predicted labeling file against a ground-truth labeling file."""

    def go():
        pred = Labeling.from_assignments(read_labeling(pred_path))
        truth = Labeling.from_assignments(read_labeling(truth_path))
        click.echo(f"nmi: {nmi(pred, truth):.6f}")
        click.echo(f"rand_index: {rand_index(pred, truth):.6f}")

    _run(go)


if __name__ == "__main__":
    main()
