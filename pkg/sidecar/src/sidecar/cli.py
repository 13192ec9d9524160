"""Command-line entry points: serve the encode protocol, or batch-embed
image files into the shared matrix format."""

from __future__ import annotations

import sys

import click

from .embed import EmbedError, PixelFeaturizer, embed_images
from .toy import TokenTable, ToyEncoder


@click.group()
def main():
    """Encoder sidecar: encode service and image embedding tool."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
@click.option("--toy-seed", type=int, required=True,
              help="serve the seeded toy encoder (test mode)")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--max-len", type=int, default=64, show_default=True)
def serve(host, port, toy_seed, vocab_path, table_path, max_len):
    """Serve /v1/handshake and /v1/encode."""
    import uvicorn

    from .app import create_app

    table = TokenTable.from_files(vocab_path, table_path)
    encoder = ToyEncoder(table, seed=toy_seed, max_len=max_len)
    click.echo(f"serving {encoder.model_id} (dim {encoder.dim}) on {host}:{port}")
    uvicorn.run(create_app(encoder), host=host, port=port, log_level="warning")


@main.command(name="embed-images")
@click.argument("images", nargs=-1, required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def embed_images_cmd(images, out_path, index_path, dim, seed):
    """Embed image files into a unit-row matrix file plus an index file."""
    model = PixelFeaturizer(dim=dim, seed=seed)
    try:
        matrix, index = embed_images(images, out_path, index_path, model)
    except EmbedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {out_path} "
               f"({len(index['skipped'])} skipped)")


if __name__ == "__main__":
    main()
