"""Encode service and batch image featurizer for the proxy-clustering
pipeline. Talks to the main package only through its published external
interfaces: the HTTP encode protocol and the binary matrix file format."""

from .formats import read_matrix, read_vocabulary, write_matrix, write_vocabulary
from .toy import ToyEncoder, TokenTable
from .app import create_app
from .embed import embed_images

__version__ = "0.1.0"
