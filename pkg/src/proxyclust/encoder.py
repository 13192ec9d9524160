"""Frozen text-encoder backends.

Three interchangeable backends implement the same contract: map a token
sequence (with an optional learnable proxy in one slot) to a unit-norm
embedding, and, for the similarity loss, a gradient with respect to the
proxy slot.

* BuiltinEncoder: a fully specified mean-pool + 2-layer tanh network with
  analytic gradients, generated deterministically from a seed.
* FiniteDiffBackend: wraps any forward-only backend and supplies the
  gradient via central differences.
* RemoteEncoder: HTTP client for the sidecar protocol (POST /v1/handshake,
  POST /v1/encode).

Backends are read-only after construction and tolerate concurrent calls.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .embedding import TokenSequence, UnitVector, normalize
from .errors import (
    BackendUnavailableError,
    ConfigError,
    DimensionError,
    NumericalError,
)

DEFAULT_FD_STEP = 1e-4


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    """Interleaved sin/cos position vectors with base 10000, scaled by
    1/sqrt(dim) so they match the magnitude of token-table embeddings
    (which are uniform in [-1/sqrt(d), 1/sqrt(d)])."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (idx // 2)) / dim)
    enc = np.empty((max_len, dim), dtype=np.float64)
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc / np.sqrt(dim)


class BuiltinEncoderWeights:
    """Frozen weights of the built-in encoder. Identical seed implies
    bit-identical weights; the generation order (W1, b1, W2, b2) is part
    of the contract relied on by the sidecar's toy mode."""

    def __init__(self, dim: int, seed: int, max_len: int = 64):
        rng = np.random.default_rng(seed)
        lim = np.sqrt(3.0 / dim)
        self.W1 = rng.uniform(-lim, lim, size=(dim, dim))
        self.b1 = rng.uniform(-0.1, 0.1, size=dim)
        self.W2 = rng.uniform(-lim, lim, size=(dim, dim))
        self.b2 = rng.uniform(-0.1, 0.1, size=dim)
        self.positional = sinusoidal_positions(max_len, dim)
        for a in (self.W1, self.b1, self.W2, self.b2, self.positional):
            a.setflags(write=False)
        self.dim = dim
        self.seed = seed
        self.max_len = max_len


class BuiltinEncoder:
    """Deterministic differentiable stand-in for a pretrained text tower:
    e_s = embedding_s + positional_s; p = mean_s e_s;
    hdn = tanh(W1 p + b1); o = W2 hdn + b2; output = o / ||o||."""

    kind = "builtin"
    grad_supported = True

    def __init__(self, dim: int = 64, seed: int = 0, max_len: int = 64,
                 weights: BuiltinEncoderWeights | None = None):
        self.weights = weights or BuiltinEncoderWeights(dim, seed, max_len)
        self.dim = self.weights.dim
        self.max_len = self.weights.max_len

    def _check(self, seq: TokenSequence):
        if seq.dim != self.dim:
            raise DimensionError(f"sequence dim {seq.dim} != encoder dim {self.dim}")
        if len(seq) > self.max_len:
            raise DimensionError(f"sequence length {len(seq)} exceeds max {self.max_len}")

    def _pooled(self, embeddings: np.ndarray) -> np.ndarray:
        return np.mean(embeddings + self.weights.positional[: embeddings.shape[0]], axis=0)

    def encode(self, seq: TokenSequence, proxy: np.ndarray | None = None) -> UnitVector:
        self._check(seq)
        if proxy is not None:
            seq = seq.with_slot(proxy)
        w = self.weights
        out = kernels.encode_forward(seq.embeddings + w.positional[: len(seq)],
                                     w.W1, w.b1, w.W2, w.b2)
        return UnitVector(out)

    def loss_grad(self, seq: TokenSequence, proxy: np.ndarray, image: UnitVector) -> np.ndarray:
        """Exact gradient of -<image, encode(seq with proxy)> w.r.t. the proxy."""
        self._check(seq)
        if seq.slot_index is None:
            raise DimensionError("sequence has no proxy slot")
        filled = seq.with_slot(proxy)
        w = self.weights
        return kernels.loss_grad(filled.embeddings + w.positional[: len(seq)],
                                 w.W1, w.b1, w.W2, w.b2, image.values)


class FiniteDiffBackend:
    """Adds a central-difference gradient to any forward-only backend."""

    kind = "finite-difference"
    grad_supported = True

    def __init__(self, inner, step: float = DEFAULT_FD_STEP):
        if step <= 0:
            raise ConfigError(f"finite-difference step must be positive, got {step}")
        self.inner = inner
        self.step = step
        self.dim = inner.dim

    def encode(self, seq: TokenSequence, proxy: np.ndarray | None = None) -> UnitVector:
        return self.inner.encode(seq, proxy)

    def loss_grad(self, seq: TokenSequence, proxy: np.ndarray, image: UnitVector) -> np.ndarray:
        return finite_diff_grad(self.inner, seq, proxy, image, self.step)


class RemoteEncoder:
    """Client for the sidecar encode protocol. Stateless request-response;
    the underlying session pools connections."""

    kind = "remote"
    grad_supported = False

    def __init__(self, endpoint: str, session=None, timeout: float = 30.0):
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        info = self._post("/v1/handshake", {})
        try:
            self.dim = int(info["dim"])
            self.max_len = int(info["max_len"])
            self.remote_grad_supported = bool(info["grad_supported"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailableError(f"malformed handshake from {endpoint}: {exc}") from exc

    def _post(self, route: str, body: dict) -> dict:
        import requests

        try:
            resp = self._session.post(self.endpoint + route, json=body, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"remote encoder {self.endpoint}: {exc}") from exc

    def encode(self, seq: TokenSequence, proxy: np.ndarray | None = None) -> UnitVector:
        if seq.words is None:
            raise ConfigError("remote backend needs the word form of the sequence")
        body = {
            "tokens": list(seq.words),
            "slot_index": seq.slot_index,
            "proxy_embedding": None if proxy is None else [float(x) for x in proxy],
        }
        reply = self._post("/v1/encode", body)
        emb = np.asarray(reply.get("embedding"), dtype=np.float64)
        if emb.ndim != 1 or emb.shape[0] != int(reply.get("dim", -1)):
            raise BackendUnavailableError(f"malformed encode reply from {self.endpoint}")
        return normalize(emb)


def encode(backend, seq: TokenSequence, proxy: np.ndarray | None = None) -> UnitVector:
    return backend.encode(seq, proxy)


def similarity_loss(backend, seq: TokenSequence, proxy: np.ndarray, image: UnitVector) -> float:
    """-<image, encode(seq with the slot filled by proxy)>."""
    out = backend.encode(seq, proxy)
    if out.dim != image.dim:
        raise DimensionError(f"encoder dim {out.dim} != image dim {image.dim}")
    return -float(np.dot(image.values, out.values))


def loss_grad_wrt_proxy(backend, seq: TokenSequence, proxy: np.ndarray,
                        image: UnitVector) -> np.ndarray:
    if getattr(backend, "grad_supported", False):
        return backend.loss_grad(seq, proxy, image)
    return finite_diff_grad(backend, seq, proxy, image, DEFAULT_FD_STEP)


def central_difference(f, w: np.ndarray, step: float) -> np.ndarray:
    """Per-coordinate central difference (f(w + d e_j) - f(w - d e_j)) / 2d;
    2 dim(w) evaluations of f."""
    if step <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {step}")
    w = np.asarray(w, dtype=np.float64)
    grad = np.empty_like(w)
    probe = w.copy()
    for j in range(w.shape[0]):
        probe[j] = w[j] + step
        hi = f(probe)
        probe[j] = w[j] - step
        lo = f(probe)
        probe[j] = w[j]
        grad[j] = (hi - lo) / (2.0 * step)
    if not np.all(np.isfinite(grad)):
        raise NumericalError("finite-difference gradient is non-finite")
    return grad


def finite_diff_grad(backend, seq: TokenSequence, proxy: np.ndarray, image: UnitVector,
                     step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference gradient of the similarity loss; 2d forward calls."""
    return central_difference(
        lambda p: similarity_loss(backend, seq, p, image), proxy, step
    )
