"""Hot numeric kernels.

The built-in encoder forward pass, its analytic proxy gradient, and the
fused per-image optimization loop live here. Each kernel is written as a
plain numpy function and JIT-compiled with numba unless the environment
variable PROXYCLUST_NO_NUMBA is set (any non-empty value), in which case
the pure-numpy path runs instead. Both paths execute the same statements
in the same order. `benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import NormalizationError, NumericalError

USE_NUMBA = not os.environ.get("PROXYCLUST_NO_NUMBA")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


def backend_mode() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _encode_core(E, W1, b1, W2, b2):
    # E already carries the positional vectors; rows are tokens.
    p = np.zeros(E.shape[1])
    for s in range(E.shape[0]):
        p += E[s]
    p /= E.shape[0]
    hdn = np.tanh(np.dot(W1, p) + b1)
    return np.dot(W2, hdn) + b2


def _loss_grad_core(E, W1, b1, W2, b2, image):
    p = np.zeros(E.shape[1])
    for s in range(E.shape[0]):
        p += E[s]
    p /= E.shape[0]
    hdn = np.tanh(np.dot(W1, p) + b1)
    o = np.dot(W2, hdn) + b2
    no = math.sqrt(np.dot(o, o))
    ohat = o / no
    # J_norm = (I - ohat ohat^T)/||o|| is symmetric.
    q = (image - ohat * np.dot(ohat, image)) / no
    g = np.dot(W1.T, (1.0 - hdn * hdn) * np.dot(W2.T, q))
    return -g / E.shape[0]


def _objective_core(w, p_base, inv_len, W1, b1, W2, b2, image, z, U, target,
                    alpha, beta, wd):
    """Full objective and gradient at w. Returns (loss, grad, out_norm)."""
    d = w.shape[0]
    p = p_base + w * inv_len
    hdn = np.tanh(np.dot(W1, p) + b1)
    o = np.dot(W2, hdn) + b2
    no = math.sqrt(np.dot(o, o))
    ohat = o / no
    loss = -np.dot(image, ohat)
    q = (image - ohat * np.dot(ohat, image)) / no
    grad = -(np.dot(W1.T, (1.0 - hdn * hdn) * np.dot(W2.T, q))) * inv_len
    if alpha != 0.0:
        diff = w - z
        loss += alpha * np.dot(diff, diff)
        grad = grad + 2.0 * alpha * diff
    if beta != 0.0 and U.shape[0] > 0:
        logits = np.dot(U, w)
        mx = logits[0]
        for j in range(logits.shape[0]):
            if logits[j] > mx:
                mx = logits[j]
        acc = 0.0
        for j in range(logits.shape[0]):
            acc += math.exp(logits[j] - mx)
        lse = mx + math.log(acc)
        loss += beta * (lse - logits[target])
        soft = np.zeros(d)
        for j in range(logits.shape[0]):
            soft += math.exp(logits[j] - lse) * U[j]
        grad = grad + beta * (soft - U[target])
    if wd != 0.0:
        loss += wd * np.dot(w, w)
        grad = grad + 2.0 * wd * w
    return loss, grad, no


def _optimize_core(p_base, inv_len, W1, b1, W2, b2, image, z, U, target,
                   alpha, beta, wd, lr, beta1, beta2, eps, iters):
    """Adam from w = z over the full objective. Returns
    (w, initial_loss, final_loss, diverged_iteration or -1)."""
    w = z.copy()
    m = np.zeros(w.shape[0])
    v = np.zeros(w.shape[0])
    loss0, _, _ = _objective_core(w, p_base, inv_len, W1, b1, W2, b2, image,
                                  z, U, target, alpha, beta, wd)
    loss = loss0
    for t in range(1, iters + 1):
        loss, grad, _ = _objective_core(w, p_base, inv_len, W1, b1, W2, b2,
                                        image, z, U, target, alpha, beta, wd)
        if not math.isfinite(loss):
            return w, loss0, loss, t
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        w = w - lr * mhat / (np.sqrt(vhat) + eps)
    loss, _, _ = _objective_core(w, p_base, inv_len, W1, b1, W2, b2, image,
                                 z, U, target, alpha, beta, wd)
    if not math.isfinite(loss):
        return w, loss0, loss, iters
    return w, loss0, loss, -1


if USE_NUMBA:
    _jit = njit(cache=True, nogil=True)
    _encode_core = _jit(_encode_core)
    _loss_grad_core = _jit(_loss_grad_core)
    _objective_core = _jit(_objective_core)
    _optimize_core = _jit(_optimize_core)


def encode_forward(E, W1, b1, W2, b2):
    """Unit-normalized encoder output for a positional-augmented sequence."""
    o = _encode_core(np.ascontiguousarray(E, dtype=np.float64), W1, b1, W2, b2)
    n = float(np.linalg.norm(o))
    if n == 0.0:
        raise NormalizationError("encoder produced a zero vector")
    if not np.isfinite(n):
        raise NumericalError("encoder produced non-finite output")
    return o / n


def loss_grad(E, W1, b1, W2, b2, image):
    g = _loss_grad_core(np.ascontiguousarray(E, dtype=np.float64), W1, b1, W2, b2, image)
    if not np.all(np.isfinite(g)):
        raise NumericalError("analytic gradient is non-finite")
    return g


def optimize_proxy_builtin(p_base, seq_len, W1, b1, W2, b2, image, z, U, target,
                           alpha, beta, wd, lr, beta1, beta2, eps, iters):
    """Fused optimization loop for the built-in encoder. Returns
    (w, initial_loss, final_loss); raises NumericalError on divergence."""
    # Divergence is detected by letting the loss overflow to inf, so the
    # overflow itself must not warn on the pure-numpy path.
    with np.errstate(over="ignore", invalid="ignore"):
        w, loss0, loss, bad = _optimize_core(
            np.ascontiguousarray(p_base, dtype=np.float64), 1.0 / seq_len,
            W1, b1, W2, b2,
            np.ascontiguousarray(image, dtype=np.float64),
            np.ascontiguousarray(z, dtype=np.float64),
            np.ascontiguousarray(U, dtype=np.float64), target,
            float(alpha), float(beta), float(wd), float(lr),
            float(beta1), float(beta2), float(eps), int(iters))
    if bad >= 0:
        raise NumericalError(f"objective diverged at iteration {bad}")
    return w, float(loss0), float(loss)
