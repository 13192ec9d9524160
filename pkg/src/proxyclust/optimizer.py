"""Full objective assembly and per-image Adam optimization of proxies.

The objective is

    L(w) = -<image, encode(prompt with w)>
           + alpha * ||w - z||^2
           + beta * (-log softmax_target(U w))
           + weight_decay * ||w||^2

where z is the selected reference anchor and U stacks the contrastive
concept token embeddings. With beta = 0 the contrastive term vanishes;
with alpha = beta = 0 the loss is the bare negative similarity. Passing
the concept word's own token embedding as the anchor gives the
concept-level variant. Weight decay enters both the value and the
gradient (classic L2) so analytic and finite-difference gradients agree.

Each image is its own single-sample problem; one "epoch" is one gradient
step. optimize_all is an embarrassingly parallel map over images.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .concepts import ConceptSpec, SelectedReference, select_reference, validate_candidates
from .embedding import TokenSequence, TokenTable, UnitVector, render_prompt
from .encoder import BuiltinEncoder, loss_grad_wrt_proxy, similarity_loss
from .errors import ConfigError, DimensionError, NumericalError

ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 0.4
    beta: float = 0.3
    lam: float = 1.0  # constraint radius; provenance only, fixed at 1
    learning_rate: float = 0.005
    weight_decay: float = 0.0
    momentum: float = 0.9  # Adam beta_1
    iterations: int = 1000
    seed: int = 0
    anchor: str = "reference"  # "reference" (selected word) or "concept"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.anchor not in ("reference", "concept"):
            raise ConfigError(f"unknown anchor mode {self.anchor!r}")


@dataclass(frozen=True)
class ProxyState:
    w: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    reference: SelectedReference | None = None
    initial_loss: float | None = None
    final_loss: float | None = None

    @staticmethod
    def initialized(anchor: np.ndarray, reference: SelectedReference | None = None) -> "ProxyState":
        anchor = np.asarray(anchor, dtype=np.float64)
        zeros = np.zeros_like(anchor)
        return ProxyState(anchor.copy(), zeros, zeros.copy(), 0, reference)


@dataclass(frozen=True)
class ObjectiveContext:
    image: UnitVector
    prompt: TokenSequence
    reference_embedding: np.ndarray
    concept_embeddings: np.ndarray  # (J, d); may be empty
    target_index: int  # index of the user's concept among the rows, -1 if none
    hyper: HyperParams
    backend: object

    def __post_init__(self):
        d = self.image.dim
        U = np.asarray(self.concept_embeddings, dtype=np.float64)
        if U.size == 0:
            U = U.reshape(0, d)
        object.__setattr__(self, "concept_embeddings", U)
        object.__setattr__(
            self, "reference_embedding", np.asarray(self.reference_embedding, dtype=np.float64)
        )
        if self.prompt.slot_index is None:
            raise ConfigError("prompt has no proxy slot")
        if self.reference_embedding.shape != (d,) or self.prompt.dim != d:
            raise DimensionError("context embeddings disagree on dimension")
        if U.shape[0] and U.shape[1] != d:
            raise DimensionError("concept embeddings disagree on dimension")
        if U.shape[0] and not 0 <= self.target_index < U.shape[0]:
            raise ConfigError(f"target index {self.target_index} out of range")

    @property
    def contrastive_active(self) -> bool:
        return self.hyper.beta != 0.0 and self.concept_embeddings.shape[0] > 0


def contrastive_regularizer(w: np.ndarray, concept_embeddings: np.ndarray,
                            target_index: int) -> float:
    """-log softmax probability of the target concept under logits U w,
    computed with the stable log-sum-exp form. Always >= 0."""
    U = np.asarray(concept_embeddings, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 1:
        raise ConfigError("need at least one concept embedding")
    if not 0 <= target_index < U.shape[0]:
        raise ConfigError(f"target index {target_index} out of range")
    logits = U @ np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits in contrastive regularizer")
    mx = float(np.max(logits))
    lse = mx + float(np.log(np.sum(np.exp(logits - mx))))
    return lse - float(logits[target_index])


def objective(w: np.ndarray, ctx: ObjectiveContext) -> float:
    w = np.asarray(w, dtype=np.float64)
    h = ctx.hyper
    loss = similarity_loss(ctx.backend, ctx.prompt, w, ctx.image)
    if h.alpha != 0.0:
        diff = w - ctx.reference_embedding
        loss += h.alpha * float(diff @ diff)
    if ctx.contrastive_active:
        loss += h.beta * contrastive_regularizer(w, ctx.concept_embeddings, ctx.target_index)
    if h.weight_decay != 0.0:
        loss += h.weight_decay * float(w @ w)
    return loss


def objective_grad(w: np.ndarray, ctx: ObjectiveContext) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    h = ctx.hyper
    grad = loss_grad_wrt_proxy(ctx.backend, ctx.prompt, w, ctx.image)
    if h.alpha != 0.0:
        grad = grad + 2.0 * h.alpha * (w - ctx.reference_embedding)
    if ctx.contrastive_active:
        U = ctx.concept_embeddings
        logits = U @ w
        mx = np.max(logits)
        p = np.exp(logits - mx)
        p /= p.sum()
        grad = grad + h.beta * (U.T @ p - U[ctx.target_index])
    if h.weight_decay != 0.0:
        grad = grad + 2.0 * h.weight_decay * w
    return grad


def adam_step(state: ProxyState, grad: np.ndarray, hyper: HyperParams) -> ProxyState:
    """One bias-corrected Adam update (beta1 = momentum, beta2 = 0.999)."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.w.shape:
        raise DimensionError(f"gradient shape {grad.shape} != state shape {state.w.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient in Adam step")
    t = state.step_count + 1
    b1, b2 = hyper.momentum, ADAM_BETA2
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    mhat = m / (1.0 - b1**t)
    vhat = v / (1.0 - b2**t)
    w = state.w - hyper.learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)
    return replace(state, w=w, m=m, v=v, step_count=t)


def _optimize_generic(ctx: ObjectiveContext, reference: SelectedReference | None) -> ProxyState:
    state = ProxyState.initialized(ctx.reference_embedding, reference)
    initial = objective(state.w, ctx)
    loss = initial
    for t in range(ctx.hyper.iterations):
        loss = objective(state.w, ctx)
        if not np.isfinite(loss):
            raise NumericalError(f"objective diverged at iteration {t + 1}")
        state = adam_step(state, objective_grad(state.w, ctx), ctx.hyper)
    final = objective(state.w, ctx)
    if not np.isfinite(final):
        raise NumericalError(f"objective diverged at iteration {ctx.hyper.iterations}")
    return replace(state, initial_loss=initial, final_loss=final)


def _optimize_builtin(ctx: ObjectiveContext, reference: SelectedReference | None) -> ProxyState:
    enc: BuiltinEncoder = ctx.backend
    wts = enc.weights
    seq = ctx.prompt
    S = len(seq)
    # Pooled contribution of everything except the learnable slot entry.
    full = seq.embeddings + wts.positional[:S]
    p_base = (full.sum(axis=0) - seq.embeddings[seq.slot_index]) / S
    h = ctx.hyper
    U = ctx.concept_embeddings
    target = ctx.target_index if ctx.contrastive_active else -1
    beta = h.beta if ctx.contrastive_active else 0.0
    w, initial, final = kernels.optimize_proxy_builtin(
        p_base, S, wts.W1, wts.b1, wts.W2, wts.b2, ctx.image.values,
        ctx.reference_embedding, U if beta != 0.0 else U[:0], target,
        h.alpha, beta, h.weight_decay, h.learning_rate, h.momentum,
        ADAM_BETA2, ADAM_EPS, h.iterations)
    zeros = np.zeros_like(w)
    return ProxyState(w, zeros, zeros.copy(), h.iterations, reference,
                      initial_loss=initial, final_loss=final)


def optimize_proxy(image_index: int, ctx: ObjectiveContext,
                   reference: SelectedReference | None = None) -> ProxyState:
    """Run the full optimization for one image, starting from the anchor
    embedding. Deterministic given the context."""
    if isinstance(ctx.backend, BuiltinEncoder) and ctx.hyper.iterations > 0:
        return _optimize_builtin(ctx, reference)
    return _optimize_generic(ctx, reference)


def build_context(image: UnitVector, spec: ConceptSpec, anchor_embedding: np.ndarray,
                  hyper: HyperParams, backend, table: TokenTable) -> ObjectiveContext:
    prompt = render_prompt(spec.prompt_template, spec.concept_word, table)
    if spec.contrastive_concepts:
        U = np.stack([table.lookup(c) for c in spec.contrastive_concepts])
        target = spec.target_index
    else:
        U = np.zeros((0, image.dim))
        target = -1
    return ObjectiveContext(image, prompt, anchor_embedding, U, target, hyper, backend)


def optimize_all(images: list[UnitVector], spec: ConceptSpec, hyper: HyperParams,
                 backend, table: TokenTable, parallel: int = 1):
    """Optimize one proxy per image. Returns (proxies, final_losses,
    references); row i depends only on image i, so parallel and sequential
    execution agree exactly."""
    if not images:
        raise ConfigError("image list must be non-empty")
    validate_candidates(spec, table)
    if hyper.anchor == "concept" and spec.concept_word not in table:
        raise ConfigError(f"concept word {spec.concept_word!r} not in vocabulary")

    def run(i: int) -> ProxyState:
        ref = select_reference(i, images[i], spec, backend, table)
        anchor = table.lookup(spec.concept_word) if hyper.anchor == "concept" else ref.token_embedding
        ctx = build_context(images[i], spec, anchor, hyper, backend, table)
        return optimize_proxy(i, ctx, ref)

    # Warm the per-spec candidate cache before fanning out.
    select_reference(0, images[0], spec, backend, table)
    failures: list[str] = []
    states: list[ProxyState | None] = [None] * len(images)
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = pool.map(_guarded(run, failures), range(len(images)))
            for i, st in enumerate(results):
                states[i] = st
    else:
        for i in range(len(images)):
            states[i] = _guarded(run, failures)(i)
    if failures:
        raise NumericalError("per-image optimization failed: " + "; ".join(failures))
    proxies = np.stack([st.w for st in states])
    losses = np.array([st.final_loss for st in states])
    refs = [st.reference for st in states]
    return proxies, losses, refs


def _guarded(fn, failures: list[str]):
    def wrapped(i: int):
        try:
            return fn(i)
        except NumericalError as exc:
            failures.append(f"image {i}: {exc}")
            return None

    return wrapped
