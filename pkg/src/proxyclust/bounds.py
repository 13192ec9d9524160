"""Empirical verification of the discrete-reference error bound.

A pair of scalar functions (h_prime, H) agreeing on a discrete token set
is "admissible". For such pairs the discrepancy |h'(w) - H(w)| at any w
is bounded by (L_h + L_H) * |t - w| for every token t, and the nearest
token gives the tightest such bound. Lipschitz constants are estimated
by sampling, which yields lower bounds; the harness inflates estimates
by 10% and treats a violation under inflated constants as the failure
signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import BuiltinEncoder
from .embedding import TokenSequence, TokenTable
from .errors import ConfigError, TheoremViolation

ADMISSIBILITY_TOL = 1e-9
INFLATION = 1.1


@dataclass
class ScalarFamily:
    """An admissible (h', H) pair on a finite token grid."""

    h_prime: object  # vectorized scalar function
    H: object
    token_set: np.ndarray
    domain: tuple[float, float]
    L_h: float | None = None
    L_H: float | None = None

    def __post_init__(self):
        self.token_set = np.sort(np.asarray(self.token_set, dtype=np.float64))
        lo, hi = self.domain
        if not lo < hi:
            raise ConfigError(f"degenerate domain [{lo}, {hi}]")
        gaps = np.abs(np.asarray(self.h_prime(self.token_set)) - np.asarray(self.H(self.token_set)))
        if np.max(gaps) > ADMISSIBILITY_TOL:
            raise ConfigError(
                f"family is not admissible: h' and H differ by {np.max(gaps)} on the token set"
            )


@dataclass(frozen=True)
class BoundSample:
    w: float
    gap: float
    arbitrary_bound: float
    nearest_bound: float


@dataclass(frozen=True)
class BoundReport:
    trials: int
    max_gap_ratio: float
    nearest_dominates: bool
    samples: tuple[BoundSample, ...]
    lipschitz_sum: float = 0.0

    def summary(self) -> str:
        lines = [
            f"trials: {self.trials}",
            f"inflated Lipschitz sum: {self.lipschitz_sum:.6g}",
            f"max gap/bound ratio: {self.max_gap_ratio:.6g}",
            f"nearest bound dominates: {self.nearest_dominates}",
        ]
        return "\n".join(lines)


def estimate_lipschitz(f, domain: tuple[float, float], samples: int, seed: int = 0) -> float:
    """Max difference quotient over sampled points (consecutive after
    sorting, so refining the sample never decreases the estimate). This
    is a lower bound on the true constant."""
    lo, hi = domain
    if not lo < hi:
        raise ConfigError(f"degenerate domain [{lo}, {hi}]")
    if samples < 2:
        raise ConfigError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(lo, hi, size=samples))
    fx = np.asarray(f(xs), dtype=np.float64)
    dx = np.diff(xs)
    keep = dx > 0
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(np.diff(fx))[keep] / dx[keep]))


def _constants(family: ScalarFamily, samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    lh = family.L_h if family.L_h is not None else estimate_lipschitz(
        family.h_prime, family.domain, samples, seed)
    lH = family.L_H if family.L_H is not None else estimate_lipschitz(
        family.H, family.domain, samples, seed + 1)
    return lh, lH


def bound_gap(family: ScalarFamily, w: float, t: float,
              constants: tuple[float, float] | None = None) -> tuple[float, float]:
    """(gap, bound) at w with reference token t."""
    if not np.any(np.isclose(family.token_set, t, atol=1e-12, rtol=0)):
        raise ConfigError(f"reference {t} is not in the token set")
    lh, lH = constants if constants is not None else _constants(family)
    gap = abs(float(family.h_prime(np.array([w]))[0]) - float(family.H(np.array([w]))[0]))
    return gap, (lh + lH) * abs(t - w)


def verify_theorem(family: ScalarFamily, trials: int, seed: int = 0,
                   constant_samples: int = 100_000) -> BoundReport:
    """Sample w uniformly; check gap <= nearest bound <= arbitrary bound
    with 10%-inflated estimated constants on every trial."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lh, lH = _constants(family, constant_samples, seed)
    lsum = INFLATION * (lh + lH)
    ws = rng.uniform(family.domain[0], family.domain[1], size=trials)
    t_rand = family.token_set[rng.integers(0, family.token_set.size, size=trials)]
    gaps = np.abs(np.asarray(family.h_prime(ws)) - np.asarray(family.H(ws)))
    d_near = np.min(np.abs(family.token_set[None, :] - ws[:, None]), axis=1)
    near_bounds = lsum * d_near
    arb_bounds = lsum * np.abs(t_rand - ws)
    ratios = np.where(near_bounds > 0, gaps / np.maximum(near_bounds, 1e-300), 0.0)
    samples = tuple(
        BoundSample(float(ws[i]), float(gaps[i]), float(arb_bounds[i]), float(near_bounds[i]))
        for i in range(trials)
    )
    report = BoundReport(
        trials=trials,
        max_gap_ratio=float(np.max(ratios)),
        nearest_dominates=bool(np.all(near_bounds <= arb_bounds + 1e-15)),
        samples=samples,
        lipschitz_sum=lsum,
    )
    if report.max_gap_ratio > 1.0:
        raise TheoremViolation(
            f"gap exceeded inflated bound (ratio {report.max_gap_ratio:.6g})"
        )
    if not report.nearest_dominates:
        raise TheoremViolation("nearest-token bound exceeded the arbitrary-token bound")
    return report


def sin_family(amplitude: float = 1.0, domain: tuple[float, float] = (-3.0, 3.0),
               token_span: int = 4) -> ScalarFamily:
    """The canonical admissible pair h'(w) = w, H(w) = w + a sin(pi w)
    with tokens on the integers."""
    tokens = np.arange(-token_span, token_span + 1, dtype=np.float64)
    return ScalarFamily(
        h_prime=lambda x: np.asarray(x, dtype=np.float64),
        H=lambda x: np.asarray(x, dtype=np.float64) + amplitude * np.sin(np.pi * np.asarray(x)),
        token_set=tokens,
        domain=domain,
        L_h=1.0,
    )


def piecewise_linear_family(seed: int, knots: int = 9,
                            domain: tuple[float, float] = (-3.0, 3.0)) -> ScalarFamily:
    """Random admissible pair: both functions interpolate shared values on
    the integer grid; each has its own random midpoint values."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(domain[0] - 1, domain[1] + 1, knots)
    shared = rng.uniform(-2, 2, size=knots)
    mids = (xs[:-1] + xs[1:]) / 2
    own_a = rng.uniform(-2, 2, size=knots - 1)
    own_b = rng.uniform(-2, 2, size=knots - 1)

    def interp(own):
        grid = np.empty(2 * knots - 1)
        grid[0::2] = shared
        grid[1::2] = own
        pts = np.empty(2 * knots - 1)
        pts[0::2] = xs
        pts[1::2] = mids
        return lambda x: np.interp(np.asarray(x, dtype=np.float64), pts, grid)

    return ScalarFamily(interp(own_a), interp(own_b), xs, domain)


def standard_family_battery(domain: tuple[float, float] = (-3.0, 3.0)) -> list[ScalarFamily]:
    """Admissible families used by the verify-bound command: assorted
    smooth pairs whose difference vanishes on the integer grid, plus
    random piecewise-linear interpolants sharing knot values."""
    tokens = np.arange(-4, 5, dtype=np.float64)

    def smooth(h, modifier):
        return ScalarFamily(
            h_prime=lambda x: np.asarray(h(np.asarray(x, dtype=np.float64)), dtype=np.float64),
            H=lambda x: np.asarray(h(np.asarray(x, dtype=np.float64)), dtype=np.float64)
            + modifier(np.asarray(x, dtype=np.float64)) * np.sin(np.pi * np.asarray(x)),
            token_set=tokens,
            domain=domain,
        )

    families = [
        sin_family(1.0, domain),
        sin_family(0.5, domain),
        sin_family(2.0, domain),
        smooth(lambda x: 2.0 * x, lambda x: np.full_like(x, 0.8)),
        smooth(np.cos, lambda x: np.full_like(x, 1.0)),
        smooth(lambda x: 0.5 * x * x, lambda x: np.cos(x)),
        smooth(np.tanh, lambda x: 0.7 * np.cos(2.0 * x)),
        smooth(lambda x: np.sin(2.0 * x), lambda x: 0.3 * x),
    ]
    families += [piecewise_linear_family(seed) for seed in (11, 12, 13)]
    return families


def encoder_family_check(backend: BuiltinEncoder, perturb_backend: BuiltinEncoder,
                         table: TokenTable, trials: int, seed: int = 0,
                         perturb_scale: float = 0.1, pair_samples: int = 400) -> BoundReport:
    """Multi-dimensional analog on the artifact's own encoder. h' maps a
    proxy vector to the encoder output for a fixed one-slot prompt; H is
    h' plus a perturbation that vanishes at the token embeddings
    (direction from a second seeded encoder, magnitude proportional to
    the distance to the nearest token)."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    d = backend.dim
    tokens = np.asarray(table.embeddings, dtype=np.float64)
    rng = np.random.default_rng(seed)
    seq = TokenSequence(np.zeros((1, d)), slot_index=0)

    def h_prime(w: np.ndarray) -> np.ndarray:
        return backend.encode(seq, w).values

    def nearest_dist(w: np.ndarray) -> float:
        return float(np.min(np.linalg.norm(tokens - w, axis=1)))

    def H(w: np.ndarray) -> np.ndarray:
        if perturb_scale == 0.0:
            return h_prime(w)
        direction = perturb_backend.encode(seq, w).values
        return h_prime(w) + perturb_scale * nearest_dist(w) * direction

    lim = 1.0 / np.sqrt(d)

    def sample_point() -> np.ndarray:
        return rng.uniform(-2 * lim, 2 * lim, size=d)

    def directional_lipschitz(fn) -> float:
        # Probe random directions plus the direction toward the nearest
        # token, where the perturbation magnitude changes fastest.
        best = 0.0
        for i in range(pair_samples):
            a = sample_point()
            if i % 2 == 0:
                u = rng.normal(size=d)
            else:
                t_near = tokens[int(np.argmin(np.linalg.norm(tokens - a, axis=1)))]
                u = a - t_near
                if np.linalg.norm(u) == 0:
                    u = rng.normal(size=d)
            u /= np.linalg.norm(u)
            step = 10.0 ** rng.uniform(-3, -0.5)
            b = a + step * u
            ratio = float(np.linalg.norm(fn(a) - fn(b)) / step)
            if ratio > best:
                best = ratio
        return best

    lsum = INFLATION * (directional_lipschitz(h_prime) + directional_lipschitz(H))
    samples = []
    max_ratio = 0.0
    dominates = True
    for _ in range(trials):
        w = sample_point()
        gap = float(np.linalg.norm(h_prime(w) - H(w)))
        # One distance array for both bounds so nearest <= arbitrary holds
        # exactly, not just up to summation-order rounding.
        dists = np.linalg.norm(tokens - w, axis=1)
        d_near = float(np.min(dists))
        t_idx = int(rng.integers(0, tokens.shape[0]))
        d_arb = float(dists[t_idx])
        near_bound = lsum * d_near
        arb_bound = lsum * d_arb
        ratio = gap / near_bound if near_bound > 0 else 0.0
        max_ratio = max(max_ratio, ratio)
        dominates = dominates and near_bound <= arb_bound + 1e-15
        samples.append(BoundSample(float(np.linalg.norm(w)), gap, arb_bound, near_bound))
    report = BoundReport(trials, max_ratio, dominates, tuple(samples), lsum)
    if max_ratio > 1.0:
        raise TheoremViolation(f"encoder family violated the bound (ratio {max_ratio:.6g})")
    if not dominates:
        raise TheoremViolation("nearest-token bound exceeded the arbitrary-token bound")
    return report
