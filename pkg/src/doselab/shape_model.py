"""Bayesian classification of dose-response shapes over three doses.

Response rates at the low, middle and high dose get independent Beta priors.
A triple ``(p1, p2, p3)`` is assigned to one of four shapes by comparing the
two successive increments against a comparability margin (2.5% by default);
a drop of any size counts as "comparable". Observed responders follow
independent binomials per arm.

Two posterior routes are provided and are meant to check each other:
prior-importance sampling (:func:`posterior_shapes`) and a deterministic
cell sum over a grid (:func:`posterior_shapes_quadrature`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import special

from .streams import block_sizes, substream

DEFAULT_MARGIN = 0.025

# stream namespaces under a user seed
_PRIOR_STREAM = 0
_PAIR_STREAM = 1


class Shape(enum.IntEnum):
    S1 = 0  # flat
    S2 = 1  # flat, then rise
    S3 = 2  # rise, then plateau
    S4 = 3  # rise, rise

    @property
    def description(self) -> str:
        return _SHAPE_TEXT[self]


_SHAPE_TEXT = {
    Shape.S1: "flat",
    Shape.S2: "flat then rise",
    Shape.S3: "rise then plateau",
    Shape.S4: "monotone rise",
}


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0) or not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"Beta shape parameters must be positive, got ({self.a}, {self.b})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def variance(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))

    def updated(self, responders: int, n: int) -> "BetaParams":
        """Conjugate posterior after ``responders`` out of ``n``."""
        return BetaParams(self.a + responders, self.b + n - responders)


@dataclass(frozen=True)
class DosePriorSet:
    low: BetaParams
    mid: BetaParams
    high: BetaParams

    @classmethod
    def default(cls) -> "DosePriorSet":
        return cls(BetaParams(0.1, 1.9), BetaParams(0.6, 1.4), BetaParams(0.8, 1.2))

    @classmethod
    def uniform(cls) -> "DosePriorSet":
        return cls(BetaParams(1.0, 1.0), BetaParams(1.0, 1.0), BetaParams(1.0, 1.0))

    def __iter__(self):
        return iter((self.low, self.mid, self.high))

    def __getitem__(self, i: int) -> BetaParams:
        return (self.low, self.mid, self.high)[i]

    @property
    def a(self) -> np.ndarray:
        return np.array([p.a for p in self])

    @property
    def b(self) -> np.ndarray:
        return np.array([p.b for p in self])


@dataclass(frozen=True)
class TrialCounts:
    """Responders and sample size per arm, in increasing dose order.

    ``n == 0`` on an arm means no observations there.
    """

    responders: tuple
    n: tuple

    def __post_init__(self):
        x = tuple(int(v) for v in self.responders)
        n = tuple(int(v) for v in self.n)
        if len(x) != len(n) or not x:
            raise ValueError("responders and n must have the same non-zero length")
        for xi, ni in zip(x, n):
            if ni < 0 or not 0 <= xi <= ni:
                raise ValueError(f"need 0 <= responders <= n, got {xi}/{ni}")
        object.__setattr__(self, "responders", x)
        object.__setattr__(self, "n", n)

    @classmethod
    def equal_n(cls, responders: Sequence[int], n: int) -> "TrialCounts":
        return cls(tuple(responders), (n,) * len(responders))

    def __len__(self):
        return len(self.responders)


@dataclass(frozen=True)
class ShapePosterior:
    probs: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.probs)
        if len(p) != 4:
            raise ValueError("need four shape probabilities")
        if any(v < 0 or v > 1 for v in p) or abs(sum(p) - 1.0) > 1e-9:
            raise ValueError(f"not a probability vector: {p}")
        object.__setattr__(self, "probs", p)

    def __getitem__(self, shape) -> float:
        return self.probs[int(shape)]

    def argmax(self) -> Shape:
        """Most probable shape; ties go to the shape selecting the lower dose."""
        best = TIE_ORDER[0]
        for s in TIE_ORDER[1:]:
            if self.probs[s] > self.probs[best]:
                best = s
        return best

    def as_dict(self) -> dict:
        return {s.name: self.probs[s] for s in Shape}


# S1 -> L, S3 -> M, S2/S4 -> H
TIE_ORDER = (Shape.S1, Shape.S3, Shape.S2, Shape.S4)


def _normalized(mass) -> ShapePosterior:
    mass = np.asarray(mass, dtype=float)
    total = mass.sum()
    if not total > 0:
        raise ValueError("posterior is undefined: the data have zero probability under the prior")
    probs = mass / total
    # guard the exact-sum invariant against rounding drift
    probs = np.clip(probs, 0.0, 1.0)
    return ShapePosterior(tuple(probs / probs.sum()))


def classify_shape(p: Sequence[float], margin: float = DEFAULT_MARGIN) -> Shape:
    p1, p2, p3 = p
    if not all(0.0 <= v <= 1.0 for v in (p1, p2, p3)):
        raise ValueError(f"response rates must lie in [0, 1], got {tuple(p)}")
    return Shape(2 * (p2 - p1 > margin) + (p3 - p2 > margin))


def classify_shapes(p: np.ndarray, margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Vectorized :func:`classify_shape` over an ``(m, 3)`` array; returns int codes."""
    p = np.asarray(p, dtype=float)
    return (2 * (p[:, 1] - p[:, 0] > margin) + (p[:, 2] - p[:, 1] > margin)).astype(np.int8)


def _check_margin(margin):
    if not 0.0 <= margin < 1.0 + 1e-12:
        raise ValueError(f"margin must lie in [0, 1], got {margin!r}")


def sample_prior(priors: DosePriorSet, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Independent draws ``p_d ~ Beta(a_d, b_d)``; shape ``(3,)`` or ``(size, 3)``."""
    shape = (3,) if size is None else (size, 3)
    return rng.beta(priors.a, priors.b, size=shape)


def _prior_blocks(priors: DosePriorSet, samples: int, seed: int) -> Iterator[np.ndarray]:
    for i, k in block_sizes(samples):
        yield sample_prior(priors, substream(seed, _PRIOR_STREAM, i), k)


def shape_prior_probs(priors: DosePriorSet, margin: float = DEFAULT_MARGIN,
                      samples: int = 1_000_000, seed: int = 0) -> ShapePosterior:
    """Monte Carlo frequencies of each shape under the prior."""
    _check_margin(margin)
    counts = np.zeros(4)
    for block in _prior_blocks(priors, samples, seed):
        counts += np.bincount(classify_shapes(block, margin), minlength=4)
    return _normalized(counts)


def binomial_log_likelihood(counts: TrialCounts, p: Sequence[float]) -> float:
    """Sum over arms of ``log C(n, x) + x log p + (n - x) log(1 - p)``.

    Uses ``0 log 0 = 0``; impossible data give ``-inf``.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (len(counts),):
        raise ValueError("counts and rates must cover the same arms")
    x = np.asarray(counts.responders, dtype=float)
    n = np.asarray(counts.n, dtype=float)
    logc = special.gammaln(n + 1) - special.gammaln(x + 1) - special.gammaln(n - x + 1)
    with np.errstate(divide="ignore"):
        terms = logc + special.xlogy(x, p) + special.xlog1py(n - x, -p)
    return float(terms.sum())


_LOG_FLOOR = -1e300      # finite stand-in for log(0) so that 0 * log(0) == 0
_IMPOSSIBLE = -1e250     # log-likelihoods below this came from a log(0) term


class _WeightAccumulator:
    """Streaming log-sum-exp of importance weights per shape, for K count vectors."""

    def __init__(self, k: int):
        self.log_scale = np.full(k, -np.inf)
        self.mass = np.zeros((4, k))

    def add(self, loglik: np.ndarray, onehot: np.ndarray):
        loglik = np.where(loglik < _IMPOSSIBLE, -np.inf, loglik)
        top = loglik.max(axis=0)
        live = np.isfinite(top)
        w = np.exp(loglik - np.where(live, top, 0.0))
        block_mass = onehot.T @ w
        scale = np.maximum(self.log_scale, top)
        old = np.where(np.isfinite(self.log_scale), np.exp(self.log_scale - np.where(np.isfinite(scale), scale, 0.0)), 0.0)
        new = np.where(live, np.exp(top - np.where(live, scale, 0.0)), 0.0)
        self.mass = self.mass * old + block_mass * new
        self.log_scale = scale


class _Block:
    """Log response rates and one-hot shape membership for a block of prior draws."""

    __slots__ = ("logp", "log1mp", "onehot")

    def __init__(self, draws: np.ndarray, margin: float):
        with np.errstate(divide="ignore"):
            self.logp = np.maximum(np.log(draws), _LOG_FLOOR)
            self.log1mp = np.maximum(np.log1p(-draws), _LOG_FLOOR)
        self.onehot = np.eye(4)[classify_shapes(draws, margin)]

    def loglik(self, x: np.ndarray, nx: np.ndarray) -> np.ndarray:
        """``(draws, K)`` log-likelihoods up to the binomial coefficients, which cancel."""
        return self.logp @ x.T + self.log1mp @ nx.T


def _check_three_arm(counts):
    if len(counts) != 3:
        raise ValueError("shape posteriors need counts for all three doses")


def _count_matrix(counts_list):
    for c in counts_list:
        _check_three_arm(c)
    x = np.array([c.responders for c in counts_list], dtype=float).reshape(-1, 3)
    n = np.array([c.n for c in counts_list], dtype=float).reshape(-1, 3)
    return x, n - x


def _posteriors_from_blocks(blocks, counts_list) -> list:
    x, nx = _count_matrix(counts_list)
    acc = _WeightAccumulator(len(counts_list))
    for block in blocks:
        acc.add(block.loglik(x, nx), block.onehot)
    return [_normalized(acc.mass[:, j]) for j in range(len(counts_list))]


class PriorBank:
    """A fixed set of prior draws reusable across many posterior queries.

    ``PriorBank(priors, margin, samples, seed).posterior(counts)`` is the same
    estimate as ``posterior_shapes`` with the same arguments, built once.
    """

    def __init__(self, priors: DosePriorSet, margin: float = DEFAULT_MARGIN,
                 samples: int = 100_000, seed: int = 0):
        _check_margin(margin)
        self.priors = priors
        self.margin = margin
        self.samples = samples
        self.seed = seed
        self._blocks = [_Block(d, margin) for d in _prior_blocks(priors, samples, seed)]

    def posterior(self, counts: TrialCounts) -> ShapePosterior:
        return _posteriors_from_blocks(self._blocks, [counts])[0]

    def posteriors(self, counts_list: Sequence[TrialCounts], batch: int = 64) -> list:
        """Posteriors for many count vectors, evaluated ``batch`` at a time."""
        out = []
        for i in range(0, len(counts_list), batch):
            out.extend(_posteriors_from_blocks(self._blocks, counts_list[i:i + batch]))
        return out


def posterior_shapes(counts: TrialCounts, priors: DosePriorSet | None = None,
                     margin: float = DEFAULT_MARGIN, samples: int = 1_000_000,
                     seed: int = 0) -> ShapePosterior:
    """Posterior shape probabilities by prior-importance sampling.

    Triples are drawn from the prior, weighted by their binomial likelihood,
    and the normalized weight falling in each shape is reported. Memory use
    is bounded by streaming fixed-size blocks.
    """
    _check_three_arm(counts)
    _check_margin(margin)
    priors = priors or DosePriorSet.default()
    blocks = (_Block(d, margin) for d in _prior_blocks(priors, samples, seed))
    return _posteriors_from_blocks(blocks, [counts])[0]


def _rise_fraction(grid_cells: int, margin: float) -> np.ndarray:
    """``F[i, j] = P(U_j - U_i > margin)`` for points uniform in cells i and j.

    The within-cell offset difference is triangular on [-1, 1] cell widths,
    so cell pairs straddling the margin get a fractional share.
    """
    idx = np.arange(grid_cells)
    t = margin * grid_cells - (idx[None, :] - idx[:, None])
    t = np.clip(t, -1.0, 1.0)
    return np.where(t < 0, 1.0 - 0.5 * (1.0 + t) ** 2, 0.5 * (1.0 - t) ** 2)


def posterior_shapes_quadrature(counts: TrialCounts, priors: DosePriorSet | None = None,
                                margin: float = DEFAULT_MARGIN,
                                grid_cells: int = 200) -> ShapePosterior:
    """Deterministic posterior shape probabilities on a ``grid_cells``^3 grid.

    Per dose, the posterior mass of each cell is an exact difference of
    regularized incomplete Beta functions of the conjugate update (this also
    copes with the unbounded prior density at 0 when a < 1). Shape membership
    is resolved per pair of neighbouring-dose cells, so the cost is
    O(grid_cells^2).
    """
    _check_three_arm(counts)
    _check_margin(margin)
    if grid_cells < 100:
        raise ValueError("grid_cells must be at least 100")
    priors = priors or DosePriorSet.default()
    edges = np.linspace(0.0, 1.0, grid_cells + 1)
    w = []
    for prior, x, n in zip(priors, counts.responders, counts.n):
        post = prior.updated(x, n)
        w.append(np.diff(special.betainc(post.a, post.b, edges)))
    w1, w2, w3 = w
    f = _rise_fraction(grid_cells, margin)
    rise_first = w1 @ f            # indexed by the middle-dose cell
    flat_first = w1.sum() - rise_first
    rise_second = f @ w3
    flat_second = w3.sum() - rise_second
    mass = [
        np.dot(w2, flat_first * flat_second),
        np.dot(w2, flat_first * rise_second),
        np.dot(w2, rise_first * flat_second),
        np.dot(w2, rise_first * rise_second),
    ]
    return _normalized(mass)


def _pair_posteriors(counts, priors):
    if len(counts) != 2:
        raise ValueError("pairwise comparison needs exactly two arms")
    lo, hi = priors
    return (lo.updated(counts.responders[0], counts.n[0]),
            hi.updated(counts.responders[1], counts.n[1]))


def pairwise_superiority(counts: TrialCounts, priors: Sequence[BetaParams],
                         margin: float = DEFAULT_MARGIN, samples: int = 100_000,
                         seed: int = 0) -> float:
    """Posterior ``P(p_high - p_low > margin)`` by paired conjugate sampling.

    ``counts`` and ``priors`` are ordered (lower dose, higher dose).
    """
    _check_margin(margin)
    lo, hi = _pair_posteriors(counts, priors)
    hits = 0
    for i, k in block_sizes(samples):
        rng = substream(seed, _PAIR_STREAM, i)
        pl = rng.beta(lo.a, lo.b, size=k)
        ph = rng.beta(hi.a, hi.b, size=k)
        hits += int(np.count_nonzero(ph - pl > margin))
    return hits / samples


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _composite_gauss(f, lo: float, hi: float, panels: int = 64) -> float:
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.dot(w, f(x)))


def pairwise_superiority_exact(counts: TrialCounts, priors: Sequence[BetaParams],
                               margin: float = DEFAULT_MARGIN) -> float:
    """Numerical-integration counterpart of :func:`pairwise_superiority`.

    Integrates ``P(p_high > u + margin)`` against the low arm's posterior
    density over ``u`` in [0, 1 - margin] with composite Gauss-Legendre.
    A low-arm shape below 1 has an unbounded density at 0; substituting
    ``u = v^(1/a)`` removes it.
    """
    _check_margin(margin)
    lo, hi = _pair_posteriors(counts, priors)
    if margin >= 1.0:
        return 0.0
    log_norm = special.betaln(lo.a, lo.b)
    top = 1.0 - margin

    def tail(u):
        # (1 - u)^(b - 1) * P(p_high > u + margin), without the u^(a - 1) factor
        with np.errstate(divide="ignore"):
            log_w = special.xlog1py(lo.b - 1.0, -u) - log_norm
        return special.betaincc(hi.a, hi.b, np.minimum(u + margin, 1.0)) * np.exp(log_w)

    if lo.a < 1.0:
        val = _composite_gauss(lambda v: tail(v ** (1.0 / lo.a)), 0.0, top ** lo.a) / lo.a
    else:
        val = _composite_gauss(lambda u: tail(u) * u ** (lo.a - 1.0), 0.0, top)
    return float(min(max(val, 0.0), 1.0))
