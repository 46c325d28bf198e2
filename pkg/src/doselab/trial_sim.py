"""Monte Carlo probability of correct selection (PCS) for dose designs.

A three-arm design observes L, M and H and picks the dose implied by the most
probable posterior shape. A two-arm design observes one pair and moves to the
higher dose only when the posterior probability that it beats the lower dose
by more than the margin exceeds one half. That pairwise posterior uses its
own priors, uniform Beta(1, 1) on both arms unless told otherwise.

Every selection is a deterministic function of the observed counts (and of
the seed for sampling-based posteriors), so decisions are computed once per
distinct count vector and reused across replicates.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .shape_model import (
    DEFAULT_MARGIN,
    DosePriorSet,
    PriorBank,
    Shape,
    ShapePosterior,
    TrialCounts,
    pairwise_superiority,
    pairwise_superiority_exact,
    posterior_shapes_quadrature,
)
from .streams import block_sizes, substream

_REPLICATE_STREAM = 10
_DECIDE_CHUNK = 64

METHODS = ("importance", "quadrature")


class Dose(enum.IntEnum):
    L = 0
    M = 1
    H = 2


class Pair(enum.Enum):
    LM = "LM"
    LH = "LH"
    MH = "MH"

    @property
    def doses(self) -> tuple:
        return tuple(Dose[c] for c in self.value)


PAIRS = (Pair.LM, Pair.LH, Pair.MH)
# S1's share folds into LM
DEFAULT_PAIR_DISTRIBUTION = (0.40, 0.20, 0.40)

THREE_ARM = "three-arm"
TWO_ARM_MIXED = "two-arm-mixed"
TWO_ARM_FIXED = "two-arm-fixed"
DESIGN_KINDS = (THREE_ARM, TWO_ARM_MIXED, TWO_ARM_FIXED)


def _check_distribution(dist):
    d = tuple(float(v) for v in dist)
    if len(d) != 3 or any(v < 0 for v in d) or abs(sum(d) - 1.0) > 1e-9:
        raise ValueError(f"pair distribution over (LM, LH, MH) must sum to 1, got {d}")
    return d


@dataclass(frozen=True)
class DesignSpec:
    kind: str
    n_per_arm: int
    pair: Pair | None = None
    pair_distribution: tuple | None = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}; expected one of {DESIGN_KINDS}")
        if int(self.n_per_arm) != self.n_per_arm or self.n_per_arm <= 0:
            raise ValueError(f"n_per_arm must be a positive integer, got {self.n_per_arm!r}")
        object.__setattr__(self, "n_per_arm", int(self.n_per_arm))
        if self.kind == TWO_ARM_FIXED:
            if self.pair is None:
                raise ValueError("a fixed two-arm design needs a pair")
            object.__setattr__(self, "pair", Pair(self.pair))
        elif self.pair is not None:
            raise ValueError(f"{self.kind} design takes no fixed pair")
        if self.kind == TWO_ARM_MIXED:
            dist = self.pair_distribution or DEFAULT_PAIR_DISTRIBUTION
            object.__setattr__(self, "pair_distribution", _check_distribution(dist))
        elif self.pair_distribution is not None:
            raise ValueError(f"{self.kind} design takes no pair distribution")

    @classmethod
    def three_arm(cls, n_per_arm: int = 30) -> "DesignSpec":
        return cls(THREE_ARM, n_per_arm)

    @classmethod
    def two_arm_mixed(cls, n_per_arm: int = 45, distribution=DEFAULT_PAIR_DISTRIBUTION) -> "DesignSpec":
        return cls(TWO_ARM_MIXED, n_per_arm, pair_distribution=tuple(distribution))

    @classmethod
    def two_arm_fixed(cls, pair, n_per_arm: int = 45) -> "DesignSpec":
        return cls(TWO_ARM_FIXED, n_per_arm, pair=Pair(pair))

    @property
    def arms(self) -> int:
        return 3 if self.kind == THREE_ARM else 2

    @property
    def total_n(self) -> int:
        return self.arms * self.n_per_arm

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n_per_arm": self.n_per_arm}
        if self.pair is not None:
            d["pair"] = self.pair.value
        if self.pair_distribution is not None:
            d["pair_distribution"] = dict(zip((p.value for p in PAIRS), self.pair_distribution))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        dist = d.get("pair_distribution")
        if isinstance(dist, dict):
            unknown = set(dist) - {p.value for p in PAIRS}
            if unknown:
                raise ValueError(f"unknown pairs in distribution: {sorted(unknown)}")
            dist = tuple(float(dist.get(p.value, 0.0)) for p in PAIRS)
        return cls(d["kind"], d["n_per_arm"], d.get("pair"), dist)


def optimal_dose(truth, margin: float = DEFAULT_MARGIN) -> Dose:
    """Highest-response dose, preferring the lower dose when within the margin."""
    best = 0
    for d in (1, 2):
        if truth[d] - truth[best] > margin:
            best = d
    return Dose(best)


@dataclass(frozen=True)
class TrueScenario:
    truth: tuple
    optimal_dose: Dose | None = None
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        t = tuple(float(v) for v in self.truth)
        if len(t) != 3 or not all(0.0 <= v <= 1.0 for v in t):
            raise ValueError(f"truth must be three rates in [0, 1], got {self.truth!r}")
        object.__setattr__(self, "truth", t)
        implied = optimal_dose(t, self.margin)
        if self.optimal_dose is None:
            object.__setattr__(self, "optimal_dose", implied)
        else:
            given = Dose[self.optimal_dose] if isinstance(self.optimal_dose, str) else Dose(self.optimal_dose)
            if given is not implied:
                raise ValueError(f"optimal dose {given.name} contradicts truth {t} (rule gives {implied.name})")
            object.__setattr__(self, "optimal_dose", given)


_SHAPE_DOSE = {Shape.S1: Dose.L, Shape.S2: Dose.H, Shape.S3: Dose.M, Shape.S4: Dose.H}


def dose_for_shape(shape: Shape) -> Dose:
    return _SHAPE_DOSE[Shape(shape)]


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown posterior method {method!r}; expected one of {METHODS}")


def select_dose_3arm(counts: TrialCounts, priors: DosePriorSet | None = None,
                     margin: float = DEFAULT_MARGIN, samples: int = 100_000, seed: int = 0,
                     method: str = "importance", grid_cells: int = 200) -> Dose:
    return _ThreeArmRule(priors or DosePriorSet.default(), margin, samples, seed, method, grid_cells)(counts)


def select_dose_2arm(counts: TrialCounts, pair, pair_priors: DosePriorSet | None = None,
                     margin: float = DEFAULT_MARGIN, samples: int = 100_000, seed: int = 0,
                     method: str = "importance") -> Dose:
    """Higher dose of ``pair`` iff ``P(p_high - p_low > margin | data) > 0.5``."""
    rule = _TwoArmRule(pair_priors or DosePriorSet.uniform(), margin, samples, seed, method)
    return rule(Pair(pair), counts)


class _ThreeArmRule:
    def __init__(self, priors, margin, samples, seed, method, grid_cells=200):
        _check_method(method)
        self.priors, self.margin, self.samples, self.seed = priors, margin, samples, seed
        self.method, self.grid_cells = method, grid_cells
        self._bank = None

    def posterior(self, counts) -> ShapePosterior:
        if self.method == "quadrature":
            return posterior_shapes_quadrature(counts, self.priors, self.margin, self.grid_cells)
        if self._bank is None:
            self._bank = PriorBank(self.priors, self.margin, self.samples, self.seed)
        return self._bank.posterior(counts)

    def __call__(self, counts) -> Dose:
        return dose_for_shape(self.posterior(counts).argmax())

    def many(self, counts_list) -> list:
        if self.method == "quadrature":
            return [self(c) for c in counts_list]
        if self._bank is None:
            self._bank = PriorBank(self.priors, self.margin, self.samples, self.seed)
        return [dose_for_shape(p.argmax()) for p in self._bank.posteriors(counts_list)]


class _TwoArmRule:
    def __init__(self, priors, margin, samples, seed, method):
        _check_method(method)
        self.priors, self.margin, self.samples, self.seed, self.method = priors, margin, samples, seed, method

    def superiority(self, pair, counts) -> float:
        lo, hi = pair.doses
        pri = (self.priors[lo], self.priors[hi])
        if self.method == "quadrature":
            return pairwise_superiority_exact(counts, pri, self.margin)
        return pairwise_superiority(counts, pri, self.margin, self.samples, self.seed)

    def __call__(self, pair, counts) -> Dose:
        lo, hi = pair.doses
        return hi if self.superiority(pair, counts) > 0.5 else lo


def draw_pair(distribution, rng: np.random.Generator, size: int | None = None):
    """Draw a dose pair (or an array of pair indices when ``size`` is given)."""
    dist = _check_distribution(distribution)
    if size is None:
        return PAIRS[int(rng.choice(3, p=dist))]
    return rng.choice(3, size=size, p=dist)


@dataclass(frozen=True)
class PcsReport:
    design: DesignSpec
    scenario: TrueScenario
    selected_frequency: tuple
    pcs: float
    pcs_se: float
    replicates: int
    seed: int | None
    posterior_samples: int | None
    method: str
    margin: float
    priors: DosePriorSet = field(default_factory=DosePriorSet.default)
    pair_priors: DosePriorSet = field(default_factory=DosePriorSet.uniform)

    def frequency(self, dose) -> float:
        return self.selected_frequency[int(dose)]

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "truth": list(self.scenario.truth),
            "optimal_dose": self.scenario.optimal_dose.name,
            "selected_frequency": {d.name: f for d, f in zip(Dose, self.selected_frequency)},
            "pcs": self.pcs,
            "pcs_se": self.pcs_se,
            "replicates": self.replicates,
            "seed": self.seed,
            "posterior_samples": self.posterior_samples,
            "method": self.method,
            "margin": self.margin,
        }

    def csv_rows(self) -> list:
        rows = []
        for d, f in zip(Dose, self.selected_frequency):
            rows.append({
                "dose": d.name,
                "selected_frequency": f,
                "optimal": int(d is self.scenario.optimal_dose),
                "pcs": self.pcs,
                "pcs_se": self.pcs_se,
                "design": self.design.kind,
                "n_per_arm": self.design.n_per_arm,
                "replicates": self.replicates,
                "seed": self.seed,
            })
        return rows


def _make_report(design, scenario, tallies, replicates, seed, samples, method, margin,
                 priors, pair_priors, se):
    freq = np.asarray(tallies, dtype=float)
    freq = freq / freq.sum()
    pcs = float(freq[int(scenario.optimal_dose)])
    if se is None:
        se = math.sqrt(pcs * (1.0 - pcs) / replicates)
    return PcsReport(design, scenario, tuple(float(v) for v in freq), pcs, se,
                     replicates, seed, samples, method, margin, priors, pair_priors)


def _draw_block(design, truth, rng, k):
    """Return ``(pair_index, counts)`` arrays for ``k`` replicates."""
    n = design.n_per_arm
    if design.kind == THREE_ARM:
        return np.full(k, -1), rng.binomial(n, truth, size=(k, 3))
    if design.kind == TWO_ARM_FIXED:
        pidx = np.full(k, PAIRS.index(design.pair))
    else:
        pidx = rng.choice(3, size=k, p=design.pair_distribution)
    idx = np.array([[int(d) for d in p.doses] for p in PAIRS])[pidx]
    counts = rng.binomial(n, truth[idx])
    return pidx, counts


def simulate_pcs(design: DesignSpec, scenario: TrueScenario, replicates: int = 10_000,
                 seed: int = 0, posterior_samples: int = 100_000,
                 priors: DosePriorSet | None = None, margin: float = DEFAULT_MARGIN,
                 method: str = "importance", workers: int = 1,
                 grid_cells: int = 200, pair_priors: DosePriorSet | None = None) -> PcsReport:
    """Estimate per-dose selection frequencies over simulated trials.

    Replicates are generated in fixed-size blocks from ``(seed, block)``
    substreams and the report is reduced in block order, so it does not
    depend on ``workers``. Sampling-based posteriors reuse one set of draws
    derived from ``seed`` for every replicate.
    """
    if not isinstance(design, DesignSpec):
        raise TypeError("design must be a DesignSpec")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    _check_method(method)
    priors = priors or DosePriorSet.default()
    pair_priors = pair_priors or DosePriorSet.uniform()
    truth = np.asarray(scenario.truth)
    n = design.n_per_arm
    if design.kind == THREE_ARM:
        rule3 = _ThreeArmRule(priors, margin, posterior_samples, seed, method, grid_cells)

        def decide(keys):
            return [int(d) for d in rule3.many([TrialCounts.equal_n(k, n) for k in keys])]
    else:
        rule2 = _TwoArmRule(pair_priors, margin, posterior_samples, seed, method)

        def decide(keys):
            return [int(rule2(PAIRS[k[0]], TrialCounts.equal_n(k[1:], n))) for k in keys]

    cache: dict = {}
    tallies = np.zeros(3, dtype=np.int64)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for b, k in block_sizes(replicates):
            pidx, counts = _draw_block(design, truth, substream(seed, _REPLICATE_STREAM, b), k)
            keys = counts if design.kind == THREE_ARM else np.column_stack([pidx, counts])
            uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
            uniq_keys = [tuple(int(v) for v in row) for row in uniq]
            todo = [t for t in uniq_keys if t not in cache]
            # fixed-size chunks keep the work split independent of worker count
            chunks = [todo[i:i + _DECIDE_CHUNK] for i in range(0, len(todo), _DECIDE_CHUNK)]
            results = pool.map(decide, chunks) if pool else map(decide, chunks)
            for chunk, res in zip(chunks, results):
                cache.update(zip(chunk, res))
            chosen = np.array([cache[t] for t in uniq_keys])
            tallies += np.bincount(chosen[inverse.ravel()], minlength=3)
    finally:
        if pool:
            pool.shutdown()
    samples = posterior_samples if method == "importance" else None
    return _make_report(design, scenario, tallies, replicates, seed, samples, method, margin,
                        priors, pair_priors, None)


MAX_EXHAUSTIVE_N = 6


def pcs_oracle_exhaustive(design: DesignSpec, scenario: TrueScenario,
                          priors: DosePriorSet | None = None, margin: float = DEFAULT_MARGIN,
                          method: str = "quadrature", grid_cells: int = 200,
                          posterior_samples: int = 100_000, seed: int = 0,
                          pair_priors: DosePriorSet | None = None) -> PcsReport:
    """Exact selection probabilities by enumerating every possible outcome.

    Each count vector is weighted by its product-of-binomials probability
    (times the pair probability for two-arm designs) and passed through the
    same selection rules as :func:`simulate_pcs`.
    """
    if design.n_per_arm > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive enumeration needs n_per_arm <= {MAX_EXHAUSTIVE_N}")
    _check_method(method)
    priors = priors or DosePriorSet.default()
    pair_priors = pair_priors or DosePriorSet.uniform()
    n = design.n_per_arm
    pmf = [stats.binom.pmf(np.arange(n + 1), n, p) for p in scenario.truth]
    probs = np.zeros(3)
    if design.kind == THREE_ARM:
        rule3 = _ThreeArmRule(priors, margin, posterior_samples, seed, method, grid_cells)
        for x in itertools.product(range(n + 1), repeat=3):
            w = pmf[0][x[0]] * pmf[1][x[1]] * pmf[2][x[2]]
            probs[int(rule3(TrialCounts.equal_n(x, n)))] += w
    else:
        rule2 = _TwoArmRule(pair_priors, margin, posterior_samples, seed, method)
        if design.kind == TWO_ARM_FIXED:
            weights = [1.0 if p is design.pair else 0.0 for p in PAIRS]
        else:
            weights = design.pair_distribution
        for pair, pw in zip(PAIRS, weights):
            if pw == 0:
                continue
            lo, hi = pair.doses
            for x in itertools.product(range(n + 1), repeat=2):
                w = pw * pmf[lo][x[0]] * pmf[hi][x[1]]
                probs[int(rule2(pair, TrialCounts.equal_n(x, n)))] += w
    samples = posterior_samples if method == "importance" else None
    rep_seed = seed if method == "importance" else None
    return _make_report(design, scenario, probs, 0, rep_seed, samples, method, margin,
                        priors, pair_priors, 0.0)
