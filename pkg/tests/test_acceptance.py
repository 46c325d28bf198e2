"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N PASS|FAIL`` line (collected again
in the terminal summary) and then asserts the same verdict.
"""

import csv
import io
import math
import time

import numpy as np
import pytest

from doselab import design_tradeoff, stat_core
from doselab.cli import main
from doselab.readiness import ExpansionLevel, RandomizationLevel, rate
from doselab.shape_model import (
    DosePriorSet,
    Shape,
    TrialCounts,
    posterior_shapes,
    posterior_shapes_quadrature,
    shape_prior_probs,
)
from doselab.trial_sim import DesignSpec, TrueScenario, pcs_oracle_exhaustive, simulate_pcs

# observed responders at 30/dose and reference posteriors (S1..S4, percent)
REFERENCE_POSTERIORS = {
    (6, 6, 6): (19.0, 36.0, 41.0, 5.0),
    (3, 3, 6): (4.0, 55.0, 19.0, 22.0),
    (3, 6, 6): (3.0, 16.0, 60.0, 21.0),
    (3, 6, 9): (0.5, 18.0, 27.0, 55.0),
}
LINEAR = TrueScenario((0.10, 0.20, 0.30))


@pytest.fixture(scope="module")
def importance_posteriors():
    start = time.perf_counter()
    out = {row: posterior_shapes(TrialCounts.equal_n(row, 30), samples=2_000_000, seed=0)
           for row in REFERENCE_POSTERIORS}
    return out, time.perf_counter() - start


def test_posterior_table_reproduction(importance_posteriors, criterion):
    posts, elapsed = importance_posteriors
    worst, where = 0.0, None
    for row, target in REFERENCE_POSTERIORS.items():
        for shape, t in zip(Shape, target):
            err = abs(100 * posts[row][shape] - t)
            if err > worst:
                worst, where = err, (row, shape.name)
    ok = worst <= 3.0 and elapsed < 120
    assert criterion(1, "posterior table, 16 values within 3 pp, < 2 min", ok,
                     f"max error {worst:.2f} pp at {where}, {elapsed:.1f} s")


def test_importance_matches_quadrature(importance_posteriors, criterion):
    posts, _ = importance_posteriors
    worst = 0.0
    for row in REFERENCE_POSTERIORS:
        quad = posterior_shapes_quadrature(TrialCounts.equal_n(row, 30), grid_cells=400)
        worst = max(worst, max(abs(a - b) for a, b in zip(posts[row].probs, quad.probs)))
    assert criterion(2, "importance sampling vs quadrature within 1.5 pp", 100 * worst <= 1.5,
                     f"max difference {100 * worst:.3f} pp")


def test_lambda_thresholds(criterion):
    a = design_tradeoff.exclude_middle_threshold()
    b = design_tradeoff.adjacent_pair_threshold()
    ok = (abs(a - (math.sqrt(8 / 3) - 1)) <= 1e-9 and abs(b - (2 - math.sqrt(1.5))) <= 1e-9
          and round(a, 2) == 0.63 and round(b, 2) == 0.78)
    assert criterion(3, "break-even beliefs 0.63 / 0.78 to 1e-9", ok, f"{a:.9f} / {b:.9f}")


def test_weak_signal_power_band(criterion):
    xs = np.round(np.arange(0.25, 0.75 + 1e-9, 0.01), 10)
    rs = np.round(np.arange(1.2, 2.0 + 1e-9, 0.1), 10)
    vals = [stat_core.normal_cdf(stat_core.g_function(x, r)) for x in xs for r in rs]
    ok = len(vals) == 51 * 9 and min(vals) >= 0.04 and max(vals) <= 0.11
    assert criterion(4, "power of weaker signal in [0.04, 0.11] over grid", ok,
                     f"range [{min(vals):.4f}, {max(vals):.4f}] on {len(vals)} points")


def test_linear_cdf_band(criterion):
    lo, hi = stat_core.normal_quantile(0.25), stat_core.normal_quantile(0.75)
    xs = np.append(np.arange(lo, hi, 1e-4), hi)
    worst = max(stat_core.linear_cdf_error(x) for x in xs)
    assert criterion(5, "linear CDF error < 0.02 on interquartile range", worst < 0.02,
                     f"max error {worst:.5f} over {xs.size} points")


def test_shape_prior_probabilities(criterion):
    probs = shape_prior_probs(DosePriorSet.default(), samples=1_000_000, seed=0).probs
    target = (0.0, 0.20, 0.40, 0.40)
    worst = max(abs(p - t) for p, t in zip(probs, target))
    assert criterion(6, "shape prior within 5 pp of (0, 20, 40, 40)%", worst <= 0.05,
                     "(" + ", ".join(f"{100 * p:.1f}" for p in probs) + ")%")


def test_pcs_linear_truth(criterion):
    start = time.perf_counter()
    runs = {
        "three-arm(30)": (DesignSpec.three_arm(30), 0.74, 0.05),
        "two-arm-mixed(45)": (DesignSpec.two_arm_mixed(45), 0.51, 0.06),
        "two-arm-fixed MH(45)": (DesignSpec.two_arm_fixed("MH", 45), 0.78, 0.05),
    }
    pcs = {name: simulate_pcs(d, LINEAR, 10_000, seed=2026).pcs for name, (d, _, _) in runs.items()}
    elapsed = time.perf_counter() - start
    ok = all(abs(pcs[name] - t) <= tol for name, (_, t, tol) in runs.items())
    gap = pcs["three-arm(30)"] - pcs["two-arm-mixed(45)"]
    ok = ok and gap >= 0.10 and elapsed < 600
    detail = ", ".join(f"{k} {100 * v:.1f}%" for k, v in pcs.items())
    assert criterion(7, "PCS 74/51/78% and three-arm gap >= 10 pp", ok,
                     f"{detail}, gap {100 * gap:.1f} pp, {elapsed:.0f} s")


def test_simulation_matches_enumeration(criterion):
    z_scores = {}
    for name, design in (("three-arm(5)", DesignSpec.three_arm(5)),
                         ("two-arm-fixed LH(6)", DesignSpec.two_arm_fixed("LH", 6))):
        exact = pcs_oracle_exhaustive(design, LINEAR, method="quadrature")
        sim = simulate_pcs(design, LINEAR, 1_000_000, seed=2026, method="quadrature")
        se = math.sqrt(exact.pcs * (1 - exact.pcs) / sim.replicates)
        z_scores[name] = (sim.pcs - exact.pcs) / se
    ok = all(abs(z) <= 3 for z in z_scores.values())
    assert criterion(8, "simulated PCS within 3 SE of exhaustive enumeration", ok,
                     ", ".join(f"{k} z={z:+.2f}" for k, z in z_scores.items()))


def test_power_round_trip(criterion):
    worst = 0.0
    for alpha in (0.025, 0.05, 0.1):
        for beta in (0.1, 0.2, 0.3, 0.4, 0.5):
            for delta in (0.2, 0.4, 0.6, 0.8, 1.0):
                n = stat_core.sample_size(alpha, beta, delta)
                worst = max(worst, abs(stat_core.power_exact(n, delta, alpha) - (1 - beta)))
    assert criterion(9, "power(sample_size) = 1 - beta within 1e-9", worst <= 1e-9, f"max error {worst:.2e}")


def test_simulation_determinism(tmp_path, criterion):
    outs = []
    for i, workers in enumerate((1, 1, 4)):
        path = tmp_path / f"run{i}.json"
        code = main(["simulate", "--seed", "77", "--workers", str(workers), "--out", str(path)])
        outs.append((code, path.read_bytes()))
    ok = all(code == 0 for code, _ in outs) and len({b for _, b in outs}) == 1
    assert criterion(10, "byte-identical reports across runs and worker counts", ok,
                     f"{len(outs[0][1])} bytes")


def test_rating_table(tmp_path, criterion):
    path = tmp_path / "table.csv"
    code = main(["rate", "--table", "--format", "csv", "--out", str(path)])
    cells = {(r["expansion"], r["randomization"]): int(r["stars"])
             for r in csv.DictReader(io.StringIO(path.read_text()))}
    expected = {
        ("none", "none"): 0, ("none", "2dose"): 2, ("none", "3dose"): 3,
        ("backfill-low", "none"): 1, ("backfill-low", "2dose"): 3, ("backfill-low", "3dose"): 4,
        ("extended-moderate", "none"): 2, ("extended-moderate", "2dose"): 4, ("extended-moderate", "3dose"): 5,
        ("extended-high", "none"): 3, ("extended-high", "2dose"): 5, ("extended-high", "3dose"): 5,
    }
    rows_monotone = all(
        [rate(r, e).stars for r in RandomizationLevel] == sorted(rate(r, e).stars for r in RandomizationLevel)
        for e in ExpansionLevel)
    cols_monotone = all(
        [rate(r, e).stars for e in ExpansionLevel] == sorted(rate(r, e).stars for e in ExpansionLevel)
        for r in RandomizationLevel)
    ok = code == 0 and cells == expected and rows_monotone and cols_monotone
    assert criterion(11, "rating table exact and monotone", ok, f"{len(cells)} cells")
