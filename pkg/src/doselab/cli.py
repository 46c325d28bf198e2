"""Command-line entry point: ``doselab <command> [options]``.

Exit status is 0 on success, 1 when a computation fails and 2 for bad
usage or an unreadable config.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

from . import __version__, design_tradeoff, readiness, stat_core
from .config import ConfigError, resolve_config
from .shape_model import Shape, TrialCounts, posterior_shapes, posterior_shapes_quadrature
from .trial_sim import DESIGN_KINDS, METHODS, DesignSpec, Pair, dose_for_shape, simulate_pcs

FORMATS = ("csv", "json", "text")


class UsageError(Exception):
    pass


@dataclass
class FigureSeries:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row width does not match columns")
        self.rows.append(tuple(values))

    def records(self) -> list:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return _json({"name": self.name, "columns": self.columns, "rows": self.records()})
        if fmt == "csv":
            return _csv(self.columns, self.records())
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(_fmt_num(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _fmt_num(v) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(columns, records) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: _fmt_num(v) for k, v in rec.items()})
    return buf.getvalue()


def _grid(lo: float, hi: float, step: float) -> list:
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise UsageError("range bounds and step must be finite")
    if step <= 0 or hi < lo:
        raise UsageError("need step > 0 and max >= min")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _float_list(text: str, what: str) -> list:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None
    if not values:
        raise UsageError(f"{what} must not be empty")
    return values


def _int_list(text: str, what: str) -> list:
    try:
        values = [int(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of integers") from None
    return values


# commands -----------------------------------------------------------------

def cmd_power_curve(args, config) -> str:
    rs = _float_list(args.r, "--r")
    if any(r <= 1.0 for r in rs):
        raise UsageError("every r must exceed 1")
    xs = _grid(args.x_min, args.x_max, args.step)
    if xs[0] <= 0.0 or xs[-1] >= 1.0:
        raise UsageError("x must lie strictly between 0 and 1")
    series = FigureSeries("power-curve", ["x", "r", "phi_g"])
    for r in rs:
        for x in xs:
            series.add(x, r, stat_core.normal_cdf(stat_core.g_function(x, r)))
    return series.render(args.format)


def cmd_cdf_approx(args, config) -> str:
    series = FigureSeries("cdf-approx", ["x", "phi", "linear", "abs_error"])
    for x in _grid(args.x_min, args.x_max, args.step):
        series.add(x, stat_core.normal_cdf(x), stat_core.linear_cdf(x), stat_core.linear_cdf_error(x))
    return series.render(args.format)


def _threshold_records() -> list:
    out = []
    for name, t in (("exclude_middle", design_tradeoff.exclude_middle()),
                    ("adjacent_pair", design_tradeoff.adjacent_pair())):
        value = t.value
        sign = ">" if t.direction is design_tradeoff.Direction.EXPECTED_EXCEEDS_ONE else "<"
        out.append({
            "name": name,
            "lambda": value,
            "favorable_ratio": t.favorable_ratio,
            "unfavorable_ratio": t.unfavorable_ratio,
            "inequality": f"lambda*{t.favorable_ratio:.6f} + (1-lambda)*{t.unfavorable_ratio:.6f} {sign} 1",
            "check": t.expected_ratio(value),
        })
    return out


def cmd_thresholds(args, config) -> str:
    recs = _threshold_records()
    if args.format == "json":
        return _json({r["name"]: r for r in recs})
    if args.format == "csv":
        return _csv(list(recs[0]), recs)
    lines = []
    for r in recs:
        lines.append(f"{r['name']}: lambda = {r['lambda']:.6f}  ({r['inequality']})")
        lines.append(f"  check: lambda*a + (1-lambda)*b = {r['check']:.12f}")
    return "\n".join(lines) + "\n"


def cmd_posterior(args, config) -> str:
    responders = _int_list(args.counts, "--counts")
    ns = _int_list(args.n, "--n")
    if len(responders) != 3 or len(ns) not in (1, 3):
        raise UsageError("--counts needs three integers and --n one or three")
    if len(ns) == 1:
        ns = ns * 3
    try:
        counts = TrialCounts(tuple(responders), tuple(ns))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    samples = config.posterior_samples if args.samples is None else args.samples
    if samples < 1:
        raise UsageError("--samples must be positive")
    method = args.method or config.method
    if method == "quadrature":
        post = posterior_shapes_quadrature(counts, config.priors, config.margin, config.grid_cells)
    else:
        post = posterior_shapes(counts, config.priors, config.margin, samples, config.seed)
    shape = post.argmax()
    dose = dose_for_shape(shape)
    record = {
        "counts": list(responders),
        "n": list(ns),
        "posterior": {s.name: post[s] for s in Shape},
        "shape": shape.name,
        "dose": dose.name,
        "method": method,
        "samples": samples if method == "importance" else None,
        "seed": config.seed,
    }
    if args.format == "json":
        return _json(record)
    if args.format == "csv":
        rows = [{"shape": s.name, "probability": post[s], "selected": int(s is shape),
                 "dose": dose_for_shape(s).name, "seed": config.seed} for s in Shape]
        return _csv(["shape", "probability", "selected", "dose", "seed"], rows)
    lines = [f"{s.name} {s.description:<34} {100 * post[s]:6.2f}%" for s in Shape]
    lines.append(f"shape {shape.name}, dose {dose.name} (method {method}, seed {config.seed})")
    return "\n".join(lines) + "\n"


def _design_from_args(args, config) -> DesignSpec:
    if args.design is None and args.pair is None and args.n_per_arm is None:
        return config.design
    kind = args.design or ("two-arm-fixed" if args.pair else config.design.kind)
    if args.pair and kind != "two-arm-fixed":
        raise UsageError("--pair only applies to --design two-arm-fixed")
    same_kind = kind == config.design.kind
    n = args.n_per_arm
    if n is None:
        n = config.design.n_per_arm if same_kind else (30 if kind == "three-arm" else 45)
    try:
        if kind == "three-arm":
            return DesignSpec.three_arm(n)
        if kind == "two-arm-mixed":
            dist = config.design.pair_distribution if same_kind and config.design.pair_distribution else None
            return DesignSpec.two_arm_mixed(n, dist) if dist else DesignSpec.two_arm_mixed(n)
        pair = args.pair or (config.design.pair.value if same_kind and config.design.pair else None)
        if pair is None:
            raise UsageError("--design two-arm-fixed needs --pair")
        return DesignSpec.two_arm_fixed(pair, n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args, config) -> str:
    truth = tuple(_float_list(args.truth, "--truth")) if args.truth else None
    if truth is not None and len(truth) != 3:
        raise UsageError("--truth needs three response rates")
    try:
        config = config.with_overrides(
            design=_design_from_args(args, config),
            truth=truth,
            replicates=args.replicates,
            posterior_samples=args.posterior_samples,
            method=args.method,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    report = simulate_pcs(
        config.design, config.scenario(), config.replicates, seed=config.seed,
        posterior_samples=config.posterior_samples, priors=config.priors, margin=config.margin,
        method=config.method, workers=args.workers, grid_cells=config.grid_cells,
        pair_priors=config.pair_priors,
    )
    if args.format == "json":
        return _json({**report.to_dict(), "config": config.to_dict()})
    if args.format == "csv":
        rows = report.csv_rows()
        return _csv(list(rows[0]), rows)
    d = config.design
    label = d.kind + (f" {d.pair.value}" if d.pair else "")
    lines = [f"design {label}, {d.n_per_arm}/arm, truth {list(config.truth)}, "
             f"optimal {report.scenario.optimal_dose.name}"]
    lines += [f"  {dose}: {100 * f:6.2f}%" for dose, f in zip("LMH", report.selected_frequency)]
    lines.append(f"PCS {100 * report.pcs:.2f}% (se {100 * report.pcs_se:.2f}), "
                 f"{report.replicates} replicates, seed {report.seed}")
    return "\n".join(lines) + "\n"


def cmd_rate(args, config) -> str:
    if args.table or (args.randomization is None and args.expansion is None):
        if args.format == "json":
            return _json(readiness.rating_table())
        return readiness.table_csv() if args.format == "csv" else readiness.table_text()
    if args.randomization is None or args.expansion is None:
        raise UsageError("give both RANDOMIZATION and EXPANSION, or --table")
    try:
        r = readiness.parse_randomization(args.randomization)
        e = readiness.parse_expansion(args.expansion)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rating = readiness.rate(r, e)
    rec = {"randomization": r.key, "expansion": e.key, "stars": rating.stars, "rating": rating.render()}
    if args.format == "json":
        return _json(rec)
    if args.format == "csv":
        return _csv(list(rec), [rec])
    return rating.render() + "\n"


# parser -------------------------------------------------------------------

_TEXT_DEFAULT = {"power-curve": "csv", "cdf-approx": "csv", "simulate": "json"}


def _add_globals(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="scenario config JSON")
    p.add_argument("--seed", type=int, default=d(None), help="random seed (overrides config)")
    p.add_argument("--format", choices=FORMATS, default=d(None), help="output format")
    p.add_argument("--out", default=d(None), help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doselab", description="Dose-optimization design calculations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("power-curve", parents=[common], help="power of a weaker signal versus x")
    p.add_argument("--x-min", type=float, default=0.25)
    p.add_argument("--x-max", type=float, default=0.75)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--r", default="1.2,1.5,2.0", help="comma-separated relative strengths (> 1)")
    p.set_defaults(func=cmd_power_curve)

    p = sub.add_parser("cdf-approx", parents=[common], help="normal CDF versus its linear approximation")
    p.add_argument("--x-min", type=float, default=-3.0)
    p.add_argument("--x-max", type=float, default=3.0)
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_cdf_approx)

    p = sub.add_parser("thresholds", parents=[common], help="break-even weights for dropping arms")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("posterior", parents=[common], help="posterior over dose-response shapes")
    p.add_argument("--counts", required=True, help="responders per dose, e.g. 3,6,9")
    p.add_argument("--n", required=True, help="patients per dose (one value or three)")
    p.add_argument("--samples", type=int, default=None, help="prior draws for importance sampling")
    p.add_argument("--method", choices=METHODS, default=None)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("simulate", parents=[common], help="probability of correct selection")
    p.add_argument("--design", choices=DESIGN_KINDS, default=None)
    p.add_argument("--pair", choices=[q.value for q in Pair], default=None)
    p.add_argument("--n-per-arm", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--posterior-samples", type=int, default=None)
    p.add_argument("--truth", default=None, help="true response rates, e.g. 0.1,0.2,0.3")
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--workers", type=int, default=1, help="threads; results do not depend on it")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rate", parents=[common], help="dose-readiness star rating")
    p.add_argument("randomization", nargs="?", help="none, 2dose or 3dose")
    p.add_argument("expansion", nargs="?", help="none, backfill-low, extended-moderate or extended-high")
    p.add_argument("--table", action="store_true", help="print every cell")
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = _TEXT_DEFAULT.get(args.command, "text")
    try:
        config = resolve_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise UsageError("--seed must be non-negative")
            config = config.with_overrides(seed=args.seed)
        output = args.func(args, config)
    except (UsageError, ConfigError) as exc:
        print(f"doselab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, MemoryError) as exc:
        print(f"doselab {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(output)
        except OSError as exc:
            print(f"doselab: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
