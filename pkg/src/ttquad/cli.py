"""Command-line front end.

Examples::

    ttquad --method tt --dim 3 --expr "ln(x1*x2*x3)" --transform power:3 --format json
    ttquad --method dense --dim 2 --expr "x1^3*x2^2" --nodes 2
    ttquad --method mc --dim 2 --expr "1" --samples 100
    ttquad --sweep 2:8 --transform power:3 --max-evals 1000000

Exit codes: 0 success, 2 parse error, 3 configuration error, 4 non-finite
integrand value, 5 budget below the cost of the test sweep.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from typing import Sequence

import numpy as np

from .baselines import dense_weighted_sum, monte_carlo
from .exceptions import DimensionError, NonFiniteError, SizeError
from .expression import ExpressionError, parse_expression
from .integrator import Integrand, IntegrationConfig, integrate
from .quadrature import parse_substitution

__all__ = ["main", "run", "build_parser", "sweep_model_example", "REPORT_KEYS"]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_BUDGET = 5

REPORT_KEYS = (
    "method",
    "value",
    "evaluations",
    "wall_time_s",
    "ranks",
    "passes",
    "convergence_estimate",
    "standard_error",
    "seed",
    "config",
)

SWEEP_HEADER = "d,tt_rel_err,mc_rel_err,tt_evals,mc_evals"


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ttquad", description="Multivariate integration with tensor-train cross approximation.")
    p.add_argument("--method", choices=("tt", "dense", "mc"), default="tt")
    p.add_argument("--dim", type=int, help="number of variables x1..xd")
    p.add_argument("--expr", help='integrand, e.g. "ln(x1*x2*x3)"')
    p.add_argument("--box", help="per-axis intervals 'a1,b1;a2,b2;...' (default: unit cube)")
    p.add_argument("--nodes", default="13", help="nodes per axis, one integer or a comma list")
    p.add_argument("--quadrature", choices=("gauss-legendre",), default="gauss-legendre")
    p.add_argument(
        "--transform",
        default="none",
        help="none | power:<p> | tanh-sinh | erf, optionally '@1' to place the singularity at 1; "
        "global or per axis as 'k=spec,...' (1-based k)",
    )
    p.add_argument("--max-evals", type=int, default=1_000_000, help="soft limit on integrand evaluations")
    p.add_argument("--tol-test", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=None, help="fixed TT tolerance (overrides the budget rule)")
    p.add_argument("--max-rank", type=int, default=64)
    p.add_argument("--max-passes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count (default: --max-evals)")
    p.add_argument("--replace-nonfinite", action="store_true", help="count non-finite samples and use 0")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--sweep", metavar="DMIN:DMAX", help="run the ln(x1*...*xd) comparison over a range of d, CSV out")
    return p


def _parse_box(text, d):
    if text is None:
        return None
    parts = [s for s in text.split(";") if s.strip()]
    if len(parts) == 1 and d > 1:
        parts = parts * d
    if len(parts) != d:
        raise ConfigError(f"--box has {len(parts)} intervals for dimension {d}")
    box = []
    for part in parts:
        try:
            a, b = (float(v) for v in part.split(","))
        except ValueError:
            raise ConfigError(f"bad interval {part!r} in --box") from None
        if not b > a:
            raise ConfigError(f"degenerate interval [{a}, {b}] in --box")
        box.append((a, b))
    return box


def _parse_nodes(text, d):
    try:
        counts = [int(v) for v in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"bad --nodes value {text!r}") from None
    if len(counts) == 1:
        counts = counts * d
    if len(counts) != d:
        raise ConfigError(f"--nodes lists {len(counts)} counts for dimension {d}")
    return counts


def _parse_transform(text, d):
    text = text.strip()
    try:
        if "=" not in text:
            sub = parse_substitution(text)
            return [sub] * d
        subs = [parse_substitution(None)] * d
        for item in text.split(","):
            key, _, spec = item.partition("=")
            k = int(key)
            if not 1 <= k <= d:
                raise ConfigError(f"--transform axis {k} outside 1..{d}")
            subs[k - 1] = parse_substitution(spec)
        return subs
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _config_dict(args, subs, box, nodes):
    return {
        "dim": args.dim,
        "expr": args.expr,
        "box": [list(ab) for ab in box] if box else [[0.0, 1.0]] * args.dim,
        "nodes": nodes,
        "quadrature": args.quadrature,
        "transform": [s.label() for s in subs],
        "max_evals": args.max_evals,
        "tol_test": args.tol_test,
        "tol": args.tol,
        "max_rank": args.max_rank,
        "max_passes": args.max_passes,
        "samples": args.samples if args.samples is not None else args.max_evals,
        "replace_nonfinite": args.replace_nonfinite,
    }


def _emit(report: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(report) + "\n")
        return
    lines = [f"method:       {report['method']}", f"value:        {report['value']!r}",
             f"evaluations:  {report['evaluations']}", f"wall time:    {report['wall_time_s']:.3f} s"]
    if report["method"] == "tt":
        lines += [f"ranks:        {report['ranks']}", f"passes:       {report['passes']}",
                  f"convergence:  {_fmt_optional(report['convergence_estimate'])}"]
    if report["method"] == "mc":
        lines.append(f"std. error:   {report['standard_error']!r}")
    out.write("\n".join(lines) + "\n")


def run(args: argparse.Namespace, out=None, err=None) -> int:
    """Execute one parsed command line; returns the exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        if args.sweep:
            return _run_sweep(args, out)
        if args.dim is None or args.expr is None:
            raise ConfigError("--dim and --expr are required")
        if args.dim < 1:
            raise ConfigError("--dim must be positive")
        expr = parse_expression(args.expr, args.dim)
        box = _parse_box(args.box, args.dim)
        nodes = _parse_nodes(args.nodes, args.dim)
        subs = _parse_transform(args.transform, args.dim)
        f = Integrand(expr, args.dim)
        report = {k: None for k in REPORT_KEYS}
        report["method"] = args.method
        report["seed"] = args.seed
        report["config"] = _config_dict(args, subs, box, nodes)
        code = EXIT_OK
        t0 = time.perf_counter()
        if args.method == "tt":
            config = IntegrationConfig(
                nodes=nodes, substitution=subs, box=box, max_evals=args.max_evals, tol_test=args.tol_test,
                max_passes=args.max_passes, max_rank=args.max_rank, tol=args.tol, seed=args.seed,
                replace_nonfinite=args.replace_nonfinite,
            )
            res = integrate(f, config)
            report.update(value=res.value, evaluations=res.evaluations_used, ranks=res.final_ranks,
                          passes=res.passes, convergence_estimate=_finite_or_none(res.convergence_estimate))
            if args.tol is None and args.max_evals <= res.test_evaluations:
                err.write(f"ttquad: --max-evals {args.max_evals} does not exceed the test sweep "
                          f"({res.test_evaluations} evaluations); result is the test approximation\n")
                code = EXIT_BUDGET
        elif args.method == "dense":
            from .quadrature import make_grid

            grid = make_grid(args.dim, nodes, subs, box)
            value = dense_weighted_sum(f, grid, replace_nonfinite=args.replace_nonfinite)
            report.update(value=value, evaluations=math.prod(grid.shape))
        else:
            n = args.samples if args.samples is not None else args.max_evals
            value, se = monte_carlo(f, n, seed=args.seed, box=box, replace_nonfinite=args.replace_nonfinite)
            report.update(value=value, evaluations=n, standard_error=_finite_or_none(se))
        report["wall_time_s"] = time.perf_counter() - t0
        _emit(report, args.format, out)
        return code
    except ExpressionError as exc:
        err.write(f"ttquad: parse error: {exc}\n")
        return EXIT_PARSE
    except (ConfigError, DimensionError, SizeError, ValueError) as exc:
        err.write(f"ttquad: configuration error: {exc}\n")
        return EXIT_CONFIG
    except (NonFiniteError, ArithmeticError) as exc:
        err.write(f"ttquad: numerical failure: {exc}\n")
        return EXIT_NUMERICAL


def _fmt_optional(x):
    return "n/a" if x is None else f"{x:.3e}"


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def sweep_model_example(
    d_min: int, d_max: int, budget: int = 1_000_000, seed: int = 0, transform: str = "power:3", nodes: int = 13
) -> list[tuple[int, float, float, int, int]]:
    """Relative errors of TT and plain Monte Carlo on ``ln(x1*...*xd)`` (exact value ``-d``)."""
    if not 1 <= d_min <= d_max <= 12:
        raise ConfigError("need 1 <= d_min <= d_max <= 12")
    rows = []
    for d in range(d_min, d_max + 1):
        f = Integrand(lambda x: np.log(np.prod(x, axis=1)), d)
        res = integrate(f, IntegrationConfig(nodes=nodes, substitution=transform, max_evals=budget, seed=seed))
        mc, _ = monte_carlo(f, budget, seed=seed)
        rows.append((d, abs(res.value + d) / d, abs(mc + d) / d, res.evaluations_used, budget))
    return rows


def format_sweep_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(SWEEP_HEADER + "\n")
    for d, tt_err, mc_err, tt_evals, mc_evals in rows:
        buf.write(f"{d},{tt_err!r},{mc_err!r},{tt_evals},{mc_evals}\n")
    return buf.getvalue()


def _run_sweep(args, out) -> int:
    try:
        lo, hi = (int(v) for v in args.sweep.split(":"))
    except ValueError:
        raise ConfigError(f"bad --sweep range {args.sweep!r}, expected DMIN:DMAX") from None
    transform = args.transform if args.transform != "none" else "power:3"
    nodes = _parse_nodes(args.nodes, 1)[0]
    rows = sweep_model_example(lo, hi, args.max_evals, args.seed, transform, nodes)
    out.write(format_sweep_csv(rows))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
