"""Command-line interface.

Five subcommands: ``screen`` (all-singletons separability test), ``index``
(separability index of a given partition), ``sobol`` (lower/upper sensitivity
indices of given subsets), ``analyze`` (block discovery with a full trace),
and ``oracle`` (exact quadrature verification at small dimension).

Reports embed the full configuration; with the JSON format, identical
configurations produce byte-identical output except for the wall-time field.
Exit codes: 0 success (screen/index: separable), 1 non-separable verdict,
2 usage or evaluation error, 3 truncated search.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass

from . import __version__
from .benchmarks import make_builtin
from .errors import SepscanError
from .estimator import (
    DecisionRule,
    estimate_gamma,
    estimate_sigma2,
    estimate_tau_lower,
    estimate_tau_upper,
    full_separability_screen,
)
from .expressions import ExpressionFunction
from .external import ExternalFunction
from .functions import BlackBoxFunction, parse_domain
from .oracle import (
    DEFAULT_BUDGET,
    AnovaOracle,
    GaussLegendreRule,
    separability_residual,
)
from .sampling import generate_samples
from .search import DEFAULT_CANDIDATE_BUDGET, discover_partition, refine_partition
from .subsets import parse_partition, parse_subset

SCHEMA_VERSION = 1
ORACLE_MAX_DIM = 6


@dataclass
class RunConfig:
    """Everything that determines a run's numbers; echoed in every report."""

    command: str
    function: str
    dimension: int
    n: int
    seed: int
    rule: DecisionRule
    format: str = "json"
    domain: str | None = None
    partition: str | None = None
    subsets: tuple[str, ...] = ()
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET
    quad_nodes: int | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "function": self.function,
            "dimension": self.dimension,
            "samples": self.n,
            "seed": self.seed,
            "rule": self.rule.to_dict(),
            "format": self.format,
            "domain": self.domain,
            "partition": self.partition,
            "subsets": list(self.subsets),
            "candidate_budget": self.candidate_budget,
            "quad_nodes": self.quad_nodes,
        }


def _resolve_dimension(selector: str, dim_flag: int | None) -> int:
    scheme, _, rest = selector.partition(":")
    if scheme == "builtin":
        probe = make_builtin(rest, dim_flag)  # validates name and dimension
        return probe.dimension
    if dim_flag is None:
        raise ValueError(f"{scheme} functions need an explicit dimension (-s)")
    return dim_flag


def build_function(config: RunConfig, threads: int = 1) -> BlackBoxFunction:
    selector = config.function
    if ":" not in selector:
        raise ValueError(
            f"bad function selector {selector!r}; use builtin:NAME, "
            'expr:"SOURCE", or exec:COMMAND'
        )
    scheme, _, rest = selector.partition(":")
    domain = None
    if config.domain is not None:
        domain = parse_domain(config.domain, config.dimension)
    if scheme == "builtin":
        f = make_builtin(rest, config.dimension, domain=domain)
    elif scheme == "expr":
        f = ExpressionFunction(rest, config.dimension, domain=domain)
    elif scheme == "exec":
        f = ExternalFunction(rest, config.dimension, domain=domain)
    else:
        raise ValueError(f"unknown function scheme {scheme!r}")
    f.threads = max(1, threads)
    return f


# --- commands ---------------------------------------------------------------


def run_screen(config: RunConfig, threads: int = 1) -> tuple[dict, int]:
    f = build_function(config, threads)
    batch = generate_samples(config.dimension, config.n, config.seed)
    est = full_separability_screen(f, batch, config.rule)
    payload = {"estimate": est.to_dict()}
    return _report(config, payload, f), 0 if est.decision == "separable" else 1


def run_index(config: RunConfig, threads: int = 1) -> tuple[dict, int]:
    if config.partition is None:
        raise ValueError("index needs --partition")
    partition = parse_partition(config.partition, config.dimension)
    f = build_function(config, threads)
    batch = generate_samples(config.dimension, config.n, config.seed)
    est = estimate_gamma(f, partition, batch, config.rule)
    payload = {"estimate": est.to_dict()}
    return _report(config, payload, f), 0 if est.decision == "separable" else 1


def run_sobol(config: RunConfig, threads: int = 1) -> tuple[dict, int]:
    if not config.subsets:
        raise ValueError("sobol needs at least one --subset")
    subsets = [parse_subset(text) for text in config.subsets]
    for u in subsets:
        if not u:
            raise ValueError("sobol subsets must be nonempty")
    f = build_function(config, threads)
    batch = generate_samples(config.dimension, config.n, config.seed)
    sigma2 = estimate_sigma2(f, batch)
    rows = []
    for u in subsets:
        lower = estimate_tau_lower(f, u, batch)
        upper = estimate_tau_upper(f, u, batch)
        rows.append(
            {
                "subset": str(u),
                "tau_lower": lower,
                "tau_upper": upper,
                "lower_normalized": lower / sigma2 if sigma2 > 0 else None,
                "upper_normalized": upper / sigma2 if sigma2 > 0 else None,
            }
        )
    payload = {"sigma2": sigma2, "subsets": rows}
    return _report(config, payload, f), 0


def run_analyze(config: RunConfig, threads: int = 1) -> tuple[dict, int]:
    f = build_function(config, threads)
    batch = generate_samples(config.dimension, config.n, config.seed)
    if config.partition is not None:
        prior = parse_partition(config.partition, config.dimension)
        partition, trace = refine_partition(
            f, batch, config.rule, prior, config.candidate_budget, verify=True
        )
    else:
        partition, trace = discover_partition(
            f, batch, config.rule, config.candidate_budget, verify=True
        )
    payload = {"partition": str(partition), "trace": trace.to_dict()}
    code = 0
    if trace.invalid_blocks:
        code = 1
    if trace.truncated:
        code = 3
    return _report(config, payload, f), code


def _auto_nodes(s: int) -> int:
    n = 32
    while n > 2 and n**s > DEFAULT_BUDGET:
        n -= 1
    return n


def run_oracle(config: RunConfig, threads: int = 1) -> tuple[dict, int]:
    s = config.dimension
    if s > ORACLE_MAX_DIM:
        raise SepscanError(
            f"oracle supports dimension <= {ORACLE_MAX_DIM} "
            f"(the tensor grid budget rules out s = {s})"
        )
    f = build_function(config, threads)
    rule = GaussLegendreRule(config.quad_nodes or _auto_nodes(s))
    engine = AnovaOracle(f, rule)
    payload: dict = {
        "quad_nodes": rule.count,
        "mean": engine.mean(),
        "sigma2": engine.sigma2(),
    }
    if config.subsets:
        sigma2 = payload["sigma2"]
        rows = []
        for text in config.subsets:
            u = parse_subset(text)
            lower = engine.lower_index(u)
            upper = engine.upper_index(u)
            rows.append(
                {
                    "subset": str(u),
                    "tau_lower": lower,
                    "tau_upper": upper,
                    "lower_normalized": lower / sigma2 if sigma2 > 0 else None,
                    "upper_normalized": upper / sigma2 if sigma2 > 0 else None,
                }
            )
        payload["subsets"] = rows
    if config.partition is not None:
        partition = parse_partition(config.partition, s)
        grid = generate_samples(s, 1000, config.seed).x
        residuals = separability_residual(f, partition, grid, mode="anchored")
        payload["partition"] = str(partition)
        payload["gamma2"] = engine.gamma2(partition)
        payload["residual_max"] = float(abs(residuals).max())
    return _report(config, payload, f), 0


COMMANDS = {
    "screen": run_screen,
    "index": run_index,
    "sobol": run_sobol,
    "analyze": run_analyze,
    "oracle": run_oracle,
}


# --- report assembly and rendering ------------------------------------------


def _report(config: RunConfig, payload: dict, f: BlackBoxFunction) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "sepscan", "version": __version__},
        "config": config.to_dict(),
        "result": payload,
        "eval_count": f.eval_count,
        "wall_time_s": 0.0,  # patched in by main() just before rendering
    }


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _estimate_row(est: dict) -> dict:
    keys = (
        "partition",
        "gamma2",
        "sigma2",
        "normalized",
        "stderr",
        "residual_max",
        "scale",
        "decision",
        "n",
        "seed",
    )
    return {k: est[k] for k in keys}


def render_csv(report: dict) -> str:
    command = report["config"]["command"]
    payload = report["result"]
    out = io.StringIO()
    if command in ("screen", "index"):
        rows = [_estimate_row(payload["estimate"])]
    elif command == "sobol":
        rows = [dict(r, sigma2=payload["sigma2"]) for r in payload["subsets"]]
    elif command == "analyze":
        rows = payload["trace"]["entries"]
        if not rows:
            rows = [{"candidate": "", "gamma2": "", "residual_max": "",
                     "stderr": "", "decision": ""}]
        rows = [dict(r, partition=payload["partition"]) for r in rows]
    else:
        rows = [{"quantity": "mean", "subset": "", "value": payload["mean"]},
                {"quantity": "sigma2", "subset": "", "value": payload["sigma2"]}]
        for r in payload.get("subsets", ()):
            rows.append({"quantity": "tau_lower", "subset": r["subset"],
                         "value": r["tau_lower"]})
            rows.append({"quantity": "tau_upper", "subset": r["subset"],
                         "value": r["tau_upper"]})
        if "gamma2" in payload:
            rows.append({"quantity": "gamma2", "subset": payload["partition"],
                         "value": payload["gamma2"]})
            rows.append({"quantity": "residual_max", "subset": payload["partition"],
                         "value": payload["residual_max"]})
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return out.getvalue()


def render_text(report: dict) -> str:
    config = report["config"]
    command = config["command"]
    payload = report["result"]
    lines = [
        f"sepscan {command}: {config['function']}  s={config['dimension']}"
        f"  n={config['samples']}  seed={config['seed']}"
    ]
    if command in ("screen", "index"):
        est = payload["estimate"]
        lines.append(f"partition     {est['partition']}")
        lines.append(f"gamma2        {est['gamma2']:.6g}")
        lines.append(f"sigma2        {est['sigma2']:.6g}")
        if est["normalized"] is not None:
            lines.append(f"normalized    {est['normalized']:.6g}")
        lines.append(f"stderr        {est['stderr']:.6g}")
        lines.append(f"residual_max  {est['residual_max']:.6g}")
        lines.append(f"decision      {est['decision']}")
    elif command == "sobol":
        lines.append(f"sigma2        {payload['sigma2']:.6g}")
        for r in payload["subsets"]:
            lines.append(
                f"{r['subset']:<12} lower {r['tau_lower']:.6g}"
                f"  upper {r['tau_upper']:.6g}"
            )
    elif command == "analyze":
        trace = payload["trace"]
        for e in trace["entries"]:
            lines.append(
                f"test {e['candidate']:<12} gamma2 {e['gamma2']:+.3e}"
                f"  residual_max {e['residual_max']:.3e}  -> {e['decision']}"
            )
        lines.append(f"partition     {payload['partition']}")
        lines.append(f"candidates    {trace['candidates_tested']}")
        if trace["invalid_blocks"]:
            lines.append("invalid       " + " ".join(trace["invalid_blocks"]))
        if trace["truncated"]:
            lines.append("search truncated by the candidate budget")
    else:
        lines.append(f"quad_nodes    {payload['quad_nodes']}")
        lines.append(f"mean          {payload['mean']:.12g}")
        lines.append(f"sigma2        {payload['sigma2']:.12g}")
        for r in payload.get("subsets", ()):
            lines.append(
                f"{r['subset']:<12} lower {r['tau_lower']:.12g}"
                f"  upper {r['tau_upper']:.12g}"
            )
        if "gamma2" in payload:
            lines.append(f"gamma2        {payload['gamma2']:.12g}  ({payload['partition']})")
            lines.append(f"residual_max  {payload['residual_max']:.3e}")
    lines.append(f"evaluations   {report['eval_count']}")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "text": render_text}


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-f", "--function", required=True,
        help='function selector: builtin:NAME, expr:"SOURCE", or exec:COMMAND',
    )
    common.add_argument("-s", "--dim", type=int, default=None,
                        help="number of variables")
    common.add_argument("-n", "--samples", type=int, default=4096,
                        help="Monte Carlo sample pairs (default 4096)")
    common.add_argument("--seed", type=int, default=0,
                        help="RNG seed (default 0)")
    common.add_argument("--domain", default=None,
                        help="box domain a1:b1,a2:b2,... (one pair broadcasts)")
    common.add_argument("--rule", choices=("residual", "statistical"),
                        default="residual", help="zero-decision rule")
    common.add_argument("--tol-rel", type=float, default=1e-9,
                        help="relative residual tolerance (default 1e-9)")
    common.add_argument("--tol-abs", type=float, default=1e-12,
                        help="absolute residual tolerance (default 1e-12)")
    common.add_argument("--c-stat", type=float, default=3.0,
                        help="stderr multiple for the statistical rule (default 3)")
    common.add_argument("--format", choices=("json", "csv", "text"),
                        default="json", help="output format (default json)")
    common.add_argument("--threads", type=int, default=1,
                        help="evaluation worker cap; never changes results")

    parser = argparse.ArgumentParser(
        prog="sepscan",
        description="Estimate whether a black-box function splits into an "
                    "additive sum over disjoint variable blocks, and find the blocks.",
    )
    parser.add_argument("--version", action="version",
                        version=f"sepscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("screen", parents=[common],
                       help="test separability with respect to all variables")
    p = sub.add_parser("index", parents=[common],
                       help="separability index of a given partition")
    p.add_argument("--partition", required=True,
                   help="blocks like {1}|{2,4}|{3,5}")
    p = sub.add_parser("sobol", parents=[common],
                       help="lower/upper sensitivity indices of subsets")
    p.add_argument("--subset", action="append", default=[],
                   help="subset like {2,4}; repeatable")
    p = sub.add_parser("analyze", parents=[common],
                       help="discover the block structure")
    p.add_argument("--partition", default=None,
                   help="optional prior partition to re-check and refine")
    p.add_argument("--budget-candidates", type=int,
                   default=DEFAULT_CANDIDATE_BUDGET,
                   help="candidate cap before the search gives up")
    p = sub.add_parser("oracle", parents=[common],
                       help="exact quadrature verification (small s only)")
    p.add_argument("--partition", default=None,
                   help="partition whose exact index to compute")
    p.add_argument("--subset", action="append", default=[],
                   help="subset whose exact indices to compute; repeatable")
    p.add_argument("--quad-nodes", type=int, default=None,
                   help="1-d quadrature nodes (default: largest feasible <= 32)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    rule = DecisionRule(
        kind=args.rule, tol_abs=args.tol_abs, tol_rel=args.tol_rel,
        c_stat=args.c_stat,
    )
    dimension = _resolve_dimension(args.function, args.dim)
    return RunConfig(
        command=args.command,
        function=args.function,
        dimension=dimension,
        n=args.samples,
        seed=args.seed,
        rule=rule,
        format=args.format,
        domain=args.domain,
        partition=getattr(args, "partition", None),
        subsets=tuple(getattr(args, "subset", ()) or ()),
        candidate_budget=getattr(args, "budget_candidates", DEFAULT_CANDIDATE_BUDGET),
        quad_nodes=getattr(args, "quad_nodes", None),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.monotonic()
    try:
        config = config_from_args(args)
        report, code = COMMANDS[args.command](config, threads=args.threads)
    except (SepscanError, ValueError, KeyError) as exc:
        print(f"sepscan: error: {exc}", file=sys.stderr)
        return 2
    report["wall_time_s"] = time.monotonic() - started
    sys.stdout.write(RENDERERS[config.format](report))
    return code


if __name__ == "__main__":
    sys.exit(main())
