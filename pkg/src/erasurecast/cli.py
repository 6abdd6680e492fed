"""Command-line front end.

Subcommands:

``mrp``           expected rewards of an absorbing Markov reward process
``uncoded-lp``    uncoded-phase LP solution and latency bounds
``chain-region``  certified builder distortion boundary along an ε_u sweep
``simulate``      one simulation run from a JSON config
``sweep``         a seed/parameter sweep from a JSON spec or a figure preset

Every subcommand writes a versioned CSV to ``--out`` (stdout by default).
Exit status is 0 on success, 1 on input errors and 2 on numeric errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from erasurecast.analysis.chaining import ChainRoles, distortion_boundary
from erasurecast.analysis.uncoded import latency_bounds, optimality_report, solve_uncoded_lp
from erasurecast.applications.figures import (
    AGGREGATE_COLUMNS,
    SWEEP_COLUMNS,
    SweepSpec,
    create_figure_sweep,
    run_sweep,
)
from erasurecast.markov import canonicalize, read_mrp, unscaled_rewards
from erasurecast.tools.experiment import run_experiment
from erasurecast.tools.simulator import RESULT_COLUMNS, SimConfig
from erasurecast.utils import parse_float_list
from erasurecast.utils.checks import (
    InfeasibleException,
    NotAbsorbingException,
    NumericFailureException,
    RejectedInputException,
    SingularMatrixException,
    UnboundedException,
    UnreachableAbsorptionException,
)
from erasurecast.utils.io import open_output, write_csv

__all__ = ["dispatch", "main", "build_parser"]

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

NUMERIC_ERRORS = (
    SingularMatrixException,
    InfeasibleException,
    UnboundedException,
    NumericFailureException,
    UnreachableAbsorptionException,
    NotAbsorbingException,
)
INPUT_ERRORS = (RejectedInputException, KeyError, OSError, json.JSONDecodeError)

MRP_COLUMNS = ("state", "reward_horizon", "value", "absorbing_state")
UNCODED_COLUMNS = (
    "eps1",
    "eps2",
    "eps3",
    "t0",
    "t1",
    "t2",
    "t3",
    "t_star",
    "w_minus",
    "w_plus",
    "q_res1",
    "q_res2",
    "q_res3",
    "theorem2",
    "theorem3",
    "status",
)
CHAIN_REGION_COLUMNS = ("eps_u", "d_hat_u", "e_reward_u", "e_reward_E", "d_i_boundary")


###############################################################################
# Argument parsing helpers.
###############################################################################


def _triple(text: str) -> List[float]:
    values = parse_float_list(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    return values


def _horizon(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"horizon must be a positive integer or 'inf', got {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"horizon must be positive, got {n}")
    return n


def _range(text: str) -> List[float]:
    """``a:b:step`` inclusive of b."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in a:b:step, got {text!r}")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty or backwards sweep {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def _seeds(text: str) -> List[int]:
    """``a,b,c`` or the half-open range ``a:b``."""
    try:
        if ":" in text:
            start, stop = (int(p) for p in text.split(":"))
            return list(range(start, stop))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse seeds {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Output CSV path (default: stdout).")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG."
    )

    parser = argparse.ArgumentParser(
        prog="erasurecast",
        description="Three-user erasure broadcast with feedback: analysis and simulation.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    mrp = sub.add_parser("mrp", parents=[common], help="Absorbing Markov reward process rewards.")
    mrp.add_argument("--spec", required=True, help="Two-matrix MRP file.")
    mrp.add_argument("--horizon", type=_horizon, default=math.inf, help="n or 'inf'.")
    mrp.add_argument("--prior", type=parse_float_list, default=None, help="p1,p2,...")
    mrp.add_argument(
        "--conditional", action="store_true", help="Add R̄∞(i, j) rows (infinite horizon)."
    )

    lp = sub.add_parser("uncoded-lp", parents=[common], help="Uncoded-phase LP.")
    lp.add_argument("--eps", type=_triple, required=True, help="e1,e2,e3")
    lp.add_argument("--d", type=_triple, default=None, help="d1,d2,d3")

    region = sub.add_parser(
        "chain-region", parents=[common], help="Certified builder distortion boundary."
    )
    region.add_argument("--eps-i", type=float, required=True, help="Builder erasure probability.")
    region.add_argument("--eps-k", type=float, required=True, help="Bottleneck target's.")
    region.add_argument("--sweep-eps-u", type=_range, required=True, help="a:b:step")
    size = region.add_mutually_exclusive_group()
    size.add_argument("--N", dest="n_symbols", type=int, default=None)
    size.add_argument("--asymptotic", action="store_true")

    sim = sub.add_parser("simulate", parents=[common], help="One simulation run.")
    sim.add_argument("--config", required=True, help="SimConfig JSON file.")
    sim.add_argument("--seed", type=int, default=None, help="Override the config seed.")
    sim.add_argument("--trace", default=None, help="Write one line per slot to this file.")

    sweep = sub.add_parser("sweep", parents=[common], help="Parameter and seed sweep.")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", default=None, help="SweepSpec JSON file.")
    source.add_argument("--figure", default=None, help="fig2, fig3, fig4 or fig4_latency.")
    sweep.add_argument("--seeds", type=_seeds, default=None, help="a,b,c or a:b")
    sweep.add_argument("--n-symbols", type=int, default=None)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--aggregate", default=None, help="Aggregate CSV path.")
    return parser


###############################################################################
# Subcommands.
###############################################################################


def _fmt_horizon(horizon: float) -> str:
    return "inf" if math.isinf(horizon) else str(int(horizon))


def cmd_mrp(args: argparse.Namespace) -> int:
    spec = read_mrp(args.spec)
    c = canonicalize(spec)
    summary = unscaled_rewards(c, args.horizon, args.prior)
    label = _fmt_horizon(args.horizon)
    rows: List[Dict[str, Any]] = [
        {"state": s + 1, "reward_horizon": label, "value": float(v)}
        for s, v in enumerate(summary.per_state)
    ]
    if summary.with_prior is not None:
        rows.append({"state": "prior", "reward_horizon": label, "value": summary.with_prior})
    if args.conditional:
        if summary.conditional is None:
            raise RejectedInputException("--conditional needs --horizon inf.")
        for a, i in enumerate(c.transient_states):
            for b, j in enumerate(c.absorbing_states):
                value = summary.conditional[a, b]
                rows.append(
                    {
                        "state": i + 1,
                        "reward_horizon": label,
                        "value": None if math.isnan(value) else float(value),
                        "absorbing_state": j + 1,
                    }
                )
    with open_output(args.out) as f:
        write_csv(f, "mrp", MRP_COLUMNS, rows)
    return EXIT_OK


def cmd_uncoded_lp(args: argparse.Namespace) -> int:
    solution = solve_uncoded_lp(args.eps)
    row: Dict[str, Any] = {
        "t0": solution.t0,
        "t_star": solution.t_star,
    }
    for u in range(3):
        row[f"eps{u + 1}"] = float(args.eps[u])
        row[f"t{u + 1}"] = solution.t[u]
        row[f"q_res{u + 1}"] = solution.residual_queues[u]
    if args.d is not None:
        report = optimality_report(args.eps, args.d)
        bounds = latency_bounds(args.eps, args.d)
        row.update(
            w_minus=bounds.w_minus,
            w_plus=bounds.w_plus,
            theorem2=report.theorem2_holds,
            theorem3=report.theorem3_holds,
            status=report.status,
        )
    with open_output(args.out) as f:
        write_csv(f, "uncoded-lp", UNCODED_COLUMNS, [row])
    return EXIT_OK


def cmd_chain_region(args: argparse.Namespace) -> int:
    if not args.asymptotic and args.n_symbols is None:
        raise RejectedInputException("chain-region needs --N n or --asymptotic.")
    if args.n_symbols is not None and args.n_symbols < 1:
        raise RejectedInputException("--N must be positive.")
    # User 1 builds, user 2 is the swept non-bottleneck target, user 3 the other.
    roles = ChainRoles.create(builder=0, u=1)
    eps = (args.eps_i, args.sweep_eps_u[0], args.eps_k)
    points = distortion_boundary(
        eps, roles, args.sweep_eps_u, n_symbols=None if args.asymptotic else args.n_symbols
    )
    with open_output(args.out) as f:
        write_csv(f, "chain-region", CHAIN_REGION_COLUMNS, [p._asdict() for p in points])
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = SimConfig.load_json(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.trace is not None and not cfg.trace:
        cfg = cfg.replace(trace=True)
    result = run_experiment(cfg)
    with open_output(args.out) as f:
        write_csv(f, "simulate", RESULT_COLUMNS, [result.to_row()])
    if args.trace is not None:
        with open_output(args.trace) as f:
            for line in result.trace:
                f.write(line + "\n")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.config is not None:
        spec = SweepSpec.load_json(args.config)
    else:
        spec = create_figure_sweep(args.figure)
    if args.seeds is not None:
        spec = spec.replace(seeds=tuple(args.seeds))
    if args.n_symbols is not None:
        spec = spec.replace(base=spec.base.replace(n_symbols=args.n_symbols))
    if args.workers < 1:
        raise RejectedInputException("--workers must be at least 1.")
    output = run_sweep(spec, workers=args.workers)
    with open_output(args.out) as f:
        write_csv(f, "sweep", SWEEP_COLUMNS, output.rows)
    if args.aggregate is not None:
        with open_output(args.aggregate) as f:
            write_csv(f, "sweep-aggregate", AGGREGATE_COLUMNS, output.aggregates)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "mrp": cmd_mrp,
    "uncoded-lp": cmd_uncoded_lp,
    "chain-region": cmd_chain_region,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


###############################################################################
# Entry points.
###############################################################################


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("erasurecast").setLevel(level)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse `argv`, run the subcommand and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except NUMERIC_ERRORS as e:
        logger.error("%s", e)
        print(f"erasurecast: numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except INPUT_ERRORS as e:
        logger.error("%s", e)
        print(f"erasurecast: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
