import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .audit import audit_frontload_bound, run_audit_suite
from .config import FORMATS, RunConfig, apply_overrides, load_config
from .constants import derive_constants
from .errors import ConfigError, DeltaTooLow, ReputationError
from .game import capital_taxation_vstar, payoff_table, v_star
from .report import ReportBundle, dumps, write_bundle
from .simulator import run_experiment, simulate_paths
from .solver import TrustLP, grid_oracle, solve_general_lp, solve_trust_lp

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_DELTA = 3
EXIT_FAILED = 4

GRID_MESH = 1e-3
GRID_TOL = 5e-3
LP_TOL = 1e-9


def _lp_rows(config: RunConfig) -> Tuple[List[Dict[str, Any]], bool]:
    """Closed-form v* against the vertex LP for every type."""
    spec = config.spec()
    tol = 0 if spec.exact else LP_TOL
    rows, passed = [], True
    for j, theta in enumerate(spec.thetas):
        closed = v_star(theta, spec.thetas[0], spec.gstar)
        dist, value = solve_trust_lp(theta, spec.thetas[0], spec.gstar)
        gap = abs(value - closed)
        ok = gap <= tol
        passed &= ok
        rows.append({"type": j + 1, "theta": theta, "v_star": closed, "lp": value,
                     "lp_alpha": {"N": dist.n, "H": dist.h, "L": dist.l}, "gap": gap, "passed": ok})
    return rows, passed


def _variant_rows(config: RunConfig) -> Tuple[List[Dict[str, Any]], bool]:
    """Generalized program values for the configured variant."""
    game = config.stage_game()
    require = ("A1", "A3") if config.variant == "capital-taxation" else ("A1", "A2", "A3")
    tol = 0 if game.exact else LP_TOL
    rows, passed = [], True
    for j, theta in enumerate(game.thetas):
        row: Dict[str, Any] = {"type": j + 1, "theta": theta, "general_lp": solve_general_lp(game, j, require)}
        if config.variant == "capital-taxation":
            spec = config.spec()
            row["closed_form"] = capital_taxation_vstar(theta, game.thetas[0], spec.gstar)
            row["passed"] = abs(row["general_lp"] - row["closed_form"]) <= tol
            passed &= row["passed"]
        rows.append(row)
    return rows, passed


def cmd_payoff_bounds(config: RunConfig, bundle: ReportBundle, args) -> bool:
    spec = config.spec()
    bundle.payoff_table = payoff_table(spec)
    rows, passed = _lp_rows(config)
    if config.variant not in ("trust-sequential", "trust-simultaneous"):
        variant_rows, variant_ok = _variant_rows(config)
        rows = [{**row, "variant": variant} for row, variant in zip(rows, variant_rows)]
        passed &= variant_ok
    bundle.lp_check = rows
    for row in bundle.payoff_table:
        logger.info(f"Type {row['type']}: v**={float(row['v_stackelberg']):.6f} v*={float(row['v_star']):.6f} "
                    f"v(gamma)={float(row['v_gamma']):.6f}")
    return passed


def cmd_lp_check(config: RunConfig, bundle: ReportBundle, args) -> bool:
    spec = config.spec()
    rows, passed = _lp_rows(config)
    for row in rows:
        theta = row["theta"]
        grid = grid_oracle(TrustLP(float(theta), float(spec.thetas[0]), float(spec.gstar)), args.mesh)
        row["grid"] = grid
        row["grid_gap"] = abs(grid - float(row["v_star"]))
        row["grid_ok"] = row["grid_gap"] <= GRID_TOL
        passed &= row["grid_ok"]
    bundle.lp_check = rows
    logger.info(f"LP check on {len(rows)} types: {'pass' if passed else 'FAIL'}")
    return passed


def cmd_constants(config: RunConfig, bundle: ReportBundle, args) -> bool:
    bundle.constants = derive_constants(config.spec()).to_dict()
    return True


def cmd_simulate(config: RunConfig, bundle: ReportBundle, args) -> bool:
    spec = config.spec()
    consts = derive_constants(spec)
    exp = config.experiment
    stats = run_experiment(spec, consts, exp.n_paths, exp.horizon, exp.seed0, exp.workers)
    bundle.stats = stats
    if args.traces:
        horizon = stats.horizon
        for j in range(spec.m):
            bundle.traces[j] = simulate_paths(spec, consts, j, min(args.traces, exp.n_paths), horizon,
                                              exp.seed0, record=True)
    truncated = sum(s.truncated for s in stats.per_type)
    if truncated:
        logger.error(f"{truncated} paths did not reach Class 3 within {stats.horizon} periods")
    return truncated == 0


def cmd_audit(config: RunConfig, bundle: ReportBundle, args) -> bool:
    spec = config.spec()
    consts = derive_constants(spec)
    report = run_audit_suite(spec, consts, config.audit_settings())
    bundle.audit = report.to_dict()
    return report.passed


def cmd_frontload_bound(config: RunConfig, bundle: ReportBundle, args) -> bool:
    spec = config.spec()
    consts = derive_constants(spec)
    delta = args.delta if args.delta is not None else config.audit.frontload_delta
    max_len = args.max_len if args.max_len is not None else config.audit.max_len
    report = audit_frontload_bound(spec, consts, delta, max_len)
    bundle.audit = report.to_dict()
    return report.passed


HANDLERS = {
    "payoff-bounds": cmd_payoff_bounds,
    "constants": cmd_constants,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "frontload-bound": cmd_frontload_bound,
    "lp-check": cmd_lp_check,
}


def run(command: str, config: RunConfig, args: Optional[argparse.Namespace] = None) -> Tuple[ReportBundle, int]:
    """Execute one subcommand; returns the bundle and the exit status."""
    if command not in HANDLERS:
        raise ValueError(f"unknown command '{command}'")
    args = args or build_parser().parse_args([command])
    bundle = ReportBundle(command=command, config=config.to_dict())
    bundle.passed = HANDLERS[command](config, bundle, args)
    return bundle, EXIT_OK if bundle.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration document")
    common.add_argument("--seed", type=int, help="base seed for per-path streams")
    common.add_argument("--paths", type=int, help="simulated paths per type")
    common.add_argument("--horizon", type=int, help="periods simulated per path")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=FORMATS, help="output files to write")
    common.add_argument("--exact", action="store_true", help="parse numbers as rationals")
    common.add_argument("--depth", type=int, help="exhaustive state enumeration depth")
    level = common.add_mutually_exclusive_group()
    level.add_argument("--verbose", action="store_true")
    level.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="reputation-engine",
                                     description="Reputation equilibrium construction, simulation and audits")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("payoff-bounds", parents=[common], help="v**, v* and v(gamma) per type")
    sub.add_parser("constants", parents=[common], help="derived equilibrium constants")
    simulate = sub.add_parser("simulate", parents=[common], help="Monte Carlo play of the equilibrium")
    simulate.add_argument("--traces", type=int, default=0, help="recorded paths per type written as CSV")
    sub.add_parser("audit", parents=[common], help="full incentive and learning audit")
    frontload = sub.add_parser("frontload-bound", parents=[common],
                               help="exhaustive early-play bound over H/L sequences")
    frontload.add_argument("--max-len", type=int, dest="max_len")
    frontload.add_argument("--delta", type=float)
    lp = sub.add_parser("lp-check", parents=[common], help="closed form against LP and grid oracle")
    lp.add_argument("--mesh", type=float, default=GRID_MESH)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)
    command = args.command

    try:
        config = load_config(args.config, exact=args.exact)
        config = apply_overrides(config, seed=args.seed, paths=args.paths, horizon=args.horizon, out=args.out,
                                 fmt=args.format, depth=args.depth)
    except ConfigError as e:
        logger.error(f"Configuration error: {e.message}")
        print(dumps(e.to_dict()))
        return EXIT_CONFIG

    try:
        bundle, status = run(command, config, args)
    except DeltaTooLow as e:
        logger.error(f"Infeasible constants: {e.message}")
        print(dumps(e.to_dict()))
        return EXIT_DELTA
    except ConfigError as e:
        logger.error(f"Configuration error: {e.message}")
        print(dumps(e.to_dict()))
        return EXIT_CONFIG
    except ReputationError as e:
        logger.error(f"{command} failed: {e.message}")
        print(dumps(e.to_dict()))
        return EXIT_OTHER
    except (ValueError, OSError) as e:
        logger.error(f"{command} failed: {e}")
        print(dumps({"error": type(e).__name__, "message": str(e)}))
        return EXIT_OTHER

    spec = config.spec()
    write_bundle(bundle, Path(config.output.dir), config.output.format, spec)
    if status != EXIT_OK:
        logger.error(f"{command}: checks failed")
    else:
        logger.info(f"{command}: all checks passed")
    return status


def main_cli():
    """Entry point for the reputation-engine command."""
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    sys.exit(main())


if __name__ == "__main__":
    main_cli()
