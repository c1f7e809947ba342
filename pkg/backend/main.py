import argparse
import csv
import logging
import math
import os
import sys
from typing import List, Optional, Sequence

from dotenv import load_dotenv

load_dotenv()

from agents.orchestrator import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, KNOWN_CHECK_SETS, OrchestratorAgent
from experiments.config import reference_table
from solver.errors import SolverError
from solver.linear_analysis import dispersion_table, linear_regime_check
from solver.littlewood_paley import besov_norm
from solver.model import ModelParams
from solver.spectral_core import GridSpec, quadrature_lp, pointwise_magnitude
from utils.field_io import read_snapshot, snapshot_target

LOG_LEVEL_STR = os.getenv('LOG_LEVEL', 'INFO').upper()
LOG_LEVEL = getattr(logging, LOG_LEVEL_STR, logging.INFO)

logger = logging.getLogger(__name__)


def _floats(text: str) -> List[float]:
    return [math.inf if part.strip().lower() == "inf" else float(part) for part in text.split(",") if part.strip()]


def cmd_run(args) -> int:
    outcome = OrchestratorAgent().run_experiment(args.config, args.category, args.output)
    print(f"Report: {outcome.report_path}")
    return outcome.exit_code


def cmd_summarize(args) -> int:
    outcome = OrchestratorAgent().summarize(args.csv, args.category, args.config)
    print(f"Report: {outcome.report_path}")
    return outcome.exit_code


def cmd_norms(args) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["snapshot", "s", "p", "r", "homogeneous", "value"])
    besov = [_floats(spec) for spec in args.besov or []]
    for path in args.snapshots:
        snapshot = read_snapshot(path)
        field = snapshot_target(snapshot, args.component)
        logger.info(f"{path}: t={snapshot.t!r}, n={snapshot.grid.n}")
        # L^p rows leave s and r empty
        for p in _floats(args.lp):
            value = quadrature_lp(pointwise_magnitude(field), p, snapshot.grid.cell_area)
            writer.writerow([path, "", p, "", "", repr(value)])
        for s, p, r in besov:
            value = besov_norm(field, s, p, r, homogeneous=args.homogeneous)
            writer.writerow([path, s, p, r, args.homogeneous, repr(value)])
    return EXIT_OK


def cmd_dispersion(args) -> int:
    k_values = [args.dk * i for i in range(1, int(round(args.kmax / args.dk)) + 1)]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["k", "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus"])
    for row in dispersion_table(k_values, coupling=0.5 * args.alpha, diffusivity=args.mu):
        writer.writerow([repr(v) for v in row])
    return EXIT_OK


def cmd_linear_check(args) -> int:
    grid = GridSpec(n=args.n)
    params = ModelParams(a=0.0, mu=args.mu, nu=0.0, alpha=args.alpha, b=1.0, rotation_mode="full")
    mode = tuple(int(m) for m in args.mode.split(","))
    deviation = linear_regime_check(grid, params, amplitude=args.amplitude, mode=mode,
                                    t_end=args.t_end, dt=args.dt)
    verdict = "PASS" if deviation <= args.tolerance else "FAIL"
    print(f"mode {mode}: max relative deviation {deviation:.3e} (tolerance {args.tolerance:g}) {verdict}")
    return EXIT_OK if verdict == "PASS" else EXIT_CHECK_FAILED


def cmd_defaults(args) -> int:
    rows = reference_table()
    width = max(len(key) for key, _, _ in rows)
    for key, default, description in rows:
        print(f"{key:<{width}}  {default:<12}  {description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Pseudo-spectral Oldroyd-B experiments and diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Run the experiment described by a config file.")
    p.add_argument("config", help="Path to a run configuration (.cfg).")
    p.add_argument("-c", "--category", default=None,
                   choices=KNOWN_CHECK_SETS + [c.lower() for c in KNOWN_CHECK_SETS],
                   help="Check set to apply. Inferred from the config when omitted.")
    p.add_argument("-o", "--output", default=None, help="Override outputs.directory.")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="Apply a check set to an existing diagnostics CSV.")
    p.add_argument("csv", help="Path to diagnostics.csv.")
    p.add_argument("-c", "--category", default=None, help="Check set to apply.")
    p.add_argument("--config", default=None, help="Run configuration (defaults to the echo next to the CSV).")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("norms", help="Print L^p and Besov norms of snapshot fields as CSV.")
    p.add_argument("snapshots", nargs="+", help="Snapshot files.")
    p.add_argument("--component", default=None, help="Component name, 'u' or 'tau'.")
    p.add_argument("--lp", default="2,4,inf", help="Comma list of Lebesgue exponents.")
    p.add_argument("--besov", action="append", metavar="S,P,R", help="Besov indices; may be repeated.")
    p.add_argument("--homogeneous", action="store_true", help="Use homogeneous blocks.")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("dispersion", help="Print the linear dispersion table as CSV.")
    p.add_argument("--kmax", type=float, required=True)
    p.add_argument("--dk", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("linear-check", help="Compare the nonlinear solver with the single-mode oracle.")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--mode", default="1,0", help="Integer wavevector m1,m2.")
    p.add_argument("--amplitude", type=float, default=1e-8)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_linear_check)

    p = sub.add_parser("defaults", help="Print every config key with its default.")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=LOG_LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SolverError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
