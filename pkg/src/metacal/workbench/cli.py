"""Command-line front end: ``metacal <command> [--key value ...]``.

Exit codes: 0 success, 1 usage error, 2 computation or integrity error,
3 missing or stale workflow stage.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigurationError, MetacalError, StageError
from ..kriging import BASES, KERNELS
from ..optimize import ALGORITHMS
from . import stages
from .project import Project, default_project_dir

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_STAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--project", default=None,
                        help="project directory (default: $METACAL_PROJECT or the current directory)")
    common.add_argument("--seed", type=int, default=None, help="override the master seed")

    p = _Parser(prog="metacal", description="Surrogate-based calibration workbench for tidal estuary models.")
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth-obs", parents=[common], help="set up the scenario and synthesize observations")
    s.add_argument("--noise", type=_nonneg_float, default=None, help="observation noise sigma (m)")
    s.add_argument("--scenario", default=None, help="scenario JSON to use instead of the default")
    s.add_argument("--no-discrepancy", action="store_true", help="drop the structural model error")

    s = sub.add_parser("design", parents=[common], help="draw the Latin hypercube design")
    s.add_argument("--n", type=_positive_int, default=None, help="design size (default 10 per parameter)")

    s = sub.add_parser("evaluate", parents=[common], help="run the forward model on the design")
    s.add_argument("--workers", type=_positive_int, default=None)

    s = sub.add_parser("fit", parents=[common], help="fit one Kriging surrogate per station")
    s.add_argument("--kernel", choices=KERNELS, default="matern52")
    s.add_argument("--basis", choices=BASES, default="constant")
    s.add_argument("--restarts", type=_positive_int, default=8)

    s = sub.add_parser("validate", parents=[common], help="held-out check of the mean-RMSE surrogate")
    s.add_argument("--n-test", type=_positive_int, default=10)

    s = sub.add_parser("sobol", parents=[common], help="Sobol indices of the surrogate mean RMSE")
    s.add_argument("--n-mc", type=_positive_int, default=4096)
    s.add_argument("--second-order", action="store_true")
    s.add_argument("--workers", type=_positive_int, default=None)
    s.add_argument("--threshold", type=_nonneg_float, default=0.05)

    sub.add_parser("pca", parents=[common], help="PCA of the error table (correlation circle)")
    sub.add_parser("stats", parents=[common], help="per-station quantile summary")

    s = sub.add_parser("calibrate", parents=[common], help="minimize a surrogate goal")
    s.add_argument("--goal", default="mean", help="mean | std | max | station:<id>")
    s.add_argument("--algo", choices=ALGORITHMS, default="both")
    s.add_argument("--swarm", type=_positive_int, default=40)
    s.add_argument("--iters", type=_positive_int, default=200)
    s.add_argument("--starts", type=_positive_int, default=10)

    s = sub.add_parser("pareto", parents=[common], help="NSGA-II front for 2 or 3 objectives")
    s.add_argument("--objectives", required=True,
                   help="comma-separated: mean, std, max, station:<id>, bias:<id>, nash:<id>")
    s.add_argument("--pop", type=_positive_int, default=100)
    s.add_argument("--gens", type=_positive_int, default=150)

    s = sub.add_parser("check-optimum", parents=[common], help="re-run the simulator at a calibrated point")
    s.add_argument("--goal", default="mean")
    s.add_argument("--tolerance", type=_nonneg_float, default=0.01)

    sub.add_parser("report", parents=[common], help="write report.json from the completed stages")
    return p


def _check_spec(project: Project, text: str) -> None:
    try:
        scenario = stages.scenario_of(project)
    except MetacalError:
        return  # stage checks report the missing scenario
    try:
        for t in text.split(","):
            if t.strip():
                stages.parse_objective(scenario, t)
    except (ConfigurationError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _dispatch(args) -> dict:
    root = args.project if args.project is not None else default_project_dir()
    project = Project(root, args.seed)
    c = args.command
    if c == "synth-obs":
        return stages.synth_obs(project, args.noise, not args.no_discrepancy, args.scenario)
    if c == "design":
        return stages.design(project, args.n)
    if c == "evaluate":
        return stages.evaluate(project, args.workers)
    if c == "fit":
        return stages.fit(project, args.kernel, args.basis, args.restarts)
    if c == "validate":
        return stages.validate(project, args.n_test)
    if c == "sobol":
        return stages.run_sobol(project, args.n_mc, args.second_order, args.workers, args.threshold)
    if c == "pca":
        return stages.run_pca(project)
    if c == "stats":
        return stages.run_stats(project)
    if c == "calibrate":
        if project.stage_info("synth-obs"):
            _check_spec(project, args.goal)
        return stages.run_calibrate(project, args.goal, args.algo, args.swarm, args.iters, args.starts)
    if c == "pareto":
        if project.stage_info("synth-obs"):
            _check_spec(project, args.objectives)
        return stages.run_pareto(project, args.objectives, args.pop, args.gens)
    if c == "check-optimum":
        if project.stage_info("synth-obs"):
            _check_spec(project, args.goal)
        return stages.check_optimum(project, args.goal, args.tolerance)
    if c == "report":
        return stages.report(project)
    raise UsageError(f"unknown command {c!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "design" and args.n is not None and args.n < 1:
            raise UsageError("--n must be >= 1")
        summary = _dispatch(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"metacal: stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (MetacalError, ValueError, OSError) as exc:
        print(f"metacal: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    print(json.dumps({"command": args.command, **summary}, sort_keys=True, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
