import argparse
import contextlib
import csv
import logging
import sys
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from marshmallow import ValidationError

from .errors import SaturatedStudyError
from .flag_utils import format_range
from .integrator import IntegrationResult
from .interface import AdiExperiment
from .methods import get_method_by_order
from .problems import PROBLEMS
from .schema import (
    ConvergenceRequestSchema,
    ConvergenceRowSchema,
    IntegrateRequestSchema,
    OrderSchema,
    ScanRequestSchema,
)
from .stability import RegionKind, ScanGrid, scan_region, write_region_csv
from .tableau import format_tableau

ROUNDOFF_FLOOR = 100 * np.finfo(float).eps
CONVERGENCE_HEADER = ["nsteps", "error", "observed_order"]
INTEGRATION_HEADER = ["nsteps", "h", "error", "solves", "rhs_evals", "factorizations"]
LIBRARY_ERRORS = (ValueError, ArithmeticError, KeyError, OSError)
LOG_FORMAT = "%(asctime)s [%(levelname)8s] %(message)s"


@dataclass(frozen=True)
class ConvergenceRow:
    nsteps: int
    error: float
    observed_order: Optional[float] = None


def observed_orders(steps: Sequence[int], errors: Sequence[float]) -> List[Optional[float]]:
    """Pairwise orders log(e_prev / e) / log(n / n_prev); None for the first row."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    orders: List[Optional[float]] = [None]
    for k in range(1, len(steps)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.log(errors[k - 1] / errors[k]) / np.log(steps[k] / steps[k - 1])
        orders.append(float(ratio))
    return orders


def estimate_order(rows: Sequence[ConvergenceRow]) -> float:
    """Least-squares slope of log(error) against log(1/nsteps).

    Rows at or below the roundoff floor are dropped before fitting.

    Raises
    ------
    SaturatedStudyError
        if fewer than two rows remain or the error does not decrease
    """
    usable = [r for r in rows if np.isfinite(r.error) and r.error > ROUNDOFF_FLOOR]
    if len(usable) < len(rows):
        logging.warning(
            f"Dropped {len(rows) - len(usable)} rows at the roundoff floor {ROUNDOFF_FLOOR:.3e}"
        )
    if len(usable) < 2:
        raise SaturatedStudyError(len(usable), len(rows))
    errors = np.array([r.error for r in usable])
    if not np.any(errors[1:] < errors[:-1]):
        raise SaturatedStudyError(
            len(usable), len(rows), reason="error does not decrease with the step count"
        )
    inverse_steps = 1.0 / np.array([r.nsteps for r in usable], dtype=float)
    slope = np.polyfit(np.log(inverse_steps), np.log(errors), 1)[0]
    return float(slope)


def run_convergence(
    problem: str, order: int, n_points: int, steps_list: Sequence[int]
) -> Tuple[List[ConvergenceRow], float]:
    """Integrate once per step count and fit the temporal order.

    Runs are sequential and share one integrator; rows follow ``steps_list``.
    """
    experiment = AdiExperiment(problem, order, n_points)
    errors = []
    for nsteps in steps_list:
        result = experiment.run(nsteps)
        errors.append(result.error)
        logging.info(f"{experiment.describe(nsteps)}: error {result.error:.6e}")
    rows = [
        ConvergenceRow(nsteps=int(n), error=float(e), observed_order=o)
        for n, e, o in zip(steps_list, errors, observed_orders(steps_list, errors))
    ]
    slope = estimate_order(rows)
    logging.info(f"{experiment.describe()}: fitted order {slope:.3f}")
    return rows, slope


@contextlib.contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def _format_optional(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.17g}"


def write_convergence_csv(rows: Sequence[ConvergenceRow], path: Optional[str]) -> None:
    with _output(path) as f:
        writer = csv.writer(f)
        writer.writerow(CONVERGENCE_HEADER)
        for row in rows:
            writer.writerow(
                [row.nsteps, f"{row.error:.17g}", _format_optional(row.observed_order)]
            )


def read_convergence_csv(path: str) -> List[ConvergenceRow]:
    schema = ConvergenceRowSchema()
    with open(path, newline="") as f:
        return [ConvergenceRow(**schema.load(record)) for record in csv.DictReader(f)]


def write_integration_csv(result: IntegrationResult, path: Optional[str]) -> None:
    with _output(path) as f:
        writer = csv.writer(f)
        writer.writerow(INTEGRATION_HEADER)
        writer.writerow(
            [
                result.nsteps,
                f"{result.h:.17g}",
                _format_optional(result.error),
                result.solves,
                result.rhs_evals,
                result.factorizations,
            ]
        )


def converge_command(args: argparse.Namespace) -> int:
    request = ConvergenceRequestSchema().load(
        {
            "problem": args.problem,
            "order": args.order,
            "n_points": args.n_points,
            "steps": args.steps,
            "out": args.out,
        }
    )
    rows, slope = run_convergence(
        request["problem"], request["order"], request["n_points"], request["steps"]
    )
    write_convergence_csv(rows, request["out"])
    logging.info(f"Observed order {slope:.4f}")
    return 0


def stability_command(args: argparse.Namespace) -> int:
    request = ScanRequestSchema().load(
        {
            "order": args.order,
            "kind": args.kind,
            "re": args.re,
            "im": args.im,
            "n": args.n,
            "partitions": args.partitions,
            "out": args.out,
        }
    )
    method = get_method_by_order(request["order"])
    kind = RegionKind(request["kind"])
    grid = ScanGrid(re=request["re"], im=request["im"], n=request["n"])
    logging.info(
        f"Scanning {method.name} {kind.value} region over re {format_range(grid.re)}, "
        f"im {format_range(grid.im)} with {grid.n}x{grid.n} points"
    )
    points = scan_region(method, kind, grid, n_partitions=request["partitions"])
    write_region_csv(points, kind, request["out"])
    return 0


def integrate_command(args: argparse.Namespace) -> int:
    request = IntegrateRequestSchema().load(
        {
            "problem": args.problem,
            "order": args.order,
            "n_points": args.n_points,
            "steps": args.steps,
            "out": args.out,
        }
    )
    experiment = AdiExperiment(request["problem"], request["order"], request["n_points"])
    result = experiment.run(request["steps"])
    write_integration_csv(result, request["out"])
    return 0


def tableau_command(args: argparse.Namespace) -> int:
    request = OrderSchema().load({"order": args.order})
    sys.stdout.write(format_tableau(get_method_by_order(request["order"])))
    return 0


def _add_problem_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--problem", required=True, choices=list(PROBLEMS))
    parser.add_argument("--order", required=True, type=int, choices=[2, 3, 4])
    parser.add_argument(
        "--np",
        dest="n_points",
        required=True,
        type=int,
        help="interior grid points per direction, spacing 1/(np + 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiglm",
        description="ADI general linear methods: convergence studies, stability scans, integrations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    converge = commands.add_parser("converge", help="temporal convergence study")
    _add_problem_flags(converge)
    converge.add_argument("--steps", required=True, help="comma separated step counts")
    converge.add_argument("--out", default=None, help="CSV path, stdout when omitted")
    converge.set_defaults(func=converge_command)

    stability = commands.add_parser("stability", help="stability region scan")
    stability.add_argument("--order", required=True, type=int, choices=[2, 3, 4])
    stability.add_argument("--kind", required=True, choices=RegionKind.fetch_values())
    stability.add_argument("--re", required=True, help="min:max, write --re=-50:0 for negatives")
    stability.add_argument("--im", required=True, help="min:max")
    stability.add_argument("--n", required=True, type=int, help="grid points per axis")
    stability.add_argument("--partitions", type=int, default=3, choices=[2, 3])
    stability.add_argument("--out", required=True)
    stability.set_defaults(func=stability_command)

    integrate = commands.add_parser("integrate", help="single integration")
    _add_problem_flags(integrate)
    integrate.add_argument("--steps", required=True, type=int)
    integrate.add_argument("--out", default=None, help="CSV path, stdout when omitted")
    integrate.set_defaults(func=integrate_command)

    tableau = commands.add_parser("tableau", help="print a method's coefficients")
    tableau.add_argument("--order", required=True, type=int, choices=[2, 3, 4])
    tableau.set_defaults(func=tableau_command)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT
    )
    try:
        return args.func(args)
    except ValidationError as e:
        logging.error(f"Invalid flags for {args.command}: {e.messages}")
        return 2
    except LIBRARY_ERRORS:
        logging.exception(f"{args.command} failed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
