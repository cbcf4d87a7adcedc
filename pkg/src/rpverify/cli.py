"""Command-line interface.

Subcommands:

* ``verify``          one observed prefix -> VerificationOutcome JSON
* ``calibrate``       score file -> PredictionRegion JSON
* ``estimate-shift``  pairs of score CSVs -> ShiftEstimate JSON
* ``experiment``      config file -> coverage report (JSON + CSV + figures)

Exit codes: 0 success, 2 infeasible configuration, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .conformal import FDivergenceSpec, ScoreSet, robust_quantile
from .harness.experiment import load_config, run_coverage_experiment, write_report
from .harness.trajio import ingest_trajectories
from .predictors import fit_predictor
from .rprv import (
    adaptive_direct_verify,
    direct_verify,
    variant1_verify,
    variant2_verify,
)
from .shift import estimate_epsilon
from .stl.formula import formula_length
from .stl.parser import FormulaSyntaxError, parse_formula

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on bad arguments; we reserve 2 for
    infeasible configurations, so argument errors exit 3 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rpverify",
                     description="Robust predictive STL runtime verification")
    parser.add_argument("--version", action="version", version=f"rpverify {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="verify one observed trajectory prefix")
    v.add_argument("--formula", required=True, help="STL formula text")
    v.add_argument("--calibration", required=True, help="calibration trajectories (CSV/JSON)")
    v.add_argument("--observed", required=True, help="file holding the observed trajectory")
    v.add_argument("--trajectory-id", default=None,
                   help="which trajectory in --observed to verify (default: the only one)")
    v.add_argument("--t", type=int, required=True, help="current time (prefix is X_0..X_t)")
    v.add_argument("--tau0", type=int, default=0, help="time the formula is enabled at")
    v.add_argument("--delta", type=float, default=0.2, help="failure probability")
    v.add_argument("--epsilon", type=float, default=0.0, help="total-variation shift budget")
    v.add_argument("--method", default="direct",
                   choices=["direct", "variant1", "variant2", "adaptive-direct"])
    v.add_argument("--predictor", default="constant-velocity",
                   choices=["hold-last", "constant-velocity", "autoregressive", "external-file"])
    v.add_argument("--ar-order", type=int, default=2)
    v.add_argument("--train", default=None,
                   help="training trajectories for the autoregressive predictor")
    v.add_argument("--aux", default=None,
                   help="auxiliary trajectories (required by indirect/adaptive methods)")
    v.add_argument("--predictions", default=None,
                   help="external predictions JSON (external-file predictor)")
    v.add_argument("--norm", default="l2", choices=["l2", "linf"])
    v.add_argument("--output", default=None, help="output path (default: stdout)")
    v.set_defaults(func=_cmd_verify)

    c = sub.add_parser("calibrate", help="compute a prediction region from scores")
    c.add_argument("--scores", required=True, help="score file (.csv or .json)")
    c.add_argument("--delta", type=float, default=0.2)
    c.add_argument("--epsilon", type=float, default=0.0)
    c.add_argument("--output", default=None)
    c.set_defaults(func=_cmd_calibrate)

    e = sub.add_parser("estimate-shift",
                       help="estimate the score-level TV shift from sample files")
    e.add_argument("scores", nargs="+",
                   help="score CSVs in (calibration, test) pairs")
    e.add_argument("--grid-points", type=int, default=10_000)
    e.add_argument("--output", default=None)
    e.set_defaults(func=_cmd_estimate_shift)

    x = sub.add_parser("experiment", help="run a coverage experiment from a config file")
    x.add_argument("--config", required=True, help="flat key=value config file")
    x.add_argument("--output", default="report", help="output directory")
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--delta", type=float, default=None)
    x.add_argument("--epsilon", default=None, help="number or 'estimate'")
    x.add_argument("--method", default=None)
    x.add_argument("--formula", default=None)
    x.add_argument("--downsample", type=int, default=None)
    x.add_argument("--no-figures", action="store_true")
    x.set_defaults(func=_cmd_experiment)
    return parser


def _emit(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _load_scores(path: str) -> ScoreSet:
    if path.lower().endswith(".json"):
        return ScoreSet.from_json(path)
    return ScoreSet.from_csv(path)


def _cmd_verify(args) -> int:
    calibration = ingest_trajectories(args.calibration)
    dimension = next(iter(calibration.values())).shape[1]
    phi = parse_formula(args.formula, dimension)

    observed_table = ingest_trajectories(args.observed)
    if args.trajectory_id is not None:
        if args.trajectory_id not in observed_table:
            raise ValueError(f"trajectory id {args.trajectory_id!r} not in {args.observed}")
        observed_full = observed_table[args.trajectory_id]
    elif len(observed_table) == 1:
        observed_full = next(iter(observed_table.values()))
    else:
        raise ValueError("--observed holds several trajectories; pass --trajectory-id")
    if observed_full.shape[0] < args.t + 1:
        raise ValueError(f"observed trajectory has {observed_full.shape[0]} states, "
                         f"need t+1 = {args.t + 1}")
    observed = observed_full[: args.t + 1]

    horizon = args.tau0 + formula_length(phi) - args.t
    if horizon < 1:
        raise ValueError("formula is already decided by the observed prefix")
    if args.predictor == "autoregressive":
        if args.train is None:
            raise ValueError("--train is required for the autoregressive predictor")
        training = list(ingest_trajectories(args.train).values())
    else:
        training = []
    model = fit_predictor(training, args.t, horizon, args.predictor,
                          order=args.ar_order, predictions_path=args.predictions)

    spec = FDivergenceSpec.total_variation(args.epsilon)
    if args.method == "direct":
        outcome = direct_verify(phi, calibration, model, observed,
                                args.delta, spec, args.tau0)
    else:
        if args.aux is None:
            raise ValueError(f"--aux is required for method {args.method}")
        aux = ingest_trajectories(args.aux)
        if args.method == "variant1":
            outcome = variant1_verify(phi, calibration, aux, model, observed,
                                      args.delta, spec, args.tau0, norm=args.norm)
        elif args.method == "variant2":
            outcome = variant2_verify(phi, calibration, aux, model, observed,
                                      args.delta, spec, args.tau0)
        else:
            outcome = adaptive_direct_verify(phi, calibration, aux, model, observed,
                                             args.delta, spec, args.tau0)
    _emit(outcome.to_dict(), args.output)
    return EXIT_OK if outcome.region.feasible else EXIT_INFEASIBLE


def _cmd_calibrate(args) -> int:
    scores = _load_scores(args.scores)
    region = robust_quantile(scores, args.delta,
                             FDivergenceSpec.total_variation(args.epsilon))
    _emit(region.to_dict(), args.output)
    return EXIT_OK if region.feasible else EXIT_INFEASIBLE


def _cmd_estimate_shift(args) -> int:
    files = args.scores
    if len(files) < 2 or len(files) % 2 != 0:
        raise ValueError(
            "estimate-shift expects an even number of score files: "
            "calibration/test pairs"
        )
    pairs = []
    labels = []
    for cal_path, test_path in zip(files[0::2], files[1::2]):
        pairs.append((_load_scores(cal_path), _load_scores(test_path)))
        labels.append(f"{Path(cal_path).stem}|{Path(test_path).stem}")
    estimate = estimate_epsilon(pairs, grid_points=args.grid_points, labels=labels)
    _emit(estimate.to_dict(), args.output)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.delta is not None:
        config.delta = args.delta
    if args.epsilon is not None:
        config.epsilon = args.epsilon if args.epsilon == "estimate" else float(args.epsilon)
    if args.method is not None:
        config.method = args.method
    if args.formula is not None:
        config.formula = args.formula
    if args.downsample is not None:
        config.downsample = args.downsample
    config.__post_init__()  # re-validate after overrides

    report = run_coverage_experiment(config)
    paths = write_report(report, args.output, figures=not args.no_figures)
    if not report.feasible:
        print(f"infeasible configuration: K={config.calibration_size}, "
              f"delta={config.delta}, epsilon={report.epsilon:.4f}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"mean coverage: robust {report.mean_robust:.4f} "
          f"(epsilon={report.epsilon:.4f}), vanilla {report.mean_vanilla:.4f}, "
          f"target {report.target:.2f}")
    print(f"report written to {paths['report']}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError, FormulaSyntaxError,
            json.JSONDecodeError) as exc:
        print(f"rpverify: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
