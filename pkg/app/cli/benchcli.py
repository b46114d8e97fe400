"""CLI de benchmark : génération d'entrées, exécutions, balayages et oracles.

Codes de sortie : 0 succès, 2 erreur d'usage ou de format, 3 échec numérique
(ou exécution non convergée).
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from app.config import PRISM_LOG_LEVEL, configure_logging
from app.errors import USAGE_ERRORS, ConfigurationError, PrismError
from app.linalg.matcore import ORACLE_MAX_DIM, frob_norm, reference_svd
from app.models.experiment import ExperimentConfig, FunctionName, SpectrumKind, SpectrumSpec
from app.models.strategy import AlphaInterval, IterationOptions, strategy_from_flag
from app.services import experiment_service, genmat
from app.utils.matrix_io import read_matrix, write_matrix

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class _UsageExit(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """argparse qui lève au lieu d'appeler sys.exit, pour garder le contrôle du code de sortie"""

    def error(self, message):
        raise _UsageExit(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"invalid number list {text!r}: {e}") from e


def _add_spec_flags(parser: argparse.ArgumentParser, kind_required: bool = False) -> None:
    parser.add_argument("--kind", choices=[k.value for k in SpectrumKind], required=kind_required)
    parser.add_argument("--rows", type=int)
    parser.add_argument("--cols", type=int)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--values", dest="spectrum_values", help="prescribed singular values, comma separated")
    parser.add_argument("--kappa", type=float)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--function", required=True, choices=[f.value for f in FunctionName])
    parser.add_argument("--p", type=int, default=2, help="root order for invproot")
    parser.add_argument("--strategies", default="taylor,prism-exact")
    parser.add_argument("--max-iters", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--degree", type=int, default=1)
    parser.add_argument("--interval", help="alpha interval as 'lower,upper'")
    parser.add_argument("--no-normalize", action="store_true")
    parser.add_argument("--unconstrained", action="store_true")
    parser.add_argument("--spectral-estimate", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=1)


def _spec_from_args(args) -> SpectrumSpec:
    if args.kind is None:
        raise ConfigurationError("an input is required: --in PATH or --kind with its parameters")
    if args.rows is None or args.cols is None:
        raise ConfigurationError("--rows and --cols are required with --kind")
    values = _float_list(args.spectrum_values) if args.spectrum_values else None
    return SpectrumSpec(
        kind=args.kind, rows=args.rows, cols=args.cols, seed=args.seed, values=values, kappa=args.kappa,
    )


def _options_from_args(args) -> IterationOptions:
    fields = {
        "degree": args.degree,
        "normalize_input": not args.no_normalize,
        "constrain_alpha": not args.unconstrained,
        "spectral_estimate_iters": args.spectral_estimate,
    }
    if args.max_iters is not None:
        fields["max_iters"] = args.max_iters
    if args.tol is not None:
        fields["tol_fro"] = args.tol
    if args.interval:
        bounds = _float_list(args.interval)
        if len(bounds) != 2:
            raise ConfigurationError(f"--interval needs two numbers, got {args.interval!r}")
        fields["interval"] = AlphaInterval(lower=bounds[0], upper=bounds[1])
    return IterationOptions(**fields)


def _config_from_args(args, input_spec: Optional[SpectrumSpec], input_path: Optional[str]) -> ExperimentConfig:
    strategies = [strategy_from_flag(flag) for flag in args.strategies.split(",") if flag.strip()]
    return ExperimentConfig(
        function=args.function,
        p=args.p,
        input_spec=input_spec,
        input_path=input_path,
        strategies=strategies,
        opts=_options_from_args(args),
        repeats=args.repeats,
        output=getattr(args, "out_csv", None) or getattr(args, "out", None),
    )


def _sigma_summary(a: np.ndarray) -> str:
    if min(a.shape) > ORACLE_MAX_DIM:
        return "sigma summary skipped (oracle scale exceeded)"
    _, s, _ = reference_svd(a if a.shape[0] >= a.shape[1] else a.T)
    sigma_max, sigma_min = float(s.values[0]), float(s.values[-1])
    cond = sigma_max / sigma_min if sigma_min > 0 else float("inf")
    return f"sigma_max={sigma_max:.6e} sigma_min={sigma_min:.6e} cond={cond:.6e}"


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    a = genmat.generate(spec)
    write_matrix(args.out, a)
    print(f"rows={a.shape[0]} cols={a.shape[1]} {_sigma_summary(a)}")
    return EXIT_OK


def cmd_run(args) -> int:
    input_spec = None if args.input else _spec_from_args(args)
    config = _config_from_args(args, input_spec, args.input)
    outcome = experiment_service.run_experiment(config, keep_results=bool(args.save_result))

    csv_path = Path(args.out_csv)
    json_path = Path(args.out_json) if args.out_json else csv_path.with_suffix(".json")
    experiment_service.write_run_csv(outcome, csv_path)
    experiment_service.write_json_report(outcome.report(), json_path)
    if args.save_result:
        first = next((run for run in outcome.runs if run.result is not None), None)
        if first is not None:
            write_matrix(args.save_result, first.result)

    for run in sorted(outcome.runs, key=lambda r: (r.strategy_index, r.repeat)):
        print(f"{run.strategy} repeat={run.repeat} status={run.status} iterations={run.iterations} wall_ns={run.wall_ns}")
    return EXIT_OK if outcome.all_converged else EXIT_NUMERICAL


def cmd_sweep(args) -> int:
    values = _float_list(args.sweep_values)
    if not values:
        raise ConfigurationError("--values must list at least one value")
    if args.rows is None or args.cols is None:
        raise ConfigurationError("--rows and --cols are required for a sweep")
    if args.vary not in experiment_service.SWEEP_KINDS:
        raise ConfigurationError(f"unknown sweep variable {args.vary!r}")
    base = SpectrumSpec(kind=SpectrumKind.GAUSSIAN, rows=args.rows, cols=args.cols, seed=args.seed)
    config = _config_from_args(args, base, None)
    rows = experiment_service.run_sweep(config, args.vary, values, base)
    experiment_service.write_sweep_csv(rows, Path(args.out))
    for row in rows:
        print(f"{row['vary']}={row['value']} {row['strategy']} iterations={row['iterations']} "
              f"speedup={row['speedup']} status={row['status']}")
    return EXIT_OK if all(row["status"] == "converged" for row in rows) else EXIT_NUMERICAL


def cmd_oracle(args) -> int:
    a = read_matrix(args.input)
    reference = experiment_service.oracle(args.function, a, args.p)
    if args.out:
        write_matrix(args.out, reference)
    if args.check:
        candidate = read_matrix(args.check)
        if candidate.shape != reference.shape:
            raise ConfigurationError(f"candidate shape {candidate.shape} differs from {reference.shape}")
        print(f"discrepancy_fro={frob_norm(candidate - reference):.6e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="benchcli", description="Matrix-function benchmark runner")
    parser.add_argument("--log-level", default=PRISM_LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    gen = sub.add_parser("gen", help="generate a test matrix")
    _add_spec_flags(gen, kind_required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=cmd_gen)

    run = sub.add_parser("run", help="run strategies on one input")
    _add_solver_flags(run)
    _add_spec_flags(run)
    run.add_argument("--in", dest="input")
    run.add_argument("--out-csv", required=True)
    run.add_argument("--out-json")
    run.add_argument("--save-result")
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser("sweep", help="sweep an input parameter")
    _add_solver_flags(sweep)
    sweep.add_argument("--vary", required=True)
    sweep.add_argument("--values", dest="sweep_values", required=True)
    sweep.add_argument("--rows", type=int)
    sweep.add_argument("--cols", type=int)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(handler=cmd_sweep)

    oracle = sub.add_parser("oracle", help="reference value of a matrix function")
    oracle.add_argument("--function", required=True, choices=[f.value for f in FunctionName])
    oracle.add_argument("--p", type=int, default=2)
    oracle.add_argument("--in", dest="input", required=True)
    oracle.add_argument("--out")
    oracle.add_argument("--check")
    oracle.set_defaults(handler=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(args.log_level.upper())
    logger.debug(f"benchcli {args.command}")

    try:
        return args.handler(args)
    except (ValidationError, ValueError, OSError) + USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PrismError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
