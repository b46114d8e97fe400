"""Exécution des expériences (stratégies × répétitions) et rapports CSV / JSON.

Partagé par la CLI de benchmark et l'API HTTP.
"""
import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app import __version__
from app.config import PRISM_THREADS
from app.errors import USAGE_ERRORS, ConfigurationError, PrismError, ShapeError
from app.linalg.matcore import ORACLE_MAX_DIM, Mat, MatrixFunction, reference_matrix_function
from app.models.experiment import ExperimentConfig, FunctionName, SpectrumKind, SpectrumSpec
from app.models.report import IterationRecord, IterationResult, Termination
from app.models.strategy import (
    FixedScheduleStrategy,
    IterationOptions,
    PrismSketchedStrategy,
    TaylorStrategy,
)
from app.services import genmat, iterations
from app.utils.matrix_io import read_matrix
from app.utils.prng import PRNG_VERSION

logger = logging.getLogger(__name__)

RUN_CSV_FIELDS = ["strategy", "repeat", "iter", "residual_fro", "residual_spec_est", "alpha", "wall_ns"]
SWEEP_CSV_FIELDS = ["vary", "value", "strategy", "iterations", "wall_ns", "speedup", "status"]

SWEEP_KINDS = ("sigma-min", "aspect", "kappa")

_ORACLE_KIND = {
    FunctionName.SIGN: MatrixFunction.SIGN,
    FunctionName.SQRT: MatrixFunction.SQRT,
    FunctionName.SQRT_DB: MatrixFunction.SQRT,
    FunctionName.INV_SQRT: MatrixFunction.INV_SQRT,
    FunctionName.INVERSE_DB: MatrixFunction.INV_SQRT,
    FunctionName.POLAR: MatrixFunction.POLAR,
    FunctionName.INV_PROOT: MatrixFunction.INV_PROOT,
    FunctionName.INVERSE_CHEB: MatrixFunction.INVERSE,
}


@dataclass
class RunOutcome:
    """Résultat d'une cellule (stratégie, répétition)"""
    strategy_index: int
    strategy: str
    repeat: int
    seed: Optional[int]
    status: str
    wall_ns: int
    records: List[IterationRecord] = field(default_factory=list)
    error: Optional[str] = None
    result: Optional[Mat] = None

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0

    def summary(self) -> Dict:
        return {
            "strategy_index": self.strategy_index,
            "strategy": self.strategy,
            "repeat": self.repeat,
            "seed": self.seed,
            "status": self.status,
            "iterations": self.iterations,
            "final_residual": self.records[-1].residual_fro if self.records else None,
            "wall_ns": self.wall_ns,
            "error": self.error,
        }


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    runs: List[RunOutcome]

    @property
    def all_converged(self) -> bool:
        return all(run.status == Termination.CONVERGED.value for run in self.runs)

    def csv_rows(self) -> List[Dict]:
        rows = []
        for run in sorted(self.runs, key=lambda r: (r.strategy_index, r.repeat)):
            for record in run.records:
                rows.append({
                    "strategy": run.strategy,
                    "repeat": run.repeat,
                    "iter": record.k,
                    "residual_fro": repr(record.residual_fro),
                    "residual_spec_est": "" if record.residual_spec_est is None else repr(record.residual_spec_est),
                    "alpha": "" if record.alpha is None else repr(record.alpha),
                    "wall_ns": record.wall_ns,
                })
        return rows

    def report(self) -> Dict:
        return {
            "config": self.config.model_dump(mode="json"),
            "versions": versions(),
            "all_converged": self.all_converged,
            "runs": [run.summary() for run in sorted(self.runs, key=lambda r: (r.strategy_index, r.repeat))],
        }


def versions() -> Dict[str, str]:
    return {"library": __version__, "prng": PRNG_VERSION, "numpy": np.__version__}


def load_input(config: ExperimentConfig) -> Mat:
    if config.input_spec is not None:
        return genmat.generate(config.input_spec)
    return read_matrix(config.input_path)


def _with_seed(strategy, repeat: int):
    """Les répétitions d'une stratégie sketchée utilisent les graines seed, seed+1, ..."""
    if isinstance(strategy, PrismSketchedStrategy):
        return strategy.model_copy(update={"seed": strategy.seed + repeat})
    return strategy


def solve(
    function: FunctionName,
    a: Mat,
    strategy,
    opts: Optional[IterationOptions] = None,
    p: int = 2,
    on_record: Optional[Callable[[IterationRecord], None]] = None,
) -> Tuple[IterationResult, Mat]:
    """Lance le solveur de ``function`` et renvoie (résultat complet, matrice cible)"""
    function = FunctionName(function)
    if function is FunctionName.SIGN:
        result = iterations.sign_iterate(a, strategy, opts, on_record)
        return result, result.primary
    if function in (FunctionName.SQRT, FunctionName.INV_SQRT):
        result = iterations.sqrt_coupled_iterate(a, strategy, opts, on_record)
        return result, result.primary if function is FunctionName.SQRT else result.secondary
    if function is FunctionName.POLAR:
        result = iterations.polar_iterate(a, strategy, opts, on_record)
        return result, result.primary
    if function is FunctionName.INV_PROOT:
        result = iterations.inverse_proot_iterate(a, p, strategy, opts, on_record)
        return result, result.primary
    if function is FunctionName.INVERSE_CHEB:
        result = iterations.chebyshev_inverse_iterate(a, strategy, opts, on_record)
        return result, result.primary
    if isinstance(strategy, FixedScheduleStrategy):
        raise ConfigurationError("DB Newton supports taylor (classical) and prism (adaptive) strategies only")
    adaptive = not isinstance(strategy, TaylorStrategy)
    result = iterations.db_newton_sqrt(a, adaptive, opts, on_record)
    return result, result.primary if function is FunctionName.SQRT_DB else result.secondary


def oracle(function: FunctionName, a: Mat, p: int = 2) -> Mat:
    """Valeur de référence de ``function`` (décomposition spectrale ou SVD)"""
    if min(a.shape) > ORACLE_MAX_DIM:
        raise ShapeError(f"oracle scale exceeded: min dimension {min(a.shape)} > {ORACLE_MAX_DIM}")
    return reference_matrix_function(a, _ORACLE_KIND[FunctionName(function)], p=p)


def _run_cell(config: ExperimentConfig, a: Mat, index: int, strategy, repeat: int, keep_result: bool) -> RunOutcome:
    label = strategy.label
    strategy = _with_seed(strategy, repeat)
    seed = strategy.seed if isinstance(strategy, PrismSketchedStrategy) else None
    logger.info(f"Running {config.function.value} [{label}] repeat {repeat}")
    start = time.perf_counter_ns()
    try:
        result, target = solve(config.function, a, strategy, config.opts, config.p)
    except USAGE_ERRORS:
        raise
    except PrismError as e:
        logger.warning(f"{label} repeat {repeat} failed: {e}")
        return RunOutcome(index, label, repeat, seed, "failed", time.perf_counter_ns() - start, error=str(e))
    wall_ns = time.perf_counter_ns() - start
    return RunOutcome(
        strategy_index=index,
        strategy=label,
        repeat=repeat,
        seed=seed,
        status=result.report.termination.value,
        wall_ns=wall_ns,
        records=result.report.records,
        result=target if keep_result else None,
    )


def run_experiment(config: ExperimentConfig, a: Optional[Mat] = None, keep_results: bool = False) -> ExperimentOutcome:
    """Exécute toutes les cellules (stratégie, répétition), en parallèle jusqu'à PRISM_THREADS"""
    if a is None:
        a = load_input(config)
    cells = [
        (index, strategy, repeat)
        for index, strategy in enumerate(config.strategies)
        for repeat in range(config.repeats)
    ]
    with ThreadPoolExecutor(max_workers=PRISM_THREADS) as executor:
        futures = [
            executor.submit(_run_cell, config, a, index, strategy, repeat, keep_results)
            for index, strategy, repeat in cells
        ]
        runs = [future.result() for future in futures]
    return ExperimentOutcome(config=config, runs=runs)


def write_run_csv(outcome: ExperimentOutcome, path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RUN_CSV_FIELDS)
        writer.writeheader()
        for row in outcome.csv_rows():
            writer.writerow(row)


def write_json_report(report: Dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, ensure_ascii=False, indent=2)


def sweep_input(vary: str, value: float, base: SpectrumSpec) -> SpectrumSpec:
    """Spécification d'entrée d'un point de balayage"""
    if vary == "sigma-min":
        k = min(base.rows, base.cols)
        values = genmat.log_spaced_spectrum(k, value, 1.0).tolist()
        return SpectrumSpec(kind=SpectrumKind.PRESCRIBED, rows=base.rows, cols=base.cols, seed=base.seed, values=values)
    if vary == "aspect":
        rows = max(base.cols, int(round(value * base.cols)))
        return SpectrumSpec(kind=SpectrumKind.GAUSSIAN, rows=rows, cols=base.cols, seed=base.seed)
    if vary == "kappa":
        return SpectrumSpec(kind=SpectrumKind.HTMP, rows=base.rows, cols=base.cols, seed=base.seed, kappa=value)
    raise ConfigurationError(f"unknown sweep variable {vary!r}, expected one of {SWEEP_KINDS}")


def run_sweep(
    config: ExperimentConfig,
    vary: str,
    values: Sequence[float],
    base: SpectrumSpec,
) -> List[Dict]:
    """Une ligne par (valeur, stratégie) : itérations, meilleur temps sur les répétitions, accélération"""
    if not values:
        raise ConfigurationError("a sweep needs at least one value")
    rows = []
    for value in values:
        spec = sweep_input(vary, value, base)
        point = config.model_copy(update={"input_spec": spec, "input_path": None})
        outcome = run_experiment(point)
        by_strategy: Dict[int, List[RunOutcome]] = {}
        for run in outcome.runs:
            by_strategy.setdefault(run.strategy_index, []).append(run)
        reference_ns = None
        for index in sorted(by_strategy):
            runs = sorted(by_strategy[index], key=lambda r: r.repeat)
            best_ns = min(run.wall_ns for run in runs)
            if reference_ns is None:
                reference_ns = best_ns
            rows.append({
                "vary": vary,
                "value": repr(float(value)),
                "strategy": runs[0].strategy,
                "iterations": runs[0].iterations,
                "wall_ns": best_ns,
                "speedup": repr(reference_ns / best_ns if best_ns > 0 else 1.0),
                "status": runs[0].status,
            })
        logger.info(f"Sweep {vary}={value:g} done")
    return rows


def write_sweep_csv(rows: List[Dict], path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
