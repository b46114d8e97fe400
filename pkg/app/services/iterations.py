"""Itérations polynomiales pour les fonctions de matrice.

Chaque solveur suit le même schéma : calcul du résidu R_k, test d'arrêt
(‖R_k‖_F ≤ tol_fro·sqrt(n)), choix de α_k selon la stratégie, puis mise à jour
X_{k+1} = X_k·g(R_k; α_k). Les stratégies PRISM ajustent α_k en minimisant
‖r(R_k;α)‖_F² (exact) ou sa version sketchée tr(S_k r(R_k;α)² S_kᵀ).
"""
import logging
import math
import time
from dataclasses import replace
from typing import Callable, Optional, Tuple

import numpy as np

from app.errors import (
    ConfigurationError,
    DefinitenessError,
    DegenerateInputError,
    NumericalInstabilityError,
    ShapeError,
    SymmetryError,
)
from app.linalg.matcore import (
    Mat,
    as_mat,
    cholesky_factor,
    cholesky_spd_inverse,
    frob_norm,
    identity,
    is_symmetric,
    jacobi_eigendecomposition,
    mat_mul,
    require_symmetric,
    spectral_norm_estimate,
    symmetrize,
)
from app.models.report import ConvergenceReport, IterationRecord, IterationResult, Termination
from app.models.strategy import (
    AlphaInterval,
    CoefficientStrategy,
    FixedScheduleStrategy,
    IterationOptions,
    PrismExactStrategy,
    PrismSketchedStrategy,
    TaylorStrategy,
)
from app.services.polyfit import (
    UNBOUNDED,
    ResidualFamily,
    chebyshev_alpha,
    db_loss_coeffs,
    default_interval,
    eval_poly_matrix,
    eval_surrogate_matrix,
    inverse_newton_loss_coeffs,
    minimize_loss,
    minimize_quartic_on_interval,
    ns_loss_coeffs,
    taylor_surrogate,
)
from app.services.sketch import (
    TraceTable,
    exact_power_traces,
    sketch_for_iteration,
    sketched_power_traces,
)

logger = logging.getLogger(__name__)

RecordCallback = Callable[[IterationRecord], None]


class _Monitor:
    """Suivi des résidus, du temps écoulé et des conditions d'arrêt d'un solveur"""

    def __init__(
        self,
        function: str,
        strategy_label: str,
        opts: IterationOptions,
        n: int,
        interval: Optional[AlphaInterval],
        on_record: Optional[RecordCallback],
    ):
        self.opts = opts
        self.threshold = opts.tol_fro * math.sqrt(n)
        self.report = ConvergenceReport(function=function, strategy=strategy_label, interval=interval)
        self.on_record = on_record
        self.start_ns = time.perf_counter_ns()
        self.previous: Optional[float] = None
        self.increases = 0
        self.pending: Optional[IterationRecord] = None

    def check(self, k: int, residual: Mat) -> Optional[Termination]:
        """Mesure R_k et renvoie la raison d'arrêt éventuelle"""
        res = frob_norm(residual)
        finite = bool(np.isfinite(res))
        spec_est = None
        if finite and self.opts.spectral_estimate_iters:
            spec_est = spectral_norm_estimate(residual, self.opts.spectral_estimate_iters, seed=k)
        wall_ns = time.perf_counter_ns() - self.start_ns if self.opts.record_walltime else 0
        self.pending = IterationRecord(k=k, residual_fro=res, residual_spec_est=spec_est, wall_ns=wall_ns)

        if not finite:
            return Termination.DIVERGED
        if res <= self.threshold:
            return Termination.CONVERGED
        if self.previous is not None and res > self.previous:
            self.increases += 1
        else:
            self.increases = 0
        self.previous = res
        if self.increases >= self.opts.divergence_window:
            return Termination.DIVERGED
        if k >= self.opts.max_iters:
            return Termination.MAX_ITERS
        return None

    def record(self, alpha: Optional[float] = None) -> None:
        record = self.pending.model_copy(update={"alpha": alpha})
        logger.debug(f"k={record.k} residual={record.residual_fro:.3e} alpha={alpha}")
        self.report.records.append(record)
        if self.on_record is not None:
            self.on_record(record)

    def finish(self, termination: Termination) -> ConvergenceReport:
        self.report.termination = termination
        message = (
            f"{self.report.function} [{self.report.strategy}] {termination.value} after "
            f"{self.report.iterations} iterations, residual {self.report.final_residual:.3e}"
        )
        if termination is Termination.DIVERGED:
            logger.warning(message)
        else:
            logger.info(message)
        return self.report


def _short_circuit(function: str, strategy, opts, residual: Mat, on_record) -> Optional[ConvergenceReport]:
    """Entrée brute déjà convergée : un seul enregistrement k = 0"""
    monitor = _Monitor(function, strategy.label, opts, residual.shape[0], None, on_record)
    if monitor.check(0, residual) is not Termination.CONVERGED:
        return None
    monitor.record(None)
    return monitor.finish(Termination.CONVERGED)


def _options(opts: Optional[IterationOptions]) -> IterationOptions:
    return opts if opts is not None else IterationOptions()


def _prism_interval(opts: IterationOptions, family: ResidualFamily, d: int, p: Optional[int] = None) -> AlphaInterval:
    if not opts.constrain_alpha:
        return UNBOUNDED
    if opts.interval is not None:
        return opts.interval
    return default_interval(family, d, p)


def _is_prism(strategy) -> bool:
    return isinstance(strategy, (PrismExactStrategy, PrismSketchedStrategy))


def _power_traces(strategy, r: Mat, k: int, max_power: int) -> TraceTable:
    if isinstance(strategy, PrismSketchedStrategy):
        n = r.shape[0]
        sketch = sketch_for_iteration(min(strategy.p, n), n, strategy.seed, k)
        return sketched_power_traces(r, sketch, max_power)
    return exact_power_traces(r, max_power)


class _NewtonSchulzStep:
    """Choix de α_k et matrice de mise à jour g_d(R_k; α_k) pour signe, racine et polaire"""

    def __init__(self, strategy: CoefficientStrategy, opts: IterationOptions):
        self.strategy = strategy
        self.d = opts.degree
        self.g = taylor_surrogate(ResidualFamily.INV_SQRT, self.d)
        self.interval = _prism_interval(opts, ResidualFamily.INV_SQRT, self.d) if _is_prism(strategy) else None

    def __call__(self, k: int, r: Mat) -> Tuple[Mat, Optional[float]]:
        strategy = self.strategy
        if isinstance(strategy, FixedScheduleStrategy) and strategy.uses_triples:
            return eval_poly_matrix(strategy.triple_at(k), r), None
        if isinstance(strategy, TaylorStrategy):
            alpha = self.g.taylor_alpha
        elif isinstance(strategy, FixedScheduleStrategy):
            alpha = strategy.alpha_at(k)
        else:
            traces = _power_traces(strategy, r, k, 4 * self.d + 2)
            alpha = minimize_quartic_on_interval(ns_loss_coeffs(traces, self.d, self.interval))
        return eval_surrogate_matrix(self.g, alpha, r), alpha


def sign_iterate(
    a: Mat,
    strategy: CoefficientStrategy,
    opts: Optional[IterationOptions] = None,
    on_record: Optional[RecordCallback] = None,
) -> IterationResult:
    """Fonction signe par Newton–Schulz adaptatif : R_k = I − X_k², X_{k+1} = X_k g_d(R_k; α_k)"""
    opts = _options(opts)
    a = as_mat(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"sign needs a square matrix, got {a.shape}")
    a_squared = mat_mul(a, a)
    if not is_symmetric(a_squared):
        raise SymmetryError("sign iteration needs a symmetric a²")

    eye = identity(n)
    report = _short_circuit("sign", strategy, opts, symmetrize(eye - a_squared), on_record)
    if report is not None:
        return IterationResult(primary=a.copy(), secondary=None, report=report)

    x = a.copy()
    if opts.normalize_input:
        scale = frob_norm(a)
        if scale == 0.0:
            raise DegenerateInputError("cannot normalize a zero matrix")
        x = a / scale

    step = _NewtonSchulzStep(strategy, opts)
    monitor = _Monitor("sign", strategy.label, opts, n, step.interval, on_record)
    k = 0
    while True:
        r = symmetrize(eye - mat_mul(x, x))
        termination = monitor.check(k, r)
        if termination is not None:
            monitor.record(None)
            break
        update, alpha = step(k, r)
        monitor.record(alpha)
        x = mat_mul(x, update)
        k += 1
    return IterationResult(primary=x, secondary=None, report=monitor.finish(termination))


def sqrt_coupled_iterate(
    a: Mat,
    strategy: CoefficientStrategy,
    opts: Optional[IterationOptions] = None,
    on_record: Optional[RecordCallback] = None,
    validate_spd: bool = False,
) -> IterationResult:
    """Racine carrée et inverse de la racine par Newton–Schulz couplé.

    R_k = I − X_k Y_k, X_{k+1} = X_k g(R_k), Y_{k+1} = g(R_k) Y_k ; X → a^{1/2},
    Y → a^{−1/2}. Avec ``validate_spd``, la définie-positivité est contrôlée
    au préalable par l'oracle de Jacobi.
    """
    opts = _options(opts)
    a = require_symmetric(as_mat(a))
    n = a.shape[0]
    if validate_spd:
        smallest = jacobi_eigendecomposition(a).values[-1]
        if smallest <= 0:
            raise DefinitenessError(f"square root needs an SPD matrix, smallest eigenvalue {smallest:.3e}")

    eye = identity(n)
    report = _short_circuit("sqrt", strategy, opts, eye - a, on_record)
    if report is not None:
        return IterationResult(primary=a.copy(), secondary=eye, report=report)

    scale = 1.0
    if opts.normalize_input:
        scale = frob_norm(a)
        if scale == 0.0:
            raise DegenerateInputError("cannot normalize a zero matrix")
    x = a / scale
    y = eye.copy()

    step = _NewtonSchulzStep(strategy, opts)
    monitor = _Monitor("sqrt", strategy.label, opts, n, step.interval, on_record)
    k = 0
    while True:
        r = symmetrize(eye - mat_mul(x, y))
        termination = monitor.check(k, r)
        if termination is not None:
            monitor.record(None)
            break
        update, alpha = step(k, r)
        monitor.record(alpha)
        x = symmetrize(mat_mul(x, update))
        y = symmetrize(mat_mul(update, y))
        k += 1

    root = math.sqrt(scale)
    return IterationResult(primary=x * root, secondary=y / root, report=monitor.finish(termination))


def polar_iterate(
    a: Mat,
    strategy: CoefficientStrategy,
    opts: Optional[IterationOptions] = None,
    on_record: Optional[RecordCallback] = None,
) -> IterationResult:
    """Facteur polaire UVᵀ : R_k = I − X_kᵀX_k, X_{k+1} = X_k g_d(R_k; α_k)"""
    opts = _options(opts)
    a = as_mat(a)
    rows, cols = a.shape
    if rows < cols:
        raise ShapeError(f"polar needs rows >= cols, got {a.shape}")

    eye = identity(cols)
    report = _short_circuit("polar", strategy, opts, symmetrize(eye - mat_mul(a.T, a)), on_record)
    if report is not None:
        return IterationResult(primary=a.copy(), secondary=None, report=report)

    x = a.copy()
    if opts.normalize_input:
        scale = frob_norm(a)
        if scale == 0.0:
            raise DegenerateInputError("cannot normalize a zero matrix")
        x = a / scale

    step = _NewtonSchulzStep(strategy, opts)
    monitor = _Monitor("polar", strategy.label, opts, cols, step.interval, on_record)
    k = 0
    while True:
        r = symmetrize(eye - mat_mul(x.T, x))
        termination = monitor.check(k, r)
        if termination is not None:
            monitor.record(None)
            break
        update, alpha = step(k, r)
        monitor.record(alpha)
        x = mat_mul(x, update)
        k += 1
    return IterationResult(primary=x, secondary=None, report=monitor.finish(termination))


def inverse_newton_initial_scale(a: Mat, p: int) -> float:
    """c = (2‖a‖_F/(p+1))^{1/p}"""
    return (2.0 * frob_norm(a) / (p + 1)) ** (1.0 / p)


def inverse_proot_iterate(
    a: Mat,
    p: int,
    strategy: CoefficientStrategy,
    opts: Optional[IterationOptions] = None,
    on_record: Optional[RecordCallback] = None,
) -> IterationResult:
    """Racine p-ième inverse par Newton inverse couplé.

    X_0 = I/c, M_0 = a/c^p, R_k = I − M_k, X_{k+1} = X_k(I + α_k R_k) et
    M_{k+1} = (I + α_k R_k)^p M_k. Sans ``normalize_input``, c = 1.

    Returns:
        IterationResult: X → a^{−1/p} en primaire, M → I en secondaire
    """
    opts = _options(opts)
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if isinstance(strategy, FixedScheduleStrategy) and strategy.uses_triples:
        raise ConfigurationError("coefficient triples are not supported by the inverse Newton iteration")
    a = require_symmetric(as_mat(a))
    n = a.shape[0]
    cholesky_factor(a)

    eye = identity(n)
    function = f"invproot(p={p})"
    report = _short_circuit(function, strategy, opts, eye - a, on_record)
    if report is not None:
        return IterationResult(primary=eye, secondary=a.copy(), report=report)

    c = inverse_newton_initial_scale(a, p) if opts.normalize_input else 1.0
    x = eye / c
    m = a / c ** p

    interval = _prism_interval(opts, ResidualFamily.INV_PROOT, 1, p) if _is_prism(strategy) else None
    monitor = _Monitor(function, strategy.label, opts, n, interval, on_record)
    k = 0
    while True:
        r = symmetrize(eye - m)
        termination = monitor.check(k, r)
        if termination is not None:
            monitor.record(None)
            break
        if isinstance(strategy, TaylorStrategy):
            alpha = 1.0 / p
        elif isinstance(strategy, FixedScheduleStrategy):
            alpha = strategy.alpha_at(k)
        else:
            loss = inverse_newton_loss_coeffs(_power_traces(strategy, r, k, 2 * p + 2), p, interval)
            alpha = minimize_loss(loss)
        monitor.record(alpha)
        update = eye + alpha * r
        x = symmetrize(mat_mul(x, update))
        update_power = update
        for _ in range(p - 1):
            update_power = mat_mul(update_power, update)
        m = symmetrize(mat_mul(update_power, m))
        k += 1
    return IterationResult(primary=x, secondary=m, report=monitor.finish(termination))


def db_newton_sqrt(
    a: Mat,
    adaptive: bool,
    opts: Optional[IterationOptions] = None,
    on_record: Optional[RecordCallback] = None,
) -> IterationResult:
    """Newton de Denman–Beavers sous forme produit.

    M_{k+1} = 2α(1−α)I + (1−α)²M_k + α²M_k⁻¹, M_k⁻¹ par Cholesky. En mode
    classique α = 1/2 ; en mode adaptatif α minimise ‖I − M_{k+1}‖_F² sans
    contrainte d'intervalle (sauf ``opts.interval``).
    """
    opts = _options(opts)
    a = require_symmetric(as_mat(a))
    n = a.shape[0]
    label = "db-adaptive" if adaptive else "db-classical"

    eye = identity(n)
    stub = TaylorStrategy()
    report = _short_circuit("sqrt-db", stub, opts, eye - a, on_record)
    if report is not None:
        report.strategy = label
        return IterationResult(primary=a.copy(), secondary=eye, report=report)

    scale = 1.0
    if opts.normalize_input:
        scale = frob_norm(a)
        if scale == 0.0:
            raise DegenerateInputError("cannot normalize a zero matrix")
    m = a / scale
    x = m.copy()
    y = eye.copy()

    interval = (opts.interval or UNBOUNDED) if adaptive else None
    monitor = _Monitor("sqrt-db", label, opts, n, interval, on_record)
    k = 0
    while True:
        r = eye - m
        termination = monitor.check(k, r)
        if termination is not None:
            monitor.record(None)
            break
        try:
            m_inv = cholesky_spd_inverse(m)
        except DefinitenessError as e:
            raise NumericalInstabilityError(f"Cholesky failed at iteration {k}: {e}", iteration=k) from e
        if adaptive:
            loss = db_loss_coeffs(m, m_inv)
            if opts.interval is not None:
                loss = replace(loss, interval=opts.interval)
            alpha = minimize_quartic_on_interval(loss)
        else:
            alpha = 0.5
        monitor.record(alpha)
        x = symmetrize((1.0 - alpha) * x + alpha * mat_mul(x, m_inv))
        y = symmetrize((1.0 - alpha) * y + alpha * mat_mul(y, m_inv))
        m = symmetrize(2.0 * alpha * (1.0 - alpha) * eye + (1.0 - alpha) ** 2 * m + alpha ** 2 * m_inv)
        k += 1

    root = math.sqrt(scale)
    return IterationResult(primary=x * root, secondary=y / root, report=monitor.finish(termination))


def chebyshev_inverse_iterate(
    a: Mat,
    strategy: CoefficientStrategy,
    opts: Optional[IterationOptions] = None,
    on_record: Optional[RecordCallback] = None,
) -> IterationResult:
    """Inverse par l'itération de Chebyshev : X_{k+1} = X_k(I + R_k + α_k R_k²), R_k = I − aX_k"""
    opts = _options(opts)
    if isinstance(strategy, FixedScheduleStrategy) and strategy.uses_triples:
        raise ConfigurationError("coefficient triples are not supported by the Chebyshev iteration")
    a = as_mat(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"inverse needs a square matrix, got {a.shape}")

    eye = identity(n)
    report = _short_circuit("inverse-cheb", strategy, opts, symmetrize(eye - mat_mul(a, a.T)), on_record)
    if report is not None:
        return IterationResult(primary=a.T.copy(), secondary=None, report=report)

    scale = 1.0
    if opts.normalize_input:
        scale = frob_norm(a)
        if scale == 0.0:
            raise DegenerateInputError("cannot normalize a zero matrix")
    a_hat = a / scale
    x = a_hat.T.copy()

    interval = _prism_interval(opts, ResidualFamily.INVERSE, 2) if _is_prism(strategy) else None
    monitor = _Monitor("inverse-cheb", strategy.label, opts, n, interval, on_record)
    k = 0
    while True:
        r = symmetrize(eye - mat_mul(a_hat, x))
        termination = monitor.check(k, r)
        if termination is not None:
            monitor.record(None)
            break
        if isinstance(strategy, TaylorStrategy):
            alpha = 1.0
        elif isinstance(strategy, FixedScheduleStrategy):
            alpha = strategy.alpha_at(k)
        else:
            alpha = chebyshev_alpha(_power_traces(strategy, r, k, 6), interval)
        monitor.record(alpha)
        x = mat_mul(x, eval_poly_matrix([1.0, 1.0, alpha], r))
        k += 1
    return IterationResult(primary=x / scale, secondary=None, report=monitor.finish(termination))
