"""Sketches gaussiens et tables de traces de puissances en O(n²p)."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from app.errors import ConfigurationError, MissingPowerError, ShapeError
from app.linalg.matcore import ORACLE_MAX_DIM, Mat, frob_norm, mat_mul
from app.utils.prng import generator

logger = logging.getLogger(__name__)

PRACTICAL_SKETCH_ROWS = 8


class TraceMode(str, Enum):
    SKETCHED = "sketched"
    EXACT = "exact"


@dataclass(frozen=True)
class SketchMatrix:
    mat: Mat
    seed: int

    @property
    def rows(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class TraceTable:
    """t_i = tr(S R^i Sᵀ) (sketché) ou tr(R^i) (exact), i = 0..max_power"""
    powers: np.ndarray
    mode: TraceMode

    @property
    def max_power(self) -> int:
        return len(self.powers) - 1

    def __getitem__(self, i: int) -> float:
        if i < 0 or i > self.max_power:
            raise MissingPowerError(
                f"trace of power {i} not available (max power {self.max_power})",
                needed=i,
                available=self.max_power,
            )
        return float(self.powers[i])


@dataclass(frozen=True)
class SketchRows:
    theorem_bound: int
    proof_bound: int
    practical: int = PRACTICAL_SKETCH_ROWS


def gaussian_sketch(p: int, n: int, seed: int, centered: bool = True, stream: int = 0) -> SketchMatrix:
    """Matrice p×n d'entrées i.i.d. N(0, 1/p).

    ``centered=False`` tire des entrées N(1, 1/p) ; réservé aux tests de comparaison.
    """
    if p < 1 or n < 1:
        raise ConfigurationError(f"sketch dimensions must be positive, got p={p}, n={n}")
    if p > n:
        raise ConfigurationError(f"sketch rows p={p} exceed dimension n={n}")
    mat = generator(seed, stream).standard_normal((p, n)) / math.sqrt(p)
    if not centered:
        mat += 1.0
    return SketchMatrix(mat=mat, seed=seed)


def sketch_for_iteration(p: int, n: int, seed: int, k: int) -> SketchMatrix:
    """Sketch S_k de l'itération k, tiré d'un flux indépendant par itération"""
    return gaussian_sketch(p, n, seed, stream=k)


def sketched_power_traces(r: Mat, s: SketchMatrix, max_power: int) -> TraceTable:
    """t_i = ⟨Sᵀ, R^i Sᵀ⟩_F avec max_power produits (n×n)·(n×p)"""
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ShapeError(f"residual must be square, got {r.shape}")
    if s.mat.shape[1] != r.shape[0]:
        raise ShapeError(f"sketch {s.mat.shape} does not match residual {r.shape}")
    if max_power < 1:
        raise ConfigurationError(f"max_power must be >= 1, got {max_power}")
    st = s.mat.T
    powers = np.empty(max_power + 1)
    powers[0] = frob_norm(st) ** 2
    v = st
    for i in range(1, max_power + 1):
        v = mat_mul(r, v)
        powers[i] = float(np.sum(st * v))
    return TraceTable(powers=powers, mode=TraceMode.SKETCHED)


def exact_power_traces(r: Mat, max_power: int) -> TraceTable:
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ShapeError(f"residual must be square, got {r.shape}")
    n = r.shape[0]
    if n > ORACLE_MAX_DIM:
        raise ShapeError(f"exact traces limited to n <= {ORACLE_MAX_DIM}, got {n}")
    if max_power < 1:
        raise ConfigurationError(f"max_power must be >= 1, got {max_power}")
    powers = np.empty(max_power + 1)
    powers[0] = float(n)
    power = r
    powers[1] = float(np.trace(r))
    for i in range(2, max_power + 1):
        # tr(R^i) = ⟨(R^{i−1})ᵀ, R⟩ évite le dernier produit
        powers[i] = float(np.sum(power.T * r))
        if i < max_power:
            power = mat_mul(power, r)
    return TraceTable(powers=powers, mode=TraceMode.EXACT)


def eigenvalue_power_traces(values: Sequence[float], max_power: int) -> TraceTable:
    """tr(R^i) = Σ λ^i à partir d'un spectre connu"""
    lam = np.asarray(values, dtype=np.float64)
    powers = np.array([float(np.sum(lam ** i)) for i in range(max_power + 1)])
    return TraceTable(powers=powers, mode=TraceMode.EXACT)


def recommended_sketch_rows(n: int, k_max: int, delta: float) -> SketchRows:
    """Dimension de sketch garantissant la convergence quadratique avec probabilité 1−δ.

    ``theorem_bound`` utilise la constante additive 27.6 de l'énoncé,
    ``proof_bound`` la constante 41.4 qui apparaît dans la démonstration ;
    ``practical`` est la valeur utilisée par défaut.
    """
    if n < 1 or k_max < 1:
        raise ConfigurationError(f"n and k_max must be >= 1, got n={n}, k_max={k_max}")
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    logs = math.log(n) + math.log(1.0 / delta) + math.log(k_max)
    return SketchRows(
        theorem_bound=math.ceil(48.0 * (logs + 27.6)),
        proof_bound=math.ceil(48.0 * (logs + 41.4)),
    )
