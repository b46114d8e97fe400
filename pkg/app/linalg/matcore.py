"""Algèbre linéaire dense : produits, normes, factorisations et oracles spectraux.

Les matrices sont des ``numpy.ndarray`` 2-D en float64 (ordre C). Les oracles
(Jacobi, SVD de référence, fonctions de matrice) servent de vérité terrain pour
les tests des autres modules ; leur vitesse n'est pas un objectif.
"""
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve, lapack

from app.errors import (
    DefinitenessError,
    ShapeError,
    SingularityError,
    SymmetryError,
)
from app.utils.prng import generator

logger = logging.getLogger(__name__)

# Matrice réelle dense (float64, 2-D, valeurs finies)
Mat = np.ndarray

SYMMETRY_RTOL = 1e-8
ORACLE_MAX_DIM = 2048
JACOBI_MAX_SWEEPS = 60


@dataclass(frozen=True)
class Spectrum:
    """Valeurs propres (ou singulières) triées par ordre décroissant"""
    values: np.ndarray
    vectors: Optional[Mat] = None


class MatrixFunction(str, Enum):
    SIGN = "sign"
    SQRT = "sqrt"
    INV_SQRT = "invsqrt"
    INV_PROOT = "invproot"
    INVERSE = "inverse"
    POLAR = "polar"


@dataclass
class ProductLog:
    """Trace des produits matriciels effectués via ``mat_mul``"""
    shapes: List[Tuple[int, int, int]] = field(default_factory=list)

    def count(self) -> int:
        return len(self.shapes)

    def count_square(self, n: int) -> int:
        """Nombre de produits n×n · n×n"""
        return sum(1 for shape in self.shapes if shape == (n, n, n))


_product_log: ContextVar[Optional[ProductLog]] = ContextVar("prism_product_log", default=None)


@contextmanager
def count_products() -> Iterator[ProductLog]:
    """Enregistre la forme (m, k, n) de chaque produit effectué dans le contexte courant"""
    log = ProductLog()
    token = _product_log.set(log)
    try:
        yield log
    finally:
        _product_log.reset(token)


def as_mat(a, name: str = "matrix") -> Mat:
    """Convertit en matrice float64 2-D et vérifie les invariants de ``Mat``"""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)


def identity(n: int) -> Mat:
    return np.eye(n, dtype=np.float64)


def mat_mul(a: Mat, b: Mat) -> Mat:
    """Produit a·b en float64 (résultat identique pour des entrées identiques)"""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"mat_mul expects 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    log = _product_log.get()
    if log is not None:
        log.shapes.append((a.shape[0], a.shape[1], b.shape[1]))
    return np.matmul(a, b)


def frob_norm(a: Mat) -> float:
    return float(np.sqrt(np.sum(np.square(a))))


def symmetrize(a: Mat) -> Mat:
    return 0.5 * (a + a.T)


def is_symmetric(a: Mat, rtol: float = SYMMETRY_RTOL) -> bool:
    """Test relatif en norme de Frobenius : ‖a − aᵀ‖_F ≤ rtol·‖a‖_F"""
    if a.shape[0] != a.shape[1]:
        return False
    return frob_norm(a - a.T) <= rtol * frob_norm(a)


def require_symmetric(a: Mat, name: str = "matrix") -> Mat:
    """Vérifie la symétrie puis re-symétrise"""
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be square, got {a.shape}")
    if not is_symmetric(a):
        raise SymmetryError(
            f"{name} is not symmetric: ‖a−aᵀ‖_F/‖a‖_F = {frob_norm(a - a.T) / max(frob_norm(a), 1e-300):.3e}"
        )
    return symmetrize(a)


def spectral_norm_estimate(a: Mat, iters: int = 50, seed: int = 0) -> float:
    """Estime ‖a‖₂ par itération de la puissance sur aᵀa (sous-estimation)"""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = generator(seed).standard_normal((a.shape[1], 1))
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        w = mat_mul(a.T, mat_mul(a, v))
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        # Quotient de Rayleigh de aᵀa : ≤ λ_max(aᵀa)
        estimate = float(np.sqrt(max(float((v.T @ w)[0, 0]), 0.0)))
        v = w / norm_w
    return estimate


def householder_qr(a: Mat) -> Tuple[Mat, Mat]:
    """Factorisation QR réduite (réflexions de Householder LAPACK), diag(r) ≥ 0"""
    if a.shape[0] < a.shape[1]:
        raise ShapeError(f"householder_qr needs rows >= cols, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, r * signs[:, None]


def cholesky_factor(a: Mat) -> Mat:
    """Facteur de Cholesky inférieur ; lève DefinitenessError avec l'indice du pivot fautif"""
    a = require_symmetric(a)
    factor, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise DefinitenessError(
            f"matrix is not positive definite: pivot {info - 1} is not positive",
            pivot_index=info - 1,
        )
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    return factor


def cholesky_spd_inverse(a: Mat) -> Mat:
    """Inverse d'une matrice SPD par Cholesky et résolutions triangulaires"""
    factor = cholesky_factor(a)
    inverse = cho_solve((factor, True), np.eye(a.shape[0]), check_finite=False)
    return symmetrize(inverse)


def _round_robin_pairs(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Ordre tournoi : n−1 tours de paires disjointes couvrant toutes les paires (p, q)"""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            x, y = players[i], players[m - 1 - i]
            if x < n and y < n:
                ps.append(min(x, y))
                qs.append(max(x, y))
        if ps:
            rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_diagonal_norm(a: Mat) -> float:
    return frob_norm(a - np.diag(np.diag(a)))


def jacobi_eigendecomposition(a: Mat, tol: float = 1e-14) -> Spectrum:
    """Décomposition spectrale par rotations de Jacobi cycliques.

    Chaque balayage parcourt toutes les paires (p, q) en n−1 tours de paires
    disjointes, appliqués simultanément. Arrêt dès que la masse hors-diagonale
    est ≤ tol·‖a‖_F.

    Returns:
        Spectrum: valeurs propres décroissantes et vecteurs propres orthonormés en colonnes
    """
    a = require_symmetric(as_mat(a))
    n = a.shape[0]
    if n > ORACLE_MAX_DIM:
        raise ShapeError(f"oracle scale exceeded: {n} > {ORACLE_MAX_DIM}")

    work = a.copy()
    vectors = np.eye(n)
    threshold = tol * frob_norm(a)
    rounds = _round_robin_pairs(n)

    sweeps = 0
    while _off_diagonal_norm(work) > threshold and sweeps < JACOBI_MAX_SWEEPS:
        for ps, qs in rounds:
            app = work[ps, ps]
            aqq = work[qs, qs]
            apq = work[ps, qs]
            active = apq != 0.0
            if not np.any(active):
                continue
            safe_apq = np.where(active, apq, 1.0)
            theta = (aqq - app) / (2.0 * safe_apq)
            big = np.abs(theta) > 1e150
            theta_sq = np.where(big, 0.0, theta * theta)
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta_sq + 1.0)),
            )
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p = work[:, ps].copy()
            col_q = work[:, qs].copy()
            work[:, ps] = col_p * c - col_q * s
            work[:, qs] = col_p * s + col_q * c

            row_p = work[ps, :].copy()
            row_q = work[qs, :].copy()
            work[ps, :] = c[:, None] * row_p - s[:, None] * row_q
            work[qs, :] = s[:, None] * row_p + c[:, None] * row_q
            work[ps, qs] = 0.0
            work[qs, ps] = 0.0

            vec_p = vectors[:, ps].copy()
            vec_q = vectors[:, qs].copy()
            vectors[:, ps] = vec_p * c - vec_q * s
            vectors[:, qs] = vec_p * s + vec_q * c
        sweeps += 1

    if sweeps >= JACOBI_MAX_SWEEPS:
        logger.warning(
            f"Jacobi stopped after {sweeps} sweeps, off-diagonal mass {_off_diagonal_norm(work):.3e}"
        )
    logger.debug(f"Jacobi n={n} converged in {sweeps} sweeps")

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return Spectrum(values=values[order], vectors=vectors[:, order])


def reference_svd(a: Mat, tol: float = 1e-14) -> Tuple[Mat, Spectrum, Mat]:
    """SVD de référence via Jacobi sur aᵀa.

    Les valeurs singulières sont recalculées comme ‖a·v_i‖₂, ce qui préserve la
    précision relative des petites valeurs.
    """
    a = as_mat(a)
    rows, cols = a.shape
    if rows < cols:
        raise ShapeError(f"reference_svd needs rows >= cols, got {a.shape}")
    if cols > ORACLE_MAX_DIM:
        raise ShapeError(f"oracle scale exceeded: {cols} > {ORACLE_MAX_DIM}")

    gram = symmetrize(mat_mul(a.T, a))
    eig = jacobi_eigendecomposition(gram, tol)
    v = eig.vectors
    av = mat_mul(a, v)
    s = np.linalg.norm(av, axis=0)
    order = np.argsort(-s, kind="stable")
    s, v, av = s[order], v[:, order], av[:, order]

    s_max = s[0] if s.size else 0.0
    keep = s > tol * s_max if s_max > 0 else np.zeros_like(s, dtype=bool)
    rank = int(np.count_nonzero(keep))
    u = np.zeros((rows, cols))
    u[:, :rank] = av[:, :rank] / s[:rank]
    if rank < cols:
        # Complétion orthonormale des colonnes de rang déficient
        filler = generator(0).standard_normal((rows, cols - rank))
        q, _ = householder_qr(np.hstack([u[:, :rank], filler]))
        u[:, rank:] = q[:, rank:cols]
    return u, Spectrum(values=s), v


def _apply_eigenfunction(spectrum: Spectrum, values: np.ndarray) -> Mat:
    v = spectrum.vectors
    return symmetrize(mat_mul(v * values, v.T))


def reference_matrix_function(
    a: Mat,
    kind: MatrixFunction,
    tol: float = 1e-14,
    p: int = 2,
) -> Mat:
    """Fonction de matrice de référence : V·f(diag(λ))·Vᵀ (Jacobi) ou SVD pour Inverse/Polar"""
    a = as_mat(a)
    kind = MatrixFunction(kind)

    if kind in (MatrixFunction.INVERSE, MatrixFunction.POLAR):
        if kind is MatrixFunction.INVERSE and a.shape[0] != a.shape[1]:
            raise ShapeError(f"inverse needs a square matrix, got {a.shape}")
        u, s, v = reference_svd(a, tol)
        if kind is MatrixFunction.POLAR:
            return mat_mul(u, v.T)
        values = s.values
        if values[-1] <= tol * values[0]:
            raise SingularityError(
                f"matrix is singular to working tolerance: σ_min/σ_max = {values[-1] / max(values[0], 1e-300):.3e}"
            )
        return mat_mul(v / values, u.T)

    spectrum = jacobi_eigendecomposition(a, tol)
    lam = spectrum.values
    scale = float(np.max(np.abs(lam))) if lam.size else 0.0
    threshold = tol * scale

    if kind is MatrixFunction.SIGN:
        return _apply_eigenfunction(spectrum, np.sign(lam))
    if kind is MatrixFunction.SQRT:
        if lam[-1] < -max(threshold, 1e-300):
            raise DefinitenessError(f"square root needs a PSD matrix, smallest eigenvalue {lam[-1]:.3e}")
        return _apply_eigenfunction(spectrum, np.sqrt(np.maximum(lam, 0.0)))

    if lam[-1] <= threshold:
        raise SingularityError(f"eigenvalue {lam[-1]:.3e} below threshold {threshold:.3e}")
    if kind is MatrixFunction.INV_SQRT:
        return _apply_eigenfunction(spectrum, 1.0 / np.sqrt(lam))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return _apply_eigenfunction(spectrum, lam ** (-1.0 / p))
