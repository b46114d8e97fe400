"""Générateurs de matrices de test reproductibles (graine → matrice bit à bit).

Flux PRNG utilisés pour une graine donnée : 0 pour les matrices gaussiennes,
1 et 2 pour les facteurs orthogonaux U et V, 3 pour les spectres tirés
(Marchenko–Pastur et variante à queue lourde).
"""
import logging
from functools import lru_cache
from typing import Sequence

import numpy as np

from app.errors import ConfigurationError
from app.linalg.matcore import Mat, householder_qr, mat_mul, symmetrize
from app.models.experiment import SpectrumKind, SpectrumSpec
from app.utils.prng import generator

logger = logging.getLogger(__name__)

MP_TABLE_POINTS = 10_000

_STREAM_GAUSSIAN = 0
_STREAM_LEFT = 1
_STREAM_RIGHT = 2
_STREAM_SPECTRUM = 3


def gaussian_matrix(rows: int, cols: int, seed: int) -> Mat:
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return generator(seed, _STREAM_GAUSSIAN).standard_normal((rows, cols))


def wishart_spd(n: int, m: int, seed: int) -> Mat:
    """GᵀG pour G gaussienne n×m (matrice m×m)"""
    if n < m:
        raise ConfigurationError(f"wishart needs n >= m, got n={n}, m={m}")
    g = gaussian_matrix(n, m, seed)
    return symmetrize(mat_mul(g.T, g))


def _orthonormal_columns(rows: int, k: int, seed: int, stream: int) -> Mat:
    q, _ = householder_qr(generator(seed, stream).standard_normal((rows, k)))
    return q


def prescribed_spectrum_matrix(values: Sequence[float], rows: int, cols: int, seed: int) -> Mat:
    """U·diag(values)·Vᵀ avec U, V à colonnes orthonormées aléatoires"""
    k = min(rows, cols)
    sigma = np.asarray(values, dtype=np.float64)
    if sigma.shape != (k,):
        raise ConfigurationError(f"expected {k} singular values, got {sigma.size}")
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ConfigurationError("singular values must be non-negative and sorted descending")
    u = _orthonormal_columns(rows, k, seed, _STREAM_LEFT)
    v = _orthonormal_columns(cols, k, seed, _STREAM_RIGHT)
    return mat_mul(u * sigma, v.T)


def log_spaced_spectrum(k: int, sigma_min: float, sigma_max: float = 1.0) -> np.ndarray:
    """k valeurs singulières log-espacées de sigma_max à sigma_min"""
    if k < 1:
        raise ConfigurationError(f"spectrum length must be >= 1, got {k}")
    if not 0.0 < sigma_min <= sigma_max:
        raise ConfigurationError(f"need 0 < sigma_min <= sigma_max, got {sigma_min}, {sigma_max}")
    if k == 1:
        return np.array([sigma_max])
    return np.geomspace(sigma_max, sigma_min, k)


@lru_cache(maxsize=32)
def _mp_inverse_cdf_table(ratio: float):
    """Table (cdf, λ) de la loi de Marchenko–Pastur de rapport ``ratio`` ≤ 1, variance 1"""
    lo = (1.0 - np.sqrt(ratio)) ** 2
    hi = (1.0 + np.sqrt(ratio)) ** 2
    width = (hi - lo) / MP_TABLE_POINTS
    grid = lo + width * (np.arange(MP_TABLE_POINTS) + 0.5)
    density = np.sqrt(np.maximum((hi - grid) * (grid - lo), 0.0)) / (2.0 * np.pi * ratio * grid)
    cdf = np.concatenate([[0.0], np.cumsum(density)])
    cdf /= cdf[-1]
    edges = lo + width * np.arange(MP_TABLE_POINTS + 1)
    return cdf, edges


def _mp_eigenvalues(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    k = min(rows, cols)
    ratio = k / max(rows, cols)
    cdf, edges = _mp_inverse_cdf_table(ratio)
    return np.interp(rng.random(k), cdf, edges)


def _normalized_descending(sigma: np.ndarray) -> np.ndarray:
    sigma = np.sort(sigma)[::-1]
    return sigma / sigma[0]


def marchenko_pastur_singular_values(rows: int, cols: int, seed: int) -> np.ndarray:
    """Valeurs singulières tirées de la loi de Marchenko–Pastur, normalisées σ_max = 1"""
    rng = generator(seed, _STREAM_SPECTRUM)
    return _normalized_descending(np.sqrt(_mp_eigenvalues(rows, cols, rng)))


def htmp_singular_values(rows: int, cols: int, kappa: float, seed: int) -> np.ndarray:
    """σ_i² = λ_i·w_i, λ_i Marchenko–Pastur et w_i inverse-gamma (forme κ+1, échelle κ).

    Les λ_i sont tirés avant les w_i sur le même flux que
    ``marchenko_pastur_singular_values`` : à graine égale, les deux spectres
    ne diffèrent que par le facteur de queue lourde.
    """
    if not kappa > 0:
        raise ConfigurationError(f"kappa must be > 0, got {kappa}")
    rng = generator(seed, _STREAM_SPECTRUM)
    lam = _mp_eigenvalues(rows, cols, rng)
    weights = kappa / rng.gamma(kappa + 1.0, size=lam.size)
    return _normalized_descending(np.sqrt(lam * weights))


def htmp_like_matrix(rows: int, cols: int, kappa: float, seed: int) -> Mat:
    values = htmp_singular_values(rows, cols, kappa, seed)
    return prescribed_spectrum_matrix(values, rows, cols, seed)


def generate(spec: SpectrumSpec) -> Mat:
    """Matrice décrite par ``spec``"""
    logger.info(f"Generating {spec.kind.value} matrix {spec.rows}x{spec.cols} (seed={spec.seed})")
    if spec.kind is SpectrumKind.GAUSSIAN:
        return gaussian_matrix(spec.rows, spec.cols, spec.seed)
    if spec.kind is SpectrumKind.WISHART:
        return wishart_spd(spec.rows, spec.cols, spec.seed)
    if spec.kind is SpectrumKind.PRESCRIBED:
        return prescribed_spectrum_matrix(spec.values, spec.rows, spec.cols, spec.seed)
    return htmp_like_matrix(spec.rows, spec.cols, spec.kappa, spec.seed)
