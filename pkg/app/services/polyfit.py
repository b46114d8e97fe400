"""Polynômes de substitution g_d(ξ;α), perte m(α) et minimisation sur intervalle.

Toutes les pertes sont exprimées à partir des traces t_i = tr(S R^i Sᵀ) (ou
tr(R^i) sans sketch) : le résidu suivant s'écrit r(R;α) = Σ_j α^j P_j(R) et
m(α) = tr(r(R;α)²) est un polynôme en α dont les coefficients sont des
combinaisons linéaires des t_i.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from app.errors import ConfigurationError, MissingPowerError, ShapeError
from app.linalg.matcore import Mat, frob_norm, identity, mat_mul
from app.models.strategy import AlphaInterval

logger = logging.getLogger(__name__)

UNBOUNDED = AlphaInterval(lower=-1e6, upper=1e6)

CONSTANT_LOSS_RTOL = 1e-14
REPEATED_ROOT_RTOL = 1e-12
SCAN_POINTS = 129
BISECTION_MAX_STEPS = 200


class ResidualFamily(str, Enum):
    INV_SQRT = "invsqrt"
    INV_PROOT = "invproot"
    INVERSE = "inverse"


@dataclass(frozen=True)
class SurrogatePolynomial:
    """g_d(ξ;α) = f_{d−1}(ξ) + α·ξ^d"""
    degree: int
    base_coeffs: Tuple[float, ...]
    family: ResidualFamily
    p: Optional[int] = None

    @property
    def taylor_alpha(self) -> float:
        """Coefficient a_d : g_d(ξ; a_d) redonne le développement de Taylor f_d"""
        return taylor_coefficient(self.family, self.degree, self.p)

    def coeffs(self, alpha: float) -> List[float]:
        return list(self.base_coeffs) + [float(alpha)]


@dataclass(frozen=True)
class QuarticLoss:
    """m(α) = Σ c_i α^i sur [ℓ, u] (degré 4, ou 2p pour Newton inverse)"""
    coeffs: Tuple[float, ...]
    interval: AlphaInterval
    taylor_alpha: Optional[float] = None

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def taylor_coefficient(family: ResidualFamily, j: int, p: Optional[int] = None) -> float:
    """j-ème coefficient de Taylor en ξ = 0 de la fonction cible de la famille"""
    if j < 0:
        raise ConfigurationError(f"Taylor index must be non-negative, got {j}")
    family = ResidualFamily(family)
    if family is ResidualFamily.INV_SQRT:
        # (1−ξ)^{−1/2}
        return math.comb(2 * j, j) / 4.0 ** j
    if family is ResidualFamily.INVERSE:
        return 1.0
    if p is None or p < 1:
        raise ConfigurationError(f"inverse p-th root family needs p >= 1, got {p}")
    # (1−ξ)^{−1/p}
    coefficient = 1.0
    for i in range(j):
        coefficient *= (1.0 / p + i) / (i + 1)
    return coefficient


def taylor_surrogate(family: ResidualFamily, d: int, p: Optional[int] = None) -> SurrogatePolynomial:
    family = ResidualFamily(family)
    if d < 1:
        raise ConfigurationError(f"surrogate degree must be >= 1, got {d}")
    if family is ResidualFamily.INV_PROOT:
        if p is None or p < 1:
            raise ConfigurationError(f"inverse p-th root family needs p >= 1, got {p}")
        if d != 1:
            raise ConfigurationError(f"inverse p-th root surrogate supports d=1 only, got d={d}")
    if family is ResidualFamily.INVERSE and d > 2:
        raise ConfigurationError(f"inverse surrogate supports d in {{1, 2}}, got d={d}")
    base = tuple(taylor_coefficient(family, j, p) for j in range(d))
    return SurrogatePolynomial(degree=d, base_coeffs=base, family=family, p=p)


def default_interval(family: ResidualFamily, d: int, p: Optional[int] = None) -> AlphaInterval:
    """Intervalle [ℓ, u] par défaut d'une famille de substitution"""
    family = ResidualFamily(family)
    if family is ResidualFamily.INV_SQRT:
        if d == 1:
            return AlphaInterval(lower=0.5, upper=1.0)
        if d == 2:
            return AlphaInterval(lower=3.0 / 8.0, upper=29.0 / 20.0)
        raise ConfigurationError(f"no default interval for degree {d}; pass one explicitly")
    if family is ResidualFamily.INVERSE:
        return AlphaInterval(lower=0.5, upper=2.0)
    if p is None or p < 1:
        raise ConfigurationError(f"inverse p-th root family needs p >= 1, got {p}")
    return AlphaInterval(lower=1.0 / (2 * p), upper=2.0 / p)


def eval_poly_matrix(coeffs: Sequence[float], r: Mat) -> Mat:
    """Σ c_j R^j par Horner (len(coeffs) − 1 produits, le coefficient de tête est absorbé)"""
    n = r.shape[0]
    eye = identity(n)
    if len(coeffs) == 1:
        return coeffs[0] * eye
    acc = coeffs[-1] * r + coeffs[-2] * eye
    for c in reversed(coeffs[:-2]):
        acc = mat_mul(acc, r) + c * eye
    return acc


def eval_surrogate_matrix(g: SurrogatePolynomial, alpha: float, r: Mat) -> Mat:
    """g_d(R; α) par Horner en d − 1 produits.

    Le décompte usuel d'une itération compte d produits pour cette évaluation ;
    les compteurs de ``count_products`` en affichent donc un de moins par pas.
    """
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ShapeError(f"surrogate argument must be square, got {r.shape}")
    return eval_poly_matrix(g.coeffs(alpha), r)


def eval_residual_map(x: float, alpha: float) -> float:
    """h(x,α) = 1 − (1−x)(1+αx)² : récurrence scalaire du résidu pour d = 1"""
    return 1.0 - (1.0 - x) * (1.0 + alpha * x) ** 2


def eval_loss(loss: QuarticLoss, alpha) -> float:
    return P.polyval(alpha, loss.coeffs)


def _loss_from_residual_polys(polys: List[np.ndarray], r_traces) -> np.ndarray:
    """Coefficients de m(α) = tr((Σ_j α^j P_j(R))²) à partir des traces"""
    order = len(polys) - 1
    needed = max(2 * (len(poly) - 1) for poly in polys)
    if r_traces.max_power < needed:
        raise MissingPowerError(
            f"loss needs traces up to power {needed}, table stops at {r_traces.max_power}",
            needed=needed,
            available=r_traces.max_power,
        )
    traces = np.array([r_traces[i] for i in range(needed + 1)])
    coeffs = np.zeros(2 * order + 1)
    for j, pj in enumerate(polys):
        for l, pl in enumerate(polys):
            product = P.polymul(pj, pl)
            coeffs[j + l] += float(np.dot(product, traces[: len(product)]))
    return coeffs


def ns_residual_polys(base_coeffs: Sequence[float], d: int) -> List[np.ndarray]:
    """r(λ;α) = 1 − (1−λ)(b(λ) + αλ^d)² développé en puissances de α"""
    one_minus = np.array([1.0, -1.0])
    b = np.asarray(base_coeffs, dtype=np.float64)
    lam_d = np.zeros(d + 1)
    lam_d[d] = 1.0
    p0 = P.polysub([1.0], P.polymul(one_minus, P.polymul(b, b)))
    p1 = -2.0 * P.polymul(one_minus, P.polymul(b, lam_d))
    p2 = -P.polymul(one_minus, P.polymul(lam_d, lam_d))
    return [p0, p1, p2]


def ns_loss_coeffs(r_traces, d: int, interval: Optional[AlphaInterval] = None) -> QuarticLoss:
    """Perte quartique commune aux itérations signe, racine carrée et polaire.

    Args:
        r_traces: table des traces t_i, i = 0..4d+2
        d: degré du polynôme de substitution
        interval: intervalle [ℓ, u], par défaut celui de la famille

    Returns:
        QuarticLoss: coefficients c_0..c_4
    """
    g = taylor_surrogate(ResidualFamily.INV_SQRT, d)
    if interval is None:
        interval = default_interval(ResidualFamily.INV_SQRT, d)
    coeffs = _loss_from_residual_polys(ns_residual_polys(g.base_coeffs, d), r_traces)
    return QuarticLoss(coeffs=tuple(coeffs), interval=interval, taylor_alpha=g.taylor_alpha)


def inverse_newton_loss_coeffs(
    r_traces,
    p: int,
    interval: Optional[AlphaInterval] = None,
) -> QuarticLoss:
    """Perte de degré 2p de Newton inverse couplé : r(λ;α) = 1 − (1−λ)(1+αλ)^p"""
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if interval is None:
        interval = default_interval(ResidualFamily.INV_PROOT, 1, p)
    one_minus = np.array([1.0, -1.0])
    polys = [np.array([0.0, 1.0])]
    for j in range(1, p + 1):
        lam_j = np.zeros(j + 1)
        lam_j[j] = 1.0
        polys.append(-math.comb(p, j) * P.polymul(one_minus, lam_j))
    coeffs = _loss_from_residual_polys(polys, r_traces)
    return QuarticLoss(coeffs=tuple(coeffs), interval=interval, taylor_alpha=1.0 / p)


def chebyshev_loss_coeffs(r_traces, interval: Optional[AlphaInterval] = None) -> QuarticLoss:
    """R_{k+1} = R² − α(R² − R³) : perte quadratique en α"""
    if interval is None:
        interval = default_interval(ResidualFamily.INVERSE, 2)
    polys = [np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0, 1.0])]
    coeffs = _loss_from_residual_polys(polys, r_traces)
    return QuarticLoss(coeffs=tuple(coeffs), interval=interval, taylor_alpha=1.0)


def chebyshev_alpha(r_traces, interval: Optional[AlphaInterval] = None) -> float:
    loss = chebyshev_loss_coeffs(r_traces, interval)
    c0, c1, c2 = loss.coeffs
    scale = max(abs(c0), abs(c1), abs(c2))
    if c2 <= CONSTANT_LOSS_RTOL * scale:
        return loss.interval.clamp(loss.taylor_alpha)
    return loss.interval.clamp(-c1 / (2.0 * c2))


def db_loss_coeffs(m_mat: Mat, m_inv: Mat) -> QuarticLoss:
    """Perte de Newton DB sous forme produit, en O(n²) sans produit matriciel.

    tr(M²) et tr(M⁻²) sont des sommes de carrés des coefficients (M symétrique).
    """
    n = m_mat.shape[0]
    tr_m = float(np.trace(m_mat))
    tr_m2 = float(np.sum(np.square(m_mat)))
    tr_inv = float(np.trace(m_inv))
    tr_inv2 = float(np.sum(np.square(m_inv)))
    c0 = n - 2.0 * tr_m + tr_m2
    c1 = -4.0 * n + 8.0 * tr_m - 4.0 * tr_m2
    c2 = 10.0 * n - 14.0 * tr_m + 6.0 * tr_m2 - 2.0 * tr_inv
    c3 = -12.0 * n + 12.0 * tr_m - 4.0 * tr_m2 + 4.0 * tr_inv
    c4 = 6.0 * n - 4.0 * tr_m + tr_m2 - 4.0 * tr_inv + tr_inv2
    return QuarticLoss(coeffs=(c0, c1, c2, c3, c4), interval=UNBOUNDED, taylor_alpha=0.5)


def _polish(coeffs: np.ndarray, root: float, steps: int = 2) -> float:
    deriv = P.polyder(coeffs)
    for _ in range(steps):
        slope = P.polyval(root, deriv)
        if slope == 0.0 or not np.isfinite(slope):
            break
        step = P.polyval(root, coeffs) / slope
        if not np.isfinite(step):
            break
        root -= step
    return float(root)


def _real_cubic_roots(coeffs: Sequence[float]) -> List[float]:
    """Racines réelles de a0 + a1 x + a2 x² + a3 x³ (formes fermées)"""
    a0, a1, a2, a3 = (float(c) for c in coeffs)
    scale = max(abs(a0), abs(a1), abs(a2), abs(a3))
    if scale == 0.0:
        return []
    if abs(a3) <= CONSTANT_LOSS_RTOL * scale:
        if abs(a2) <= CONSTANT_LOSS_RTOL * scale:
            if abs(a1) <= CONSTANT_LOSS_RTOL * scale:
                return []
            return [-a0 / a1]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        q = -0.5 * (a1 + math.copysign(sq, a1))
        roots = [q / a2]
        if q != 0.0:
            roots.append(a0 / q)
        return roots

    b, c, d = a2 / a3, a1 / a3, a0 / a3
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    half_q = q / 2.0
    third_p = p / 3.0
    delta = half_q * half_q + third_p ** 3
    magnitude = max(half_q * half_q, abs(third_p) ** 3)

    if abs(delta) <= REPEATED_ROOT_RTOL * magnitude or magnitude == 0.0:
        u = float(np.cbrt(-half_q))
        ts = [2.0 * u, -u]
    elif delta > 0:
        big = -math.copysign(float(np.cbrt(abs(half_q) + math.sqrt(delta))), half_q)
        small = -third_p / big if big != 0.0 else 0.0
        ts = [big + small]
    else:
        radius = 2.0 * math.sqrt(-third_p)
        cos_arg = min(1.0, max(-1.0, 3.0 * q / (2.0 * p) * math.sqrt(-3.0 / p)))
        phi = math.acos(cos_arg) / 3.0
        ts = [radius * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]

    cubic = np.array([a0, a1, a2, a3])
    return [_polish(cubic, t - shift) for t in ts]


def _best_candidate(coeffs: np.ndarray, candidates: List[float]) -> float:
    # Égalités départagées vers le plus petit α
    best_alpha, best_value = None, None
    for alpha in sorted(candidates):
        value = P.polyval(alpha, coeffs)
        if best_value is None or value < best_value:
            best_alpha, best_value = alpha, value
    return float(best_alpha)


def _is_constant(coeffs: np.ndarray) -> bool:
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    return coeffs.size < 2 or float(np.max(np.abs(coeffs[1:]))) <= CONSTANT_LOSS_RTOL * scale


def _constant_choice(interval: AlphaInterval, taylor_alpha: Optional[float]) -> float:
    if taylor_alpha is None:
        return 0.5 * (interval.lower + interval.upper)
    return interval.clamp(taylor_alpha)


def minimize_quartic_on_interval(loss: QuarticLoss) -> float:
    """argmin de m(α) sur [ℓ, u] via les racines réelles du cubique m'(α)"""
    coeffs = np.zeros(5)
    coeffs[: len(loss.coeffs)] = loss.coeffs
    lower, upper = loss.interval.lower, loss.interval.upper
    if lower == upper:
        return lower
    if _is_constant(coeffs):
        return _constant_choice(loss.interval, loss.taylor_alpha)
    roots = _real_cubic_roots(P.polyder(coeffs))
    candidates = [lower, upper] + [r for r in roots if lower <= r <= upper]
    return _best_candidate(coeffs, candidates)


def _bisect_derivative(deriv: np.ndarray, left: float, right: float, tol: float) -> float:
    f_left = P.polyval(left, deriv)
    mid = 0.5 * (left + right)
    for _ in range(BISECTION_MAX_STEPS):
        mid = 0.5 * (left + right)
        f_mid = P.polyval(mid, deriv)
        if abs(f_mid) <= tol or mid in (left, right):
            break
        if (f_mid < 0) == (f_left < 0):
            left, f_left = mid, f_mid
        else:
            right = mid
    return mid


def minimize_poly_on_interval(
    coeffs: Sequence[float],
    interval: AlphaInterval,
    taylor_alpha: Optional[float] = None,
) -> float:
    """argmin d'un polynôme de degré quelconque sur [ℓ, u].

    Degré ≤ 4 : résolution fermée. Au-delà : balayage sur 129 points, bisection
    de m' dans chaque changement de signe, et racines réelles de m' issues de
    la matrice compagnon.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=np.float64), trim="b")
    if c.size == 0:
        c = np.zeros(1)
    lower, upper = interval.lower, interval.upper
    if lower == upper:
        return lower
    if c.size <= 5:
        return minimize_quartic_on_interval(QuarticLoss(tuple(c), interval, taylor_alpha))
    if _is_constant(c):
        return _constant_choice(interval, taylor_alpha)

    deriv = P.polyder(c)
    grid = np.linspace(lower, upper, SCAN_POINTS)
    slopes = P.polyval(grid, deriv)
    tol = 1e-12 * float(np.max(np.abs(deriv)))
    candidates = [float(x) for x in grid]
    for i in range(SCAN_POINTS - 1):
        if slopes[i] == 0.0:
            continue
        if (slopes[i] < 0) != (slopes[i + 1] < 0) and slopes[i + 1] != 0.0:
            candidates.append(_bisect_derivative(deriv, grid[i], grid[i + 1], tol))
    for root in P.polyroots(deriv):
        if abs(root.imag) <= 1e-9 * (1.0 + abs(root.real)) and lower <= root.real <= upper:
            candidates.append(float(root.real))
    return _best_candidate(c, candidates)


def minimize_loss(loss: QuarticLoss) -> float:
    """argmin de m sur son intervalle, quel que soit le degré de la perte"""
    return minimize_poly_on_interval(loss.coeffs, loss.interval, loss.taylor_alpha)


def residual_after_update(r: Mat, g: SurrogatePolynomial, alpha: float) -> Mat:
    """I − (I − R)·g(R;α)² : résidu suivant de la famille Newton–Schulz"""
    gr = eval_surrogate_matrix(g, alpha, r)
    n = r.shape[0]
    return identity(n) - mat_mul(identity(n) - r, mat_mul(gr, gr))


def direct_loss(r: Mat, g: SurrogatePolynomial, alpha: float, s: Optional[Mat] = None) -> float:
    """‖S·r(R;α)‖_F² évalué directement (‖r(R;α)‖_F² sans sketch)"""
    nxt = residual_after_update(r, g, alpha)
    if s is not None:
        nxt = mat_mul(s, nxt)
    return frob_norm(nxt) ** 2
