from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import PRISM_MAX_ITERS, PRISM_SKETCH_ROWS, PRISM_TOL_FRO
from app.errors import ConfigurationError

Triple = Tuple[float, float, float]

# Schémas quintiques publiés, en base de Gram : X(aI + bG + cG²) avec G = XᵀX
FIXED_PRESETS = {
    "muon-original": [
        (3.4445, -4.7750, 2.0315),
    ],
    "muon-quintic": [
        (4.0848, -6.8946, 2.9270),
        (3.9505, -6.3029, 2.6377),
        (3.7418, -5.5913, 2.3037),
        (2.8769, -3.1427, 1.2046),
        (2.8366, -3.0525, 1.2012),
    ],
    "polar-express": [
        (8.237312490495555, -23.157747414558198, 16.680568411445915),
        (4.082441999064835, -2.893047735332586, 0.5252849256975648),
        (3.9263479922546582, -2.8547468034765298, 0.5318022422894988),
        (3.2982187133085143, -2.424541981026706, 0.48632008358844075),
        (2.2970369434552573, -1.63662558125903, 0.4002628455953627),
        (1.8763805351440397, -1.2347896577722228, 0.35891887501668385),
        (1.8564423485617974, -1.2132449880935525, 0.3568003487825883),
        (1.8749994008682747, -1.2499988017229169, 0.3749994008546422),
    ],
}


def gram_to_residual(triple: Triple) -> Triple:
    """aI + bG + cG² avec G = I − R  →  a'I + b'R + c'R²"""
    a, b, c = triple
    return (a + b + c, -b - 2.0 * c, c)


class AlphaInterval(BaseModel):
    """Intervalle admissible [ℓ, u] pour le coefficient α"""
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float

    @model_validator(mode="after")
    def bounds_ordered(self):
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        return self

    def clamp(self, alpha: float) -> float:
        return min(max(alpha, self.lower), self.upper)

    def contains(self, alpha: float, slack: float = 1e-12) -> bool:
        return self.lower - slack <= alpha <= self.upper + slack


class TaylorStrategy(BaseModel):
    variant: Literal["taylor"] = "taylor"

    @property
    def label(self) -> str:
        return "taylor"


class PrismExactStrategy(BaseModel):
    variant: Literal["prism-exact"] = "prism-exact"

    @property
    def label(self) -> str:
        return "prism-exact"


class PrismSketchedStrategy(BaseModel):
    variant: Literal["prism-sketched"] = "prism-sketched"
    p: int = Field(default=PRISM_SKETCH_ROWS, ge=1)
    seed: int = 0

    @property
    def label(self) -> str:
        return f"prism-sketched:{self.p}:{self.seed}"


class FixedScheduleStrategy(BaseModel):
    """Schéma fixe : liste de α, ou triplets (a, b, c) importés tels quels"""
    variant: Literal["fixed"] = "fixed"
    alphas: Optional[List[float]] = None
    triples: Optional[List[Triple]] = None
    basis: Literal["residual", "gram"] = "residual"
    cycle: bool = False
    preset: Optional[str] = None

    @model_validator(mode="after")
    def one_schedule(self):
        if self.preset is not None:
            if self.preset not in FIXED_PRESETS:
                raise ValueError(
                    f"unknown preset {self.preset!r}, expected one of {sorted(FIXED_PRESETS)}"
                )
            if self.alphas or self.triples:
                raise ValueError("a preset cannot be combined with explicit alphas or triples")
            return self
        if bool(self.alphas) == bool(self.triples):
            raise ValueError("a fixed schedule needs exactly one non-empty list: alphas or triples")
        return self

    @property
    def uses_triples(self) -> bool:
        return self.preset is not None or bool(self.triples)

    def _entry(self, schedule: list, k: int):
        if self.cycle:
            return schedule[k % len(schedule)]
        return schedule[min(k, len(schedule) - 1)]

    def alpha_at(self, k: int) -> float:
        if self.uses_triples:
            raise ConfigurationError("this fixed schedule holds coefficient triples, not alphas")
        return float(self._entry(self.alphas, k))

    def triple_at(self, k: int) -> Triple:
        """Triplet de l'itération k, toujours exprimé dans la base du résidu"""
        if not self.uses_triples:
            raise ConfigurationError("this fixed schedule holds alphas, not coefficient triples")
        if self.preset is not None:
            return gram_to_residual(self._entry(FIXED_PRESETS[self.preset], k))
        triple = tuple(float(c) for c in self._entry(self.triples, k))
        return gram_to_residual(triple) if self.basis == "gram" else triple

    @property
    def label(self) -> str:
        if self.preset is not None:
            return f"preset:{self.preset}"
        if self.alphas:
            return "fixed:" + ";".join(f"{a:g}" for a in self.alphas)
        return f"fixed-triples:{len(self.triples)}"


CoefficientStrategy = Annotated[
    Union[TaylorStrategy, PrismExactStrategy, PrismSketchedStrategy, FixedScheduleStrategy],
    Field(discriminator="variant"),
]


def strategy_from_flag(flag: str) -> CoefficientStrategy:
    """Analyse la syntaxe CLI d'une stratégie.

    Formes acceptées : ``taylor``, ``prism-exact``, ``prism-sketched[:p[:seed]]``,
    ``fixed:a1;a2;...`` et ``preset:<nom>``.
    """
    text = flag.strip()
    head, _, rest = text.partition(":")
    try:
        if head == "taylor" and not rest:
            return TaylorStrategy()
        if head == "prism-exact" and not rest:
            return PrismExactStrategy()
        if head == "prism-sketched":
            parts = [part for part in rest.split(":") if part] if rest else []
            if len(parts) > 2:
                raise ValueError("too many fields")
            kwargs = {}
            if parts:
                kwargs["p"] = int(parts[0])
            if len(parts) == 2:
                kwargs["seed"] = int(parts[1])
            return PrismSketchedStrategy(**kwargs)
        if head == "fixed" and rest:
            alphas = [float(part) for part in rest.split(";") if part.strip()]
            return FixedScheduleStrategy(alphas=alphas)
        if head == "preset" and rest:
            return FixedScheduleStrategy(preset=rest)
    except ValueError as e:
        raise ConfigurationError(f"invalid strategy {flag!r}: {e}") from e
    raise ConfigurationError(
        f"invalid strategy {flag!r}: expected taylor, prism-exact, "
        "prism-sketched[:p[:seed]], fixed:a1;a2;... or preset:<name>"
    )


class IterationOptions(BaseModel):
    max_iters: int = Field(default=PRISM_MAX_ITERS, ge=1)
    # Arrêt quand ‖R_k‖_F ≤ tol_fro·sqrt(n)
    tol_fro: float = Field(default=PRISM_TOL_FRO, gt=0)
    degree: int = Field(default=1, ge=1)
    interval: Optional[AlphaInterval] = None
    normalize_input: bool = True
    record_walltime: bool = True
    # Désactivé : α minimisé sur [−1e6, 1e6] (mode de test)
    constrain_alpha: bool = True
    # 0 = pas d'estimation de ‖R_k‖₂
    spectral_estimate_iters: int = Field(default=0, ge=0)
    divergence_window: int = Field(default=5, ge=1)
