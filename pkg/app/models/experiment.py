from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.models.strategy import CoefficientStrategy, IterationOptions


class SpectrumKind(str, Enum):
    GAUSSIAN = "gaussian"
    WISHART = "wishart"
    PRESCRIBED = "prescribed"
    HTMP = "htmp"


class SpectrumSpec(BaseModel):
    """Description d'une matrice de test générée.

    Pour ``wishart``, ``rows`` est le nombre d'échantillons n et ``cols`` la
    dimension m : la matrice produite est GᵀG, de taille m×m.
    """
    kind: SpectrumKind
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    seed: int = 0
    values: Optional[List[float]] = None
    kappa: Optional[float] = None

    @model_validator(mode="after")
    def check_kind_parameters(self):
        k = min(self.rows, self.cols)
        if self.kind is SpectrumKind.PRESCRIBED:
            if self.values is None:
                raise ValueError("prescribed spectrum needs values")
            if len(self.values) != k:
                raise ValueError(f"prescribed spectrum needs {k} values, got {len(self.values)}")
            if any(v < 0 for v in self.values):
                raise ValueError("prescribed singular values must be non-negative")
            if any(a < b for a, b in zip(self.values, self.values[1:])):
                raise ValueError("prescribed singular values must be sorted descending")
        if self.kind is SpectrumKind.HTMP:
            if self.kappa is None or not self.kappa > 0:
                raise ValueError("htmp spectrum needs kappa > 0")
        if self.kind is SpectrumKind.WISHART and self.rows < self.cols:
            raise ValueError(f"wishart needs rows >= cols, got {self.rows}x{self.cols}")
        return self


class FunctionName(str, Enum):
    SIGN = "sign"
    SQRT = "sqrt"
    INV_SQRT = "invsqrt"
    POLAR = "polar"
    INV_PROOT = "invproot"
    SQRT_DB = "sqrt-db"
    INVERSE_DB = "inverse-db"
    INVERSE_CHEB = "inverse-cheb"


class ExperimentConfig(BaseModel):
    function: FunctionName
    # Ordre de la racine pour invproot
    p: int = Field(default=2, ge=1)
    input_spec: Optional[SpectrumSpec] = None
    input_path: Optional[str] = None
    strategies: List[CoefficientStrategy] = Field(min_length=1)
    opts: IterationOptions = Field(default_factory=IterationOptions)
    repeats: int = Field(default=1, ge=1)
    output: Optional[str] = None

    @model_validator(mode="after")
    def one_input(self):
        if (self.input_spec is None) == (self.input_path is None):
            raise ValueError("exactly one of input_spec and input_path must be given")
        return self
