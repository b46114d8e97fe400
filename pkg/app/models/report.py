from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.models.strategy import AlphaInterval


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"


class IterationRecord(BaseModel):
    """État à l'itération k ; ``alpha`` est le coefficient appliqué pour passer à k+1"""
    k: int
    residual_fro: float
    residual_spec_est: Optional[float] = None
    alpha: Optional[float] = None
    wall_ns: int = 0


class ConvergenceReport(BaseModel):
    function: str = ""
    strategy: str = ""
    records: List[IterationRecord] = Field(default_factory=list)
    termination: Termination = Termination.MAX_ITERS
    interval: Optional[AlphaInterval] = None

    @property
    def iterations(self) -> int:
        """Nombre de mises à jour effectuées"""
        return self.records[-1].k if self.records else 0

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual_fro if self.records else float("nan")

    def alphas(self) -> List[float]:
        return [record.alpha for record in self.records if record.alpha is not None]


@dataclass
class IterationResult:
    primary: np.ndarray
    secondary: Optional[np.ndarray]
    report: ConvergenceReport

    @property
    def converged(self) -> bool:
        return self.report.termination is Termination.CONVERGED
