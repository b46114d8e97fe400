# Models package initialization
from .experiment import ExperimentConfig, FunctionName, SpectrumKind, SpectrumSpec
from .report import ConvergenceReport, IterationRecord, IterationResult, Termination
from .strategy import (
    AlphaInterval,
    CoefficientStrategy,
    FixedScheduleStrategy,
    IterationOptions,
    PrismExactStrategy,
    PrismSketchedStrategy,
    TaylorStrategy,
    strategy_from_flag,
)
