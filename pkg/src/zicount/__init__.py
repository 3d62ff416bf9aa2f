"""Count regression with zero inflation, overdispersion and marginal means."""
from .estimation import FitConfig, FitResult, compare, fit
from .inference import idr
from .model import Dataset, ModelKind, ParameterVector
from .simulation import SimulationDesign, run_study

__all__ = [
    "Dataset",
    "FitConfig",
    "FitResult",
    "ModelKind",
    "ParameterVector",
    "SimulationDesign",
    "compare",
    "fit",
    "idr",
    "run_study",
]
