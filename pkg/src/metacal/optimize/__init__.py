"""Surrogate-based calibration: objectives, single- and multi-objective optimizers."""

from ._run import OptimRun
from .calibrate import ALGORITHMS, Calibration, calibrate
from .gradient import GradientConfig, gradient_minimize, multistart_gradient
from .nsga2 import NSGA2Config, ParetoFront, crowding_distance, dominates, nondominated_sort, nsga2
from .objectives import (KINDS, ForwardEvaluator, Objective, ObjectiveSpec, SurrogateEvaluator,
                         build_objective)
from .pso import PSOConfig, pso_minimize
from .validation import OptimumCheck, validate_optimum

__all__ = [
    "ALGORITHMS", "Calibration", "calibrate", "OptimRun", "GradientConfig", "gradient_minimize",
    "multistart_gradient", "NSGA2Config", "ParetoFront", "crowding_distance", "dominates",
    "nondominated_sort", "nsga2", "KINDS", "ForwardEvaluator", "Objective", "ObjectiveSpec",
    "SurrogateEvaluator", "build_objective", "PSOConfig", "pso_minimize", "OptimumCheck",
    "validate_optimum",
]
