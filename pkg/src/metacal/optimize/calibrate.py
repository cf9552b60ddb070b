"""Single-goal calibration: run one or both optimizers and keep the best."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigurationError
from ..estuary import ParameterBounds
from ._run import OptimRun
from .gradient import GradientConfig, multistart_gradient
from .pso import PSOConfig, pso_minimize

ALGORITHMS = ("pso", "grad", "both")


@dataclass(frozen=True)
class Calibration:
    runs: dict[str, OptimRun]

    @property
    def best(self) -> OptimRun:
        # ties go to the first algorithm run
        return min(self.runs.values(), key=lambda r: r.best_f)


def calibrate(objective, bounds: ParameterBounds, algo: str = "both", pso: PSOConfig = PSOConfig(),
              grad: GradientConfig = GradientConfig(), n_starts: int = 10, extra_starts=()) -> Calibration:
    if algo not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    runs = {}
    if algo in ("pso", "both"):
        runs["pso"] = pso_minimize(objective, bounds, pso, init=list(extra_starts) or None)
    if algo in ("grad", "both"):
        runs["grad"] = multistart_gradient(objective, bounds, n_starts, grad, extra_starts=extra_starts)
    return Calibration(runs)
