"""Shared result type for single-objective optimizers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .._batch import check_finite, evaluate_batch
from ..errors import EvaluationError
from ..estuary import PARAMETER_NAMES, ParameterVector


@dataclass(frozen=True, eq=False)
class OptimRun:
    """Outcome of one minimization.

    ``history[k]`` is the best value found up to iteration ``k``; the last
    entry equals ``best_f``.
    """

    algorithm: str
    best_x: np.ndarray = field(repr=False)
    best_f: float
    history: np.ndarray = field(repr=False)
    evals: int
    seed: int | None = None

    @property
    def params(self) -> ParameterVector:
        return ParameterVector.from_array(self.best_x)

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "best_f"])
            for k, v in enumerate(self.history):
                w.writerow([k, repr(float(v))])

    def write_best_csv(self, path, names=None) -> None:
        names = names or (PARAMETER_NAMES if self.best_x.size == len(PARAMETER_NAMES)
                          else tuple(f"x{i + 1}" for i in range(self.best_x.size)))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["algorithm", "best_f", *names])
            w.writerow([self.algorithm, repr(float(self.best_f)), *(repr(float(v)) for v in self.best_x)])


def evaluate_rows(f, X, vectorized: bool, iteration: int, step: str = "iteration") -> np.ndarray:
    """Evaluate a population, tagging failures with the iteration (or generation) index."""
    try:
        values = evaluate_batch(f, X, vectorized)
        return check_finite(values.reshape(len(X)), f"{step} {iteration}")
    except EvaluationError:
        raise
    except Exception as exc:
        raise EvaluationError(f"objective failed at {step} {iteration}: {exc}", index=iteration) from exc
