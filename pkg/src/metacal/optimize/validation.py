"""Trust check: compare the surrogate optimum with the simulator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..estuary import ParameterVector

TOLERANCE = 0.01


@dataclass(frozen=True)
class OptimumCheck:
    f_hat: float
    f_true: float
    rel_gap: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.rel_gap <= self.tolerance


def validate_optimum(x, surrogate_objective, forward_objective, tolerance: float = TOLERANCE,
                     eps: float = 1e-9, bounds=None) -> OptimumCheck:
    """Relative gap ``|f_hat - f_true| / max(f_true, eps)`` at ``x``.

    With ``bounds`` given, ``x`` is checked against the box first.
    """
    if isinstance(x, ParameterVector):
        x = x.to_array()
    x = np.asarray(x, dtype=float)
    if bounds is not None:
        bounds.check(x)
    f_hat = float(surrogate_objective(x))
    f_true = float(forward_objective(x))
    gap = abs(f_hat - f_true) / max(f_true, eps)
    return OptimumCheck(f_hat, f_true, gap, tolerance)
