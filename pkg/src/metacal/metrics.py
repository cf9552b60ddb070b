"""Error functionals between simulated and observed water levels.

``rmse`` is the per-station calibration objective, ``bias`` and ``nash`` the
two alternative skill scores, and ``aggregate`` reduces per-station errors to
a single goal (mean, population std, or max over stations).

The default ``nash`` centres the *simulated* values on the observed mean in
its denominator.  Pass ``standard_nse=True`` for the textbook Nash-Sutcliffe
efficiency, whose denominator uses the observed values instead.
"""

from __future__ import annotations

import numpy as np

from .errors import AlignmentError, DegenerateMetricError, InvalidInputError
from .estuary import TimeSeries

AGGREGATES = ("mean", "std", "max")


def _pair(sim, obs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(sim, TimeSeries) and isinstance(obs, TimeSeries):
        if len(sim) == len(obs) and (sim.t0 != obs.t0 or sim.dt != obs.dt):
            raise AlignmentError("time grids differ")
    s = np.asarray(sim.values if isinstance(sim, TimeSeries) else sim, dtype=float)
    o = np.asarray(obs.values if isinstance(obs, TimeSeries) else obs, dtype=float)
    if s.shape != o.shape:
        raise AlignmentError(f"series lengths differ: {s.shape} vs {o.shape}")
    if s.ndim != 1 or s.size == 0:
        raise AlignmentError("series must be nonempty 1-D")
    return s, o


def rmse(sim, obs) -> float:
    s, o = _pair(sim, obs)
    return float(np.sqrt(np.mean((s - o) ** 2)))


def bias(sim, obs) -> float:
    """Mean simulated level minus mean observed level (signed)."""
    s, o = _pair(sim, obs)
    return float(np.mean(s) - np.mean(o))


def nash(sim, obs, standard_nse: bool = False) -> float:
    s, o = _pair(sim, obs)
    num = np.sum((s - o) ** 2)
    ref = o if standard_nse else s
    den = np.sum((ref - np.mean(o)) ** 2)
    if den == 0:
        raise DegenerateMetricError("Nash denominator is zero")
    return float(1.0 - num / den)


def aggregate(errors, kind: str = "mean") -> float:
    """Reduce per-station errors with ``mean``, population ``std`` or ``max``."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise InvalidInputError("no station errors to aggregate")
    return float(aggregate_rows(e[None, :], kind)[0])


def aggregate_rows(errors: np.ndarray, kind: str) -> np.ndarray:
    """Row-wise ``aggregate`` for an ``(m, Ns)`` array."""
    if kind == "mean":
        return np.mean(errors, axis=-1)
    if kind == "std":
        return np.std(errors, axis=-1)
    if kind == "max":
        return np.max(errors, axis=-1)
    raise InvalidInputError(f"unknown aggregate {kind!r}; expected one of {AGGREGATES}")
