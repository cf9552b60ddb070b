"""Calibration objectives backed by the surrogate or by the forward model.

Every objective is minimized.  Station-level RMSE goals come straight from
the per-station RMSE; ``abs_bias`` uses the magnitude of the mean offset and
``neg_nash`` is ``1 - NASH`` so that a perfect fit scores zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import kriging
from ..errors import ConfigurationError
from ..estuary import ForwardModel, ParameterVector

KINDS = ("mean_rmse", "station_rmse", "std_rmse", "max_rmse", "abs_bias", "neg_nash")
_STATION_KINDS = ("station_rmse", "abs_bias", "neg_nash")
_ALIASES = {
    "mean": "mean_rmse", "std": "std_rmse", "max": "max_rmse",
    "station": "station_rmse", "rmse": "station_rmse", "bias": "abs_bias", "nash": "neg_nash",
}


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    station: int | None = None  # column index into the station list

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown objective {self.kind!r}; expected one of {KINDS}")
        if self.kind in _STATION_KINDS and self.station is None:
            raise ConfigurationError(f"objective {self.kind} needs a station")
        if self.kind not in _STATION_KINDS and self.station is not None:
            raise ConfigurationError(f"objective {self.kind} does not take a station")

    @property
    def label(self) -> str:
        return self.kind if self.station is None else f"{self.kind}[{self.station}]"

    @classmethod
    def parse(cls, text: str, station_index=None) -> "ObjectiveSpec":
        """Parse ``mean``, ``std``, ``max``, ``station:<id>``, ``bias:<id>`` or ``nash:<id>``.

        ``station_index`` maps the textual station key (id or name) to a
        column index; without it the key must already be an index.
        """
        head, _, arg = text.strip().partition(":")
        kind = _ALIASES.get(head, head)
        station = None
        if arg:
            station = station_index(arg) if station_index is not None else int(arg)
        return cls(kind, station)


class SurrogateEvaluator:
    """Per-station metric predictions from fitted Kriging models.

    ``bias_models`` and ``nash_models`` map a station index to a model of the
    signed bias and of the Nash score for that station.
    """

    backing = "surrogate"

    def __init__(self, rmse_models: Sequence[kriging.KrigingModel],
                 bias_models: dict[int, kriging.KrigingModel] | None = None,
                 nash_models: dict[int, kriging.KrigingModel] | None = None):
        self.rmse_models = list(rmse_models)
        self.bias_models = dict(bias_models or {})
        self.nash_models = dict(nash_models or {})

    @property
    def n_stations(self) -> int:
        return len(self.rmse_models)

    def rmse(self, X) -> np.ndarray:
        return kriging.predict_all(self.rmse_models, X)

    def station_rmse(self, X, s: int) -> np.ndarray:
        return np.maximum(self.rmse_models[s].predict_mean(X), 0.0)

    def bias(self, X, s: int) -> np.ndarray:
        if s not in self.bias_models:
            raise ConfigurationError(f"no bias surrogate for station index {s}")
        return self.bias_models[s].predict_mean(X)

    def nash(self, X, s: int) -> np.ndarray:
        if s not in self.nash_models:
            raise ConfigurationError(f"no Nash surrogate for station index {s}")
        return self.nash_models[s].predict_mean(X)


class ForwardEvaluator:
    """Exact metrics from the synthetic simulator (for validation and oracle runs)."""

    backing = "forward"

    def __init__(self, model: ForwardModel, observations, standard_nse: bool = False):
        self.model = model
        self.obs = np.stack([o.values for o in observations])
        self.standard_nse = standard_nse
        if model._obs is None:
            self.model = ForwardModel(model.boundary, model.stations, model.grid, model.c_damp, observations)

    @property
    def n_stations(self) -> int:
        return self.model.n_stations

    def rmse(self, X) -> np.ndarray:
        return self.model.station_rmse(X)

    def station_rmse(self, X, s: int) -> np.ndarray:
        return self.model.station_rmse(X)[:, s]

    def bias(self, X, s: int) -> np.ndarray:
        lv = self.model.levels(X)[:, s, :]
        return lv.mean(axis=1) - self.obs[s].mean()

    def nash(self, X, s: int) -> np.ndarray:
        lv = self.model.levels(X)[:, s, :]
        o = self.obs[s]
        num = np.sum((lv - o) ** 2, axis=1)
        ref = np.broadcast_to(o, lv.shape) if self.standard_nse else lv
        den = np.sum((ref - o.mean()) ** 2, axis=1)
        return 1.0 - num / den


class Objective:
    """A scalar goal ``f(x)`` with a vectorized ``batch(X)`` companion."""

    def __init__(self, spec: ObjectiveSpec, evaluator):
        if spec.station is not None and not 0 <= spec.station < evaluator.n_stations:
            raise ConfigurationError(f"station index {spec.station} out of range for {evaluator.n_stations} stations")
        self.spec = spec
        self.evaluator = evaluator

    @property
    def label(self) -> str:
        return self.spec.label

    def batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ev, kind, s = self.evaluator, self.spec.kind, self.spec.station
        if kind == "mean_rmse":
            return ev.rmse(X).mean(axis=1)
        if kind == "std_rmse":
            return ev.rmse(X).std(axis=1)
        if kind == "max_rmse":
            return ev.rmse(X).max(axis=1)
        if kind == "station_rmse":
            return ev.station_rmse(X, s)
        if kind == "abs_bias":
            return np.abs(ev.bias(X, s))
        return 1.0 - ev.nash(X, s)

    def __call__(self, x) -> float:
        if isinstance(x, ParameterVector):
            x = x.to_array()
        return float(self.batch(np.asarray(x, dtype=float)[None, :])[0])


def build_objective(spec: ObjectiveSpec, models=None, forward: ForwardEvaluator | None = None,
                    backing: str = "surrogate") -> Objective:
    """Bind an objective spec to the surrogate (default) or to the forward model.

    ``models`` is either a :class:`SurrogateEvaluator` or a list of per-station
    RMSE Kriging models.
    """
    if backing == "surrogate":
        if models is None:
            raise ConfigurationError("surrogate-backed objective needs fitted models")
        ev = models if isinstance(models, SurrogateEvaluator) else SurrogateEvaluator(models)
    elif backing == "forward":
        if forward is None:
            raise ConfigurationError("forward-backed objective needs a forward evaluator")
        ev = forward
    else:
        raise ConfigurationError(f"unknown backing {backing!r}")
    return Objective(spec, ev)
