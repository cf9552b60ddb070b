"""Latin Hypercube designs and their evaluation into per-station error tables."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .errors import DegenerateConfigurationError, EvaluationError, InvalidInputError
from .estuary import ParameterBounds, TimeSeries

CALLS_PER_PARAMETER = 10


def default_design_size(d: int) -> int:
    """Rule-of-thumb number of simulator runs: ten per parameter."""
    if d < 1:
        raise InvalidInputError(f"design dimension must be >= 1, got {d}")
    return CALLS_PER_PARAMETER * d


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    points: np.ndarray = field(repr=False)
    bounds: ParameterBounds

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        if pts.shape[1] != self.bounds.dim:
            raise InvalidInputError(f"design has {pts.shape[1]} columns, bounds have {self.bounds.dim}")
        self.bounds.check(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def unit(self) -> np.ndarray:
        return self.bounds.to_unit(self.points)

    def append(self, other: "DesignMatrix") -> "DesignMatrix":
        return DesignMatrix(np.vstack([self.points, other.points]), self.bounds)


def is_latin_hypercube(points, bounds: ParameterBounds) -> bool:
    """True when every column has exactly one point in each of ``n`` equal strata."""
    u = bounds.to_unit(np.atleast_2d(points))
    n = u.shape[0]
    strata = np.floor(u * n).astype(int)
    if np.any(strata < 0) or np.any(strata >= n):
        return False
    return all(np.array_equal(np.sort(col), np.arange(n)) for col in strata.T)


# Jitter stays this far (in unit-cube coordinates) from stratum edges so the
# stratification survives the round trip through physical units.
_EDGE = 1e-9


def lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random LHS on ``[0, 1)^d``: independent stratum permutation per column, uniform jitter."""
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    jitter = rng.random((n, d))
    return (strata + _EDGE * n + jitter * (1.0 - 2.0 * _EDGE * n)) / n


def lhs_sample(n: int, bounds: ParameterBounds, seed=None) -> DesignMatrix:
    if n < 1:
        raise InvalidInputError(f"design size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return DesignMatrix(bounds.from_unit(lhs_unit(n, bounds.dim, rng)), bounds)


@dataclass(frozen=True, eq=False)
class ErrorTable:
    design: DesignMatrix
    responses: np.ndarray = field(repr=False)
    station_ids: tuple[int, ...]

    def __post_init__(self):
        r = np.array(self.responses, dtype=float, ndmin=2)
        ids = tuple(int(i) for i in self.station_ids)
        if r.shape != (self.design.n, len(ids)):
            raise InvalidInputError(f"responses shape {r.shape} does not match design rows x stations")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise InvalidInputError("responses must be finite and nonnegative")
        r.setflags(write=False)
        object.__setattr__(self, "responses", r)
        object.__setattr__(self, "station_ids", ids)

    def __len__(self):
        return self.design.n

    @property
    def n_stations(self) -> int:
        return len(self.station_ids)

    def column(self, station: int) -> np.ndarray:
        return self.responses[:, station]

    def mean_response(self) -> np.ndarray:
        return self.responses.mean(axis=1)


def _row_metrics(scenario, observations, x) -> np.ndarray:
    sims = scenario.simulate(x)
    return np.array([[metrics.rmse(s, o), metrics.bias(s, o), metrics.nash(s, o)]
                     for s, o in zip(sims, observations)]).T


@dataclass(frozen=True, eq=False)
class DesignMetrics:
    """Per-station RMSE table plus the signed BIAS and NASH scores of each run."""

    rmse: ErrorTable
    bias: np.ndarray = field(repr=False)
    nash: np.ndarray = field(repr=False)


def evaluate_design_metrics(design: DesignMatrix, scenario, observations: Sequence[TimeSeries],
                            workers: int | None = 1) -> DesignMetrics:
    """Run the forward model on every design row and score each station.

    Rows are distributed over ``workers`` threads; the tables are assembled
    by row index so the result does not depend on the worker count.
    """
    if len(observations) != len(scenario.stations):
        raise InvalidInputError(
            f"{len(observations)} observation series for {len(scenario.stations)} stations")
    workers = workers or os.cpu_count() or 1

    def run(k):
        try:
            return _row_metrics(scenario, observations, design.points[k])
        except DegenerateConfigurationError as exc:
            raise EvaluationError(f"design row {k}: {exc}", index=k) from exc

    if workers == 1:
        rows = [run(k) for k in range(design.n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, range(design.n)))
    ns = len(scenario.stations)
    cube = np.stack(rows) if rows else np.empty((0, 3, ns))
    return DesignMetrics(ErrorTable(design, cube[:, 0], scenario.station_ids), cube[:, 1].copy(), cube[:, 2].copy())


def evaluate_design(design: DesignMatrix, scenario, observations: Sequence[TimeSeries],
                    workers: int | None = 1) -> ErrorTable:
    """Per-station RMSE of every design row (see :func:`evaluate_design_metrics`)."""
    return evaluate_design_metrics(design, scenario, observations, workers).rmse


def write_design_csv(path, design: DesignMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(design.bounds.names)
        for row in design.points:
            w.writerow([repr(float(v)) for v in row])


def read_design_csv(path, bounds: ParameterBounds) -> DesignMatrix:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    if tuple(header) != bounds.names:
        raise InvalidInputError(f"{path}: unexpected design header {header}")
    return DesignMatrix(np.array(rows, dtype=float).reshape(-1, bounds.dim), bounds)


def write_table_csv(path, table: ErrorTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*table.design.bounds.names, *(f"J_{i}" for i in table.station_ids)])
        for x, y in zip(table.design.points, table.responses):
            w.writerow([repr(float(v)) for v in (*x, *y)])


def read_table_csv(path, bounds: ParameterBounds) -> ErrorTable:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = np.array([[float(v) for v in row] for row in r], dtype=float)
    d = bounds.dim
    if tuple(header[:d]) != bounds.names or not all(h.startswith("J_") for h in header[d:]):
        raise InvalidInputError(f"{path}: unexpected error-table header {header}")
    ids = tuple(int(h[2:]) for h in header[d:])
    rows = rows.reshape(-1, len(header))
    return ErrorTable(DesignMatrix(rows[:, :d], bounds), rows[:, d:], ids)


def write_metric_csv(path, design: DesignMatrix, values, station_ids, prefix: str) -> None:
    """Design rows followed by one ``<prefix>_<id>`` column per station."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*design.bounds.names, *(f"{prefix}_{i}" for i in station_ids)])
        for x, y in zip(design.points, np.asarray(values)):
            w.writerow([repr(float(v)) for v in (*x, *y)])


def read_metric_csv(path, bounds: ParameterBounds, prefix: str):
    """Inverse of :func:`write_metric_csv`: ``(design, values, station_ids)``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = np.array([[float(v) for v in row] for row in r], dtype=float)
    d = bounds.dim
    tag = prefix + "_"
    if tuple(header[:d]) != bounds.names or not all(h.startswith(tag) for h in header[d:]):
        raise InvalidInputError(f"{path}: unexpected {prefix} table header {header}")
    ids = tuple(int(h[len(tag):]) for h in header[d:])
    rows = rows.reshape(-1, len(header))
    return DesignMatrix(rows[:, :d], bounds), rows[:, d:], ids
