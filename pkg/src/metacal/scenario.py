"""Scenario configuration: boundary forcing, stations, time grid, observation noise.

Scenarios are stored as JSON documents.  ``default_scenario()`` builds a
six-station estuary loosely shaped like a long funnel with four dominant
constituents (M2, S2, K1, O1 like periods).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .estuary import (
    BoundaryConfig,
    ForwardModel,
    ParameterBounds,
    ParameterVector,
    StationConfig,
    StationDiscrepancy,
    TideConstituent,
    TimeGrid,
    TimeSeries,
    simulate,
    synthesize_observations,
)

SCENARIO_VERSION = 1


def calibrate_c_damp(boundary: BoundaryConfig, station: StationConfig, ks: float,
                     retained: float = 0.5, constituent: int = 0, beta: float = 1.0) -> float:
    """Damping constant for which ``station`` keeps ``retained`` of a constituent's amplitude."""
    u = beta * boundary.u_amplitudes[constituent]
    return -math.log(retained) * ks**2 * station.depth ** (4.0 / 3.0) / (station.distance * u)


_DEFAULT_STATIONS = (
    StationConfig(1, "verdon", 0.0, 15.0, 1),
    StationConfig(2, "richard", 30e3, 12.0, 2),
    StationConfig(3, "lamena", 60e3, 10.0, 3),
    StationConfig(4, "fort_medoc", 100e3, 8.0, 4),
    StationConfig(5, "bassens", 140e3, 7.0, 5),
    StationConfig(6, "bordeaux", 180e3, 6.0, 6),
)

_DEFAULT_BOUNDARY = BoundaryConfig(
    z_f=-15.0,
    z_mean=0.0,
    constituents=(
        TideConstituent(1.6, 44714.0, phase=0.0, nodal_factor=0.97, name="M2"),
        TideConstituent(0.5, 43200.0, phase=0.6, name="S2"),
        TideConstituent(0.15, 23934.0, phase=1.2, nodal_factor=1.05, nodal_phase=0.1, name="K1"),
        TideConstituent(0.12, 86164.0, phase=2.0, nodal_factor=1.08, nodal_phase=-0.1, name="O1"),
    ),
    u_amplitudes=(1.0, 0.32, 0.1, 0.08),
)

# Strickler values at the middle of each zone's admissible range.
_MID_KS = tuple(0.5 * (lo + hi) for lo, hi in zip(ParameterBounds.default().lower[3:], ParameterBounds.default().upper[3:]))

DEFAULT_C_DAMP = calibrate_c_damp(_DEFAULT_BOUNDARY, _DEFAULT_STATIONS[-1], _MID_KS[5])

DEFAULT_TRUE_PARAMS = ParameterVector(alpha=0.96, beta=1.05, gamma=0.36, ks=(38.0, 82.0, 91.0, 28.0, 78.0, 40.0))

_M2, _M4 = 44714.0, 22357.0

# Observed-but-unmodelled signal growing inland: river set-up of the mean
# level, an M2-band residual the damping law cannot represent, and an M4
# overtide from shallow-water distortion.
DEFAULT_DISCREPANCY = tuple(
    StationDiscrepancy(offset, ((a2, _M2, p2), (a4, _M4, p4)))
    for offset, a2, p2, a4, p4 in (
        (0.00, 0.02, 0.5, 0.03, 0.3),
        (0.01, 0.04, 1.0, 0.05, 0.8),
        (0.02, 0.06, 1.5, 0.06, 1.3),
        (0.04, 0.10, 2.0, 0.08, 1.8),
        (0.07, 0.08, 2.5, 0.10, 2.3),
        (0.10, 0.12, 3.0, 0.12, 2.8),
    )
)


@dataclass(frozen=True)
class Scenario:
    boundary: BoundaryConfig
    stations: tuple[StationConfig, ...]
    grid: TimeGrid
    c_damp: float
    noise_sigma: float
    seed: int
    true_params: ParameterVector
    bounds: ParameterBounds = field(default_factory=ParameterBounds.default)
    discrepancy: tuple[StationDiscrepancy, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        if self.discrepancy is not None:
            object.__setattr__(self, "discrepancy", tuple(self.discrepancy))
            if len(self.discrepancy) != len(self.stations):
                raise ConfigurationError("one discrepancy entry per station is required")
        if not self.stations:
            raise ConfigurationError("scenario needs at least one station")
        ids = [s.id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("station ids must be unique")
        if not self.c_damp >= 0:
            raise ConfigurationError("c_damp must be >= 0")
        if not self.noise_sigma >= 0:
            raise ConfigurationError("noise_sigma must be >= 0")

    @property
    def station_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.stations)

    def station_index(self, key) -> int:
        """Position of a station given its id or name."""
        for i, s in enumerate(self.stations):
            if str(s.id) == str(key) or s.name == str(key):
                return i
        raise ConfigurationError(f"unknown station {key!r}")

    def with_noise(self, noise_sigma: float) -> "Scenario":
        return replace(self, noise_sigma=noise_sigma)

    def without_discrepancy(self) -> "Scenario":
        return replace(self, discrepancy=None)

    def simulate(self, params) -> list[TimeSeries]:
        return simulate(params, self.boundary, self.stations, self.grid, self.c_damp)

    def observations(self) -> list[TimeSeries]:
        return synthesize_observations(self.true_params, self.boundary, self.stations, self.grid,
                                       self.noise_sigma, self.seed, self.c_damp, self.discrepancy)

    def forward_model(self, observations: Sequence[TimeSeries] | None = None) -> ForwardModel:
        return ForwardModel(self.boundary, self.stations, self.grid, self.c_damp, observations)

    def to_dict(self) -> dict:
        b = self.boundary
        return {
            "version": SCENARIO_VERSION,
            "boundary": {
                "z_f": b.z_f,
                "z_mean": b.z_mean,
                "constituents": [
                    {
                        "name": c.name, "amplitude": c.amplitude, "period": c.period, "phase": c.phase,
                        "nodal_factor": c.nodal_factor, "nodal_phase": c.nodal_phase,
                        "origin_phase": c.origin_phase, "u_amplitude": u,
                    }
                    for c, u in zip(b.constituents, b.u_amplitudes)
                ],
            },
            "stations": [
                {"id": s.id, "name": s.name, "distance": s.distance, "depth": s.depth, "zone": s.zone}
                for s in self.stations
            ],
            "grid": {"t0": self.grid.t0, "dt": self.grid.dt, "duration": self.grid.dt * (self.grid.n - 1)},
            "c_damp": self.c_damp,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "true_params": self.true_params.as_dict(),
            "bounds": {"lower": list(self.bounds.lower), "upper": list(self.bounds.upper)},
            "discrepancy": None if self.discrepancy is None else [
                {"offset": d.offset, "harmonics": [list(h) for h in d.harmonics]} for d in self.discrepancy
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            if d.get("version", SCENARIO_VERSION) != SCENARIO_VERSION:
                raise ConfigurationError(f"unsupported scenario version {d.get('version')}")
            cons = d["boundary"]["constituents"]
            boundary = BoundaryConfig(
                z_f=float(d["boundary"]["z_f"]),
                z_mean=float(d["boundary"]["z_mean"]),
                constituents=tuple(
                    TideConstituent(
                        amplitude=float(c["amplitude"]), period=float(c["period"]),
                        phase=float(c.get("phase", 0.0)), nodal_factor=float(c.get("nodal_factor", 1.0)),
                        nodal_phase=float(c.get("nodal_phase", 0.0)),
                        origin_phase=float(c.get("origin_phase", 0.0)), name=str(c.get("name", "")),
                    )
                    for c in cons
                ),
                u_amplitudes=tuple(float(c["u_amplitude"]) for c in cons),
            )
            stations = tuple(
                StationConfig(int(s["id"]), str(s["name"]), float(s["distance"]), float(s["depth"]), int(s["zone"]))
                for s in d["stations"]
            )
            g = d["grid"]
            grid = TimeGrid.from_duration(float(g["t0"]), float(g["dt"]), float(g["duration"]))
            tp = d["true_params"]
            true_params = ParameterVector(tp["alpha"], tp["beta"], tp["gamma"], tuple(tp[f"ks{i}"] for i in range(1, 7)))
            bounds = ParameterBounds.default()
            if "bounds" in d:
                bounds = ParameterBounds(tuple(d["bounds"]["lower"]), tuple(d["bounds"]["upper"]))
            discrepancy = None
            if d.get("discrepancy") is not None:
                discrepancy = tuple(
                    StationDiscrepancy(float(e.get("offset", 0.0)), tuple(tuple(h) for h in e.get("harmonics", ())))
                    for e in d["discrepancy"]
                )
            return cls(boundary, stations, grid, float(d["c_damp"]), float(d["noise_sigma"]), int(d["seed"]),
                       true_params, bounds, discrepancy)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed scenario: {exc!r}") from exc


def default_scenario(noise_sigma: float = 0.02, seed: int = 20150801, discrepancy: bool = True) -> Scenario:
    """Six-station, two-day, one-minute default scenario.

    With ``discrepancy=False`` the observations are the model plus noise only,
    so a perfect calibration reaches the noise floor.
    """
    return Scenario(
        boundary=_DEFAULT_BOUNDARY,
        stations=_DEFAULT_STATIONS,
        grid=TimeGrid.from_duration(0.0, 60.0, 2 * 86400.0),
        c_damp=DEFAULT_C_DAMP,
        noise_sigma=noise_sigma,
        seed=seed,
        true_params=DEFAULT_TRUE_PARAMS,
        discrepancy=DEFAULT_DISCREPANCY if discrepancy else None,
    )


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n")


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not a valid scenario document ({exc})") from exc
    return Scenario.from_dict(data)


def write_series_csv(path, series: Sequence[TimeSeries], station_ids: Sequence[int]) -> None:
    """Write aligned series as ``time_s,station_<id>,...`` in full precision."""
    if len(series) != len(station_ids):
        raise ConfigurationError("one station id per series is required")
    times = series[0].times
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", *(f"station_{i}" for i in station_ids)])
        cols = np.stack([s.values for s in series], axis=1)
        for t, row in zip(times, cols):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])


def read_series_csv(path) -> tuple[list[int], list[TimeSeries]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = np.array([[float(v) for v in row] for row in r])
    if not header or header[0] != "time_s" or rows.ndim != 2 or rows.shape[0] < 1:
        raise ConfigurationError(f"{path}: not a time-series CSV")
    ids = [int(h.removeprefix("station_")) for h in header[1:]]
    t = rows[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    return ids, [TimeSeries(float(t[0]), dt, rows[:, j + 1]) for j in range(len(ids))]
