"""Synthetic tidal-estuary forward model.

Water levels at the marine boundary are a sum of harmonic constituents scaled
by the tidal-range multiplier ``alpha`` and shifted by the sea-level correction
``gamma``.  Each constituent travels upstream to a station with a phase lag of
``distance / sqrt(g h)`` and an amplitude attenuation ``exp(-mu)`` where

    mu = c_damp * distance * (beta * U) / (K_S**2 * h**(4/3))

follows the Strickler bed-friction scaling: a smoother bed (larger ``K_S``)
and deeper water damp less, stronger currents damp more.

The model is closed form, so every call is cheap and deterministic; it plays
the role of the expensive simulator that the Kriging metamodel replaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateConfigurationError, InvalidInputError

GRAVITY = 9.81

PARAMETER_NAMES = ("alpha", "beta", "gamma", "ks1", "ks2", "ks3", "ks4", "ks5", "ks6")
N_ZONES = 6

# Tidal parameters then Strickler coefficients per friction zone.
DEFAULT_LOWER = (0.8, 0.8, 0.35, 30.0, 64.0, 80.0, 20.0, 64.0, 36.0)
DEFAULT_UPPER = (1.2, 1.2, 0.54, 46.0, 96.0, 100.0, 30.0, 96.0, 54.0)


@dataclass(frozen=True)
class ParameterVector:
    """A calibration point ``(alpha, beta, gamma, K_S1..K_S6)``."""

    alpha: float
    beta: float
    gamma: float
    ks: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(float(k) for k in self.ks))
        if len(self.ks) != N_ZONES:
            raise InvalidInputError(f"expected {N_ZONES} Strickler coefficients, got {len(self.ks)}")
        if not all(math.isfinite(v) for v in self.to_array()):
            raise InvalidInputError("parameter vector has non-finite components")

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "ParameterVector":
        x = [float(v) for v in x]
        if len(x) != len(PARAMETER_NAMES):
            raise InvalidInputError(f"expected {len(PARAMETER_NAMES)} values, got {len(x)}")
        return cls(alpha=x[0], beta=x[1], gamma=x[2], ks=tuple(x[3:]))

    def to_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, *self.ks], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(PARAMETER_NAMES, self.to_array().tolist()))

    def strickler(self, zone: int) -> float:
        return self.ks[zone - 1]


@dataclass(frozen=True)
class ParameterBounds:
    """Box constraints ``lower <= x <= upper``.

    ``names`` defaults to the nine calibration parameters when the dimension
    is nine and to ``x1..xd`` otherwise, so the same type serves the benchmark
    functions used in tests.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise InvalidInputError("lower and upper bounds must be nonempty and of equal length")
        if not all(math.isfinite(v) for v in lo + hi):
            raise InvalidInputError("bounds must be finite")
        bad = [i for i, (a, b) in enumerate(zip(lo, hi)) if not a < b]
        if bad:
            raise InvalidInputError(f"lower bound not below upper bound for components {bad}")
        names = self.names
        if names is None:
            names = PARAMETER_NAMES if len(lo) == len(PARAMETER_NAMES) else tuple(f"x{i + 1}" for i in range(len(lo)))
        if len(names) != len(lo):
            raise InvalidInputError("names must match the bound dimension")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "names", tuple(names))

    @classmethod
    def default(cls) -> "ParameterBounds":
        return cls(DEFAULT_LOWER, DEFAULT_UPPER, PARAMETER_NAMES)

    @classmethod
    def unit(cls, dim: int) -> "ParameterBounds":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - atol) and np.all(x <= self.hi + atol))

    def check(self, x) -> np.ndarray:
        """Return ``x`` as an array, raising if any component is out of bounds."""
        x = np.asarray(x.to_array() if isinstance(x, ParameterVector) else x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InvalidInputError(f"expected dimension {self.dim}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("non-finite parameter values")
        low = x < self.lo
        high = x > self.hi
        if np.any(low | high):
            idx = np.flatnonzero(np.any(np.atleast_2d(low | high), axis=0))
            names = [self.names[i] for i in idx]
            raise InvalidInputError(f"parameters out of bounds: {names}")
        return x

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lo) / self.width

    def from_unit(self, u) -> np.ndarray:
        return self.lo + np.asarray(u, dtype=float) * self.width

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class TideConstituent:
    amplitude: float  # m
    period: float  # s
    phase: float = 0.0  # rad
    nodal_factor: float = 1.0
    nodal_phase: float = 0.0  # rad
    origin_phase: float = 0.0  # rad
    name: str = ""

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ConfigurationError(f"constituent {self.name!r}: amplitude must be >= 0")
        if not self.period > 0:
            raise ConfigurationError(f"constituent {self.name!r}: period must be > 0")

    def argument(self, t):
        """Phase argument of the cosine at time ``t`` (seconds)."""
        return 2.0 * np.pi * t / self.period - self.phase + self.origin_phase + self.nodal_phase


@dataclass(frozen=True)
class BoundaryConfig:
    z_f: float
    z_mean: float
    constituents: tuple[TideConstituent, ...]
    u_amplitudes: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "constituents", tuple(self.constituents))
        object.__setattr__(self, "u_amplitudes", tuple(float(u) for u in self.u_amplitudes))
        if not self.constituents:
            raise ConfigurationError("boundary needs at least one tidal constituent")
        if len(self.u_amplitudes) != len(self.constituents):
            raise ConfigurationError("one velocity amplitude per constituent is required")
        if any(u < 0 for u in self.u_amplitudes):
            raise ConfigurationError("velocity amplitudes must be >= 0")


@dataclass(frozen=True)
class StationConfig:
    id: int
    name: str
    distance: float  # m from the marine boundary
    depth: float  # m, mean depth along the path
    zone: int  # friction zone 1..6

    def __post_init__(self):
        if not self.distance >= 0:
            raise ConfigurationError(f"station {self.name}: distance must be >= 0")
        if not self.depth > 0:
            raise ConfigurationError(f"station {self.name}: depth must be > 0")
        if self.zone not in range(1, N_ZONES + 1):
            raise ConfigurationError(f"station {self.name}: zone must be in 1..{N_ZONES}")

    @property
    def lag(self) -> float:
        """Travel time of the tidal wave from the boundary, in seconds."""
        return self.distance / math.sqrt(GRAVITY * self.depth)


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("time step must be > 0")
        if self.n < 1:
            raise ConfigurationError("time grid must be nonempty")

    @classmethod
    def from_duration(cls, t0: float, dt: float, duration: float) -> "TimeGrid":
        return cls(t0, dt, int(round(duration / dt)) + 1)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    t0: float
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.dt > 0:
            raise InvalidInputError("time step must be > 0")
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise InvalidInputError("time series values must be a finite 1-D array")

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))


def _as_params(params) -> ParameterVector:
    if isinstance(params, ParameterVector):
        return params
    return ParameterVector.from_array(params)


def damping_exponent(params, boundary: BoundaryConfig, station: StationConfig, c_damp: float) -> np.ndarray:
    """Per-constituent friction exponent ``mu`` for one station."""
    p = _as_params(params)
    ks = p.strickler(station.zone)
    u = p.beta * np.asarray(boundary.u_amplitudes)
    return c_damp * station.distance * u / (ks**2 * station.depth ** (4.0 / 3.0))


def _station_level(alpha, gamma, boundary, weights, lag, t):
    # Constituents are summed in declaration order so that a zero-distance
    # station reproduces the boundary signal bit for bit.
    tide = 0.0
    for con, w in zip(boundary.constituents, weights):
        tide = tide + w * np.cos(con.argument(t - lag))
    return alpha * tide + boundary.z_mean + gamma


def _boundary_weights(boundary):
    return [con.nodal_factor * con.amplitude for con in boundary.constituents]


def boundary_level(params, boundary: BoundaryConfig, t):
    """Free-surface elevation at the marine boundary.

    Accepts a scalar time or an array of times.  Raises
    :class:`DegenerateConfigurationError` if the implied water depth
    ``eta - z_f`` is not positive at any requested time.
    """
    p = _as_params(params)
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise InvalidInputError("time must be finite")
    eta = _station_level(p.alpha, p.gamma, boundary, _boundary_weights(boundary), 0.0, t_arr)
    _check_depth(eta, boundary, t_arr)
    return float(eta) if np.ndim(eta) == 0 else eta


def _check_depth(eta, boundary, t):
    depth = np.asarray(eta) - boundary.z_f
    bad = np.flatnonzero(np.atleast_1d(depth <= 0))
    if bad.size:
        when = float(np.atleast_1d(t)[bad[0]])
        raise DegenerateConfigurationError(f"non-positive water depth at the boundary at t={when:g} s", time=when)


def propagate_to_station(params, boundary: BoundaryConfig, station: StationConfig, grid: TimeGrid,
                         c_damp: float = 1.0) -> TimeSeries:
    p = _as_params(params)
    t = grid.times
    _check_depth(boundary_level(p, boundary, t), boundary, t)
    if station.distance == 0:
        weights = _boundary_weights(boundary)
        lag = 0.0
    else:
        factors = np.exp(-damping_exponent(p, boundary, station, c_damp))
        weights = [w * f for w, f in zip(_boundary_weights(boundary), factors)]
        lag = station.lag
    eta = _station_level(p.alpha, p.gamma, boundary, weights, lag, t)
    return TimeSeries(grid.t0, grid.dt, eta)


def simulate(params, boundary: BoundaryConfig, stations: Sequence[StationConfig], grid: TimeGrid,
             c_damp: float = 1.0) -> list[TimeSeries]:
    """Water-level series at every station, in station order."""
    return [propagate_to_station(params, boundary, s, grid, c_damp) for s in stations]


@dataclass(frozen=True)
class StationDiscrepancy:
    """Signal present in a station's observations that the model cannot produce.

    ``offset`` is a constant level shift (e.g. river set-up) and each harmonic
    is ``(amplitude, period, phase)`` in meters, seconds and radians.
    """

    offset: float = 0.0
    harmonics: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple(tuple(float(v) for v in h) for h in self.harmonics))
        if any(len(h) != 3 or h[1] <= 0 for h in self.harmonics):
            raise ConfigurationError("discrepancy harmonics are (amplitude, period > 0, phase) triples")

    def signal(self, t) -> np.ndarray:
        out = np.full(np.shape(t), self.offset, dtype=float)
        for amp, period, phase in self.harmonics:
            out = out + amp * np.cos(2.0 * np.pi * np.asarray(t) / period - phase)
        return out


def synthesize_observations(true_params, boundary: BoundaryConfig, stations: Sequence[StationConfig],
                            grid: TimeGrid, noise_sigma: float, seed: int, c_damp: float = 1.0,
                            discrepancy: Sequence[StationDiscrepancy] | None = None) -> list[TimeSeries]:
    """Simulated levels plus i.i.d. Gaussian noise, reproducible under ``seed``.

    When ``discrepancy`` is given (one entry per station) its signal is added
    before the noise, standing in for physics the model leaves out.
    """
    if not noise_sigma >= 0:
        raise InvalidInputError("noise_sigma must be >= 0")
    clean = simulate(true_params, boundary, stations, grid, c_damp)
    if discrepancy is not None:
        if len(discrepancy) != len(stations):
            raise ConfigurationError("one discrepancy entry per station is required")
        clean = [TimeSeries(s.t0, s.dt, s.values + d.signal(s.times)) for s, d in zip(clean, discrepancy)]
    if noise_sigma == 0:
        return clean
    rng = np.random.default_rng(seed)
    return [TimeSeries(s.t0, s.dt, s.values + rng.normal(0.0, noise_sigma, len(s))) for s in clean]


class ForwardModel:
    """Vectorized evaluator of station levels and RMSE for batches of parameters.

    Everything that does not depend on the parameters (constituent cosines at
    every station and time) is computed once.  Instances are immutable after
    construction and safe to share between threads.
    """

    def __init__(self, boundary: BoundaryConfig, stations: Sequence[StationConfig], grid: TimeGrid,
                 c_damp: float, observations: Sequence[TimeSeries] | None = None):
        self.boundary = boundary
        self.stations = tuple(stations)
        self.grid = grid
        self.c_damp = float(c_damp)
        t = grid.times
        self._basis = np.stack([
            np.stack([np.cos(con.argument(t - (s.lag if s.distance else 0.0))) for con in boundary.constituents])
            for s in self.stations
        ])  # (Ns, Nc, Nt)
        self._amp = np.array(_boundary_weights(boundary))
        self._u = np.array(boundary.u_amplitudes)
        self._dist = np.array([s.distance for s in self.stations])
        self._depth = np.array([s.depth for s in self.stations])
        self._zone = np.array([s.zone for s in self.stations]) - 1
        boundary_tide = sum(w * np.cos(con.argument(t)) for con, w in zip(boundary.constituents, self._amp))
        self._tide_min = float(np.min(boundary_tide))
        self._obs = None
        if observations is not None:
            if len(observations) != len(self.stations):
                raise InvalidInputError("one observation series per station is required")
            self._obs = np.stack([o.values for o in observations])
            if self._obs.shape[1] != grid.n:
                raise InvalidInputError("observations are not aligned with the time grid")
        for arr in (self._basis, self._amp, self._u, self._dist, self._depth, self._zone):
            arr.setflags(write=False)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    def levels(self, X) -> np.ndarray:
        """Station levels, shape ``(m, Ns, Nt)`` for an ``(m, 9)`` batch."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        alpha, beta, gamma = X[:, 0], X[:, 1], X[:, 2]
        ks = X[:, 3:][:, self._zone]  # (m, Ns)
        depth_min = alpha * self._tide_min + self.boundary.z_mean + gamma - self.boundary.z_f
        if np.any(depth_min <= 0):
            row = int(np.flatnonzero(depth_min <= 0)[0])
            raise DegenerateConfigurationError(f"non-positive water depth at the boundary for batch row {row}")
        scale = self.c_damp * self._dist / self._depth ** (4.0 / 3.0)  # (Ns,)
        mu = (scale / ks**2)[:, :, None] * (beta[:, None, None] * self._u[None, None, :])
        weights = alpha[:, None, None] * self._amp * np.exp(-mu)  # (m, Ns, Nc)
        tide = np.einsum("msc,sct->mst", weights, self._basis)
        return tide + (self.boundary.z_mean + gamma)[:, None, None]

    def station_rmse(self, X, chunk: int = 128) -> np.ndarray:
        """Per-station RMSE against the stored observations, shape ``(m, Ns)``."""
        if self._obs is None:
            raise InvalidInputError("forward model was built without observations")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], self.n_stations))
        for start in range(0, X.shape[0], chunk):
            lv = self.levels(X[start:start + chunk])
            out[start:start + chunk] = np.sqrt(np.mean((lv - self._obs) ** 2, axis=-1))
        return out
