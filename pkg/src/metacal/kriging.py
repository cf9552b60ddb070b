"""Kriging (trend + stationary Gaussian process) metamodel of per-station errors.

Each station gets its own model

    y(x) = g(x)^T lam + Z(x),    cov[Z(x), Z(x')] = sigma2 * R(x, x'; theta)

with a constant or linear trend ``g``, an anisotropic Matern 5/2 or squared
exponential correlation ``R`` and correlation lengths ``theta`` chosen by
maximizing the profiled log likelihood.  Given ``theta``, ``lam`` is the
generalized least squares estimate and ``sigma2`` its closed-form profile.

Inputs are rescaled to the unit cube using the parameter bounds before any
kernel evaluation; ``theta`` is therefore expressed in unit-cube lengths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, qr, solve_triangular
from scipy.optimize import minimize

from .doe import ErrorTable, lhs_unit
from .errors import ConditioningError, IllPosedDesignError, IntegrityError, InvalidInputError
from .estuary import ParameterBounds, ParameterVector

KERNELS = ("matern52", "sqexp")
BASES = ("constant", "linear")
MODEL_FORMAT = "metacal.kriging"
MODEL_VERSION = 1

_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class KrigingConfig:
    kernel: str = "matern52"
    basis: str = "constant"
    nugget: float = 1e-10
    max_nugget: float = 1e-4
    restarts: int = 8
    seed: int = 0
    theta_bounds: tuple[float, float] = (0.05, 10.0)

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InvalidInputError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.basis not in BASES:
            raise InvalidInputError(f"unknown basis {self.basis!r}; expected one of {BASES}")
        if not 0 <= self.nugget <= self.max_nugget:
            raise InvalidInputError("nugget must satisfy 0 <= nugget <= max_nugget")
        if self.restarts < 1:
            raise InvalidInputError("at least one restart is required")
        lo, hi = self.theta_bounds
        if not 0 < lo < hi:
            raise InvalidInputError("theta bounds must satisfy 0 < lo < hi")


def correlation(kernel: str, scaled_dist: np.ndarray) -> np.ndarray:
    """Correlation as a function of the theta-scaled Euclidean distance."""
    r = scaled_dist
    if kernel == "matern52":
        sr = _SQRT5 * r
        return (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)
    if kernel == "sqexp":
        return np.exp(-0.5 * r * r)
    raise InvalidInputError(f"unknown kernel {kernel!r}")


def _scaled_dist(a: np.ndarray, b: np.ndarray, theta: np.ndarray) -> np.ndarray:
    diff = (a[:, None, :] - b[None, :, :]) / theta
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _basis_matrix(basis: str, u: np.ndarray) -> np.ndarray:
    ones = np.ones((u.shape[0], 1))
    return ones if basis == "constant" else np.hstack([ones, u])


def _chol_with_jitter(R: np.ndarray, nugget: float, max_nugget: float):
    """Cholesky of ``R + nugget I``, escalating the nugget tenfold on failure."""
    n = R.shape[0]
    eye = np.eye(n)
    while True:
        try:
            return cholesky(R + nugget * eye, lower=True, check_finite=False), nugget
        except np.linalg.LinAlgError:
            if nugget >= max_nugget:
                return None, nugget
            nugget = min(max(nugget * 10.0, 1e-12), max_nugget)


@dataclass
class _GLS:
    chol: np.ndarray
    nugget: float
    trend: np.ndarray
    sigma2: float
    weights: np.ndarray
    loglik: float


def _gls(R, F, y, nugget, max_nugget) -> _GLS | None:
    L, nugget = _chol_with_jitter(R, nugget, max_nugget)
    if L is None:
        return None
    n = len(y)
    Ft = solve_triangular(L, F, lower=True, check_finite=False)
    yt = solve_triangular(L, y, lower=True, check_finite=False)
    Q, Rf = qr(Ft, mode="economic", check_finite=False)
    trend = solve_triangular(Rf, Q.T @ yt, check_finite=False)
    et = yt - Ft @ trend
    sigma2 = float(et @ et) / n
    weights = solve_triangular(L, et, lower=True, trans="T", check_finite=False)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    loglik = -0.5 * (n * math.log(max(sigma2, 1e-300)) + logdet)
    return _GLS(L, nugget, trend, sigma2, weights, loglik)


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float
    extrapolated: bool = False


@dataclass(frozen=True, eq=False)
class KrigingModel:
    """A fitted per-station Kriging surrogate.

    All arrays are stored in physical response units (meters for RMSE): the
    trend coefficients act on the basis evaluated at unit-cube inputs and
    ``dual_weights`` multiply the correlation vector.  ``search_trace`` holds
    ``(start, end)`` log likelihoods of each hyperparameter restart.
    """

    kernel: str
    basis: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    X_train: np.ndarray = field(repr=False)
    y_train: np.ndarray = field(repr=False)
    trend_coeffs: np.ndarray = field(repr=False)
    process_variance: float = 0.0
    corr_lengths: np.ndarray = field(default=None, repr=False)
    dual_weights: np.ndarray = field(default=None, repr=False)
    chol: np.ndarray = field(default=None, repr=False)
    nugget: float = 0.0
    log_likelihood: float = float("nan")
    station_id: int | None = None
    seed: int | None = None
    search_trace: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        for name in ("X_train", "y_train", "trend_coeffs", "corr_lengths", "dual_weights", "chol"):
            arr = np.array(getattr(self, name), dtype=float, order="C")  # one layout, one rounding path
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        F = _basis_matrix(self.basis, self.X_train)
        Ft = solve_triangular(self.chol, F, lower=True, check_finite=False)
        _, Rf = qr(Ft, mode="economic", check_finite=False)
        object.__setattr__(self, "_Ft", Ft)
        object.__setattr__(self, "_Rf", Rf)

    @property
    def bounds(self) -> ParameterBounds:
        return ParameterBounds(self.lower, self.upper)

    @property
    def dim(self) -> int:
        return self.X_train.shape[1]

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]

    def _unit(self, X) -> np.ndarray:
        X = np.asarray(X.to_array() if isinstance(X, ParameterVector) else X, dtype=float)
        X = np.atleast_2d(X)
        return (X - np.asarray(self.lower)) / (np.asarray(self.upper) - np.asarray(self.lower))

    def _corr(self, U) -> np.ndarray:
        return correlation(self.kernel, _scaled_dist(U, self.X_train, self.corr_lengths))

    def predict_mean(self, X) -> np.ndarray:
        """Vectorized predictor mean for an ``(m, d)`` batch."""
        U = self._unit(X)
        return _basis_matrix(self.basis, U) @ self.trend_coeffs + self._corr(U) @ self.dual_weights

    def predict_variance(self, X) -> np.ndarray:
        U = self._unit(X)
        r = self._corr(U)
        v = solve_triangular(self.chol, r.T, lower=True, check_finite=False)  # (n, m)
        u = self._Ft.T @ v - _basis_matrix(self.basis, U).T  # (p, m)
        w = solve_triangular(self._Rf, u, trans="T", check_finite=False)
        s2 = self.process_variance * (1.0 - np.sum(v * v, axis=0) + np.sum(w * w, axis=0))
        return np.maximum(s2, 0.0)

    def predict(self, x) -> Prediction:
        U = self._unit(x)
        if U.shape[0] != 1:
            raise InvalidInputError("predict takes a single point; use predict_mean for batches")
        extrapolated = bool(np.any(U < -1e-12) or np.any(U > 1 + 1e-12))
        return Prediction(float(self.predict_mean(x)[0]), float(self.predict_variance(x)[0]), extrapolated)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "station_id": self.station_id,
            "seed": self.seed,
            "kernel": self.kernel,
            "basis": self.basis,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
            "trend_coeffs": self.trend_coeffs.tolist(),
            "process_variance": self.process_variance,
            "corr_lengths": self.corr_lengths.tolist(),
            "dual_weights": self.dual_weights.tolist(),
            "chol": self.chol.tolist(),
            "nugget": self.nugget,
            "log_likelihood": self.log_likelihood,
            "search_trace": [list(t) for t in self.search_trace],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KrigingModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise IntegrityError(f"not a version {MODEL_VERSION} kriging model document")
        try:
            return cls(
                kernel=d["kernel"], basis=d["basis"], lower=tuple(d["lower"]), upper=tuple(d["upper"]),
                X_train=d["X_train"], y_train=d["y_train"], trend_coeffs=d["trend_coeffs"],
                process_variance=float(d["process_variance"]), corr_lengths=d["corr_lengths"],
                dual_weights=d["dual_weights"], chol=d["chol"], nugget=float(d["nugget"]),
                log_likelihood=float(d["log_likelihood"]), station_id=d["station_id"], seed=d["seed"],
                search_trace=tuple(tuple(t) for t in d["search_trace"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrityError(f"malformed kriging model document: {exc!r}") from exc

    def dumps(self) -> str:
        # json writes floats with repr(), which round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "KrigingModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise IntegrityError(f"kriging model document is not valid JSON: {exc}") from exc


def fit_xy(X, y, bounds: ParameterBounds, config: KrigingConfig = KrigingConfig(),
           station_id: int | None = None) -> KrigingModel:
    """Fit a Kriging model to raw inputs ``X`` (physical units) and responses ``y``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if d != bounds.dim:
        raise InvalidInputError(f"inputs have {d} columns, bounds have {bounds.dim}")
    if y.shape != (n,) or not np.all(np.isfinite(y)):
        raise InvalidInputError("responses must be a finite vector with one entry per row")
    if n < d + 2:
        raise IllPosedDesignError(f"need at least d+2={d + 2} training rows, got {n}")
    if len(np.unique(X, axis=0)) != n:
        raise IllPosedDesignError("training design contains duplicate rows")
    U = bounds.to_unit(X)
    F = _basis_matrix(config.basis, U)
    diffs = U[:, None, :] - U[None, :, :]
    sq = diffs * diffs  # (n, n, d)

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    constant = y_std == 0.0
    ys = (y - y_mean) / (y_std if not constant else 1.0)

    def corr_matrix(log_theta):
        theta = np.exp(log_theta)
        return correlation(config.kernel, np.sqrt(sq @ (1.0 / theta**2)))

    def neg_ll(log_theta):
        g = _gls(corr_matrix(log_theta), F, ys, config.nugget, config.max_nugget)
        return np.inf if g is None else -g.loglik

    log_lo, log_hi = math.log(config.theta_bounds[0]), math.log(config.theta_bounds[1])
    starts = log_lo + lhs_unit(config.restarts, d, np.random.default_rng(config.seed)) * (log_hi - log_lo)
    trace = []
    best_x, best_f = starts[0], np.inf
    if constant:
        # the trend absorbs a constant response; the likelihood carries no information on theta
        best_x = np.full(d, 0.5 * (log_lo + log_hi))
        trace.append((-neg_ll(best_x), -neg_ll(best_x)))
    else:
        for x0 in starts:
            f0 = neg_ll(x0)
            if not np.isfinite(f0):
                continue  # unusable start: no factorization even at the largest nugget
            res = minimize(neg_ll, x0, method="Powell", bounds=[(log_lo, log_hi)] * d,
                           options={"xtol": 1e-3, "ftol": 1e-8, "maxfev": 200 * d})
            xr, fr = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
            trace.append((-f0, -fr))
            if fr < best_f:
                best_x, best_f = xr, fr
        if not np.isfinite(best_f):
            raise ConditioningError(
                f"correlation matrix not positive definite even with nugget {config.max_nugget:g}")

    g = _gls(corr_matrix(best_x), F, y, config.nugget, config.max_nugget)
    if g is None:
        raise ConditioningError(f"correlation matrix not positive definite even with nugget {config.max_nugget:g}")
    gs = _gls(corr_matrix(best_x), F, ys, config.nugget, config.max_nugget)
    return KrigingModel(
        kernel=config.kernel,
        basis=config.basis,
        lower=bounds.lower,
        upper=bounds.upper,
        X_train=U,
        y_train=y,
        trend_coeffs=g.trend,
        process_variance=max(g.sigma2, np.finfo(float).tiny),
        corr_lengths=np.exp(best_x),
        dual_weights=g.weights,
        chol=g.chol,
        nugget=g.nugget,
        log_likelihood=gs.loglik,
        station_id=station_id,
        seed=config.seed,
        search_trace=tuple(trace),
    )


def fit(table: ErrorTable, station: int, config: KrigingConfig = KrigingConfig()) -> KrigingModel:
    """Fit the surrogate of one station's RMSE column (``station`` is a column index)."""
    if not 0 <= station < table.n_stations:
        raise InvalidInputError(f"station index {station} out of range")
    return fit_xy(table.design.points, table.column(station), table.design.bounds, config,
                  station_id=table.station_ids[station])


def fit_all(table: ErrorTable, config: KrigingConfig = KrigingConfig()) -> list[KrigingModel]:
    return [fit(table, s, config) for s in range(table.n_stations)]


def predict(model: KrigingModel, x) -> Prediction:
    return model.predict(x)


def predict_all(models: Sequence[KrigingModel], x) -> np.ndarray:
    """Per-station surrogate RMSE, clamped at zero.

    ``x`` may be one point (returns shape ``(Ns,)``) or a batch ``(m, d)``
    (returns ``(m, Ns)``).
    """
    if not models:
        raise InvalidInputError("no models")
    first = models[0]
    if any(m.lower != first.lower or m.upper != first.upper for m in models[1:]):
        raise InvalidInputError("station models do not share bounds")
    arr = np.asarray(x.to_array() if isinstance(x, ParameterVector) else x, dtype=float)
    out = np.column_stack([m.predict_mean(arr) for m in models])
    out = np.maximum(out, 0.0)
    return out[0] if arr.ndim == 1 else out


@dataclass(frozen=True, eq=False)
class ValidationReport:
    mse: float
    r2: float
    n_test: int
    residuals: np.ndarray = field(repr=False)
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "residuals", np.asarray(self.residuals, dtype=float))


def validation_report(predicted, observed) -> ValidationReport:
    """MSE and coefficient of determination of ``predicted`` against ``observed``.

    ``r2`` is NaN and ``degenerate`` is set when the observed values are constant.
    """
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if o.size == 0:
        raise InvalidInputError("empty test set")
    res = o - p
    sse = float(np.sum(res**2))
    sst = float(np.sum((o - o.mean()) ** 2))
    if sst == 0.0:
        return ValidationReport(sse / o.size, float("nan"), o.size, res, degenerate=True)
    return ValidationReport(sse / o.size, 1.0 - sse / sst, o.size, res)


def validate(model: KrigingModel, test_table: ErrorTable, station: int) -> ValidationReport:
    """Out-of-sample check of one station model on held-out rows."""
    if len(test_table) == 0:
        raise InvalidInputError("empty test set")
    return validation_report(model.predict_mean(test_table.design.points), test_table.column(station))


def validate_mean(models: Sequence[KrigingModel], test_table: ErrorTable) -> ValidationReport:
    """Out-of-sample check of the station-averaged surrogate against the averaged test responses."""
    if len(test_table) == 0:
        raise InvalidInputError("empty test set")
    pred = predict_all(models, test_table.design.points).mean(axis=1)
    return validation_report(pred, test_table.mean_response())
