"""Distribution analysis of per-station error tables: PCA and quantile summaries."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .doe import ErrorTable
from .errors import DegenerateMetricError, InvalidInputError

STAT_NAMES = ("min", "q25", "median", "q75", "max", "mean")


@dataclass(frozen=True, eq=False)
class PCAResult:
    """Principal components of the standardized error table.

    Attributes
    ----------
    explained_ratio : (m,) share of total variance per component, descending.
    component_scores : (n, m) standardized rows projected on the components.
    loadings : (N_s, m) unit eigenvectors of the correlation matrix.
    correlations : (N_s, 2) correlation of each station's error with the
        first two component scores; the correlation-circle coordinates.
    """

    station_ids: tuple[int, ...]
    explained_ratio: np.ndarray = field(repr=False)
    component_scores: np.ndarray = field(repr=False)
    loadings: np.ndarray = field(repr=False)
    correlations: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)


def _standardize(Y: np.ndarray, station_ids) -> np.ndarray:
    mean = Y.mean(axis=0)
    std = Y.std(axis=0)
    for k, s in enumerate(std):
        if not s > 1e-14 * max(1.0, abs(mean[k])):
            raise DegenerateMetricError(f"station {station_ids[k]} has a constant error column")
    return (Y - mean) / std


def pca(table: ErrorTable) -> PCAResult:
    """Correlation-matrix PCA of the error table.

    Components are ordered by decreasing eigenvalue and each is signed so its
    largest-magnitude loading is positive (first such index on ties).
    """
    Y = np.asarray(table.responses, dtype=float)
    n, ns = Y.shape
    if n < 3 or ns < 2:
        raise InvalidInputError(f"PCA needs at least 3 rows and 2 stations, got {n}x{ns}")
    Z = _standardize(Y, table.station_ids)
    C = (Z.T @ Z) / n
    evals, evecs = np.linalg.eigh(C)
    order = np.argsort(-evals, kind="stable")
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    for j in range(ns):
        k = int(np.argmax(np.abs(evecs[:, j]) - 1e-12 * np.arange(ns)))  # tie: lowest index
        if evecs[k, j] < 0:
            evecs[:, j] = -evecs[:, j]
    scores = Z @ evecs
    ratio = evals / evals.sum()
    # corr(z_k, score_j) = v_kj * sqrt(lambda_j) for unit-variance columns
    corr = evecs[:, :2] * np.sqrt(evals[:2])
    return PCAResult(table.station_ids, ratio, scores, evecs, corr, evals)


def summary_stats(table: ErrorTable) -> dict[int, dict[str, float]]:
    """Box-plot statistics per station; quantiles interpolate linearly between order statistics."""
    Y = np.asarray(table.responses, dtype=float)
    if len(Y) < 1:
        raise InvalidInputError("summary statistics need at least one row")
    q = np.quantile(Y, [0.0, 0.25, 0.5, 0.75, 1.0], axis=0, method="linear")
    mean = Y.mean(axis=0)
    return {sid: dict(zip(STAT_NAMES, (*(float(v) for v in q[:, k]), float(mean[k]))))
            for k, sid in enumerate(table.station_ids)}


def write_explained_csv(path, result: PCAResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "eigenvalue", "explained_ratio"])
        for j, (lam, r) in enumerate(zip(result.eigenvalues, result.explained_ratio)):
            w.writerow([j + 1, repr(float(lam)), repr(float(r))])


def write_circle_csv(path, result: PCAResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station", "dim1", "dim2"])
        for sid, (a, b) in zip(result.station_ids, result.correlations):
            w.writerow([sid, repr(float(a)), repr(float(b))])


def write_stats_csv(path, stats: dict[int, dict[str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station", *STAT_NAMES])
        for sid, row in stats.items():
            w.writerow([sid, *(repr(row[k]) for k in STAT_NAMES)])


def write_scatter_csv(path, table: ErrorTable) -> None:
    """Long-format dump (point, station, value) for scatter-matrix plots."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "station", "value"])
        for i, row in enumerate(table.responses):
            for sid, v in zip(table.station_ids, row):
                w.writerow([i, sid, repr(float(v))])
