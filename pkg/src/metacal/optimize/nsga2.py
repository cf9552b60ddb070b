"""NSGA-II: elitist multi-objective search with fast nondominated sorting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, InvalidInputError
from ..estuary import PARAMETER_NAMES, ParameterBounds
from ._run import evaluate_rows


@dataclass(frozen=True)
class NSGA2Config:
    pop: int = 100
    gens: int = 150
    crossover_p: float = 0.9
    crossover_eta: float = 15.0
    mutation_p: float | None = None  # defaults to 1/d
    mutation_eta: float = 20.0
    seed: int | None = 0

    def __post_init__(self):
        if self.pop < 8 or self.pop % 2:
            raise ConfigurationError(f"population must be even and >= 8, got {self.pop}")
        if self.gens < 0:
            raise ConfigurationError("gens must be >= 0")


def dominates(a, b) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def _dominance_matrix(F: np.ndarray) -> np.ndarray:
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_sort(F) -> list[list[int]]:
    """Partition row indices of ``F`` (n, k) into successive nondominated fronts."""
    try:
        F = np.array(F, dtype=float, ndmin=2)
    except ValueError as exc:
        raise InvalidInputError(f"objective vectors must share one length: {exc}") from exc
    if F.ndim != 2:
        raise InvalidInputError("objective vectors must share one length")
    if not np.isfinite(F).all():
        raise InvalidInputError("objective vectors must be finite")
    n = len(F)
    if n == 0 or F.shape[1] == 0:
        return [] if n == 0 else [list(range(n))]
    dom = _dominance_matrix(F)
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append([int(i) for i in current])
        remaining[current] = False
        count = count - dom[current].sum(axis=0)
        current = np.flatnonzero(remaining & (count == 0))
    return fronts


def crowding_distance(F) -> np.ndarray:
    """Normalized perimeter of the cuboid around each point of one front."""
    F = np.asarray(F, dtype=float)
    n, k = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(k):
        order = np.argsort(F[:, m], kind="stable")
        col = F[order, m]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def _rank_and_crowd(F):
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    fronts = nondominated_sort(F)
    for r, front in enumerate(fronts):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return fronts, rank, crowd


def _tournament(rng, rank, crowd, n):
    a = rng.integers(0, len(rank), n)
    b = rng.integers(0, len(rank), n)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] > crowd[b]))
    tie = (rank[a] == rank[b]) & (crowd[a] == crowd[b])
    coin = rng.random(n) < 0.5
    return np.where(a_wins | (tie & coin), a, b)


def _sbx(rng, p1, p2, eta, prob):
    """Simulated binary crossover on the unit cube, bounded variant."""
    n, d = p1.shape
    c1, c2 = p1.copy(), p2.copy()
    do_pair = rng.random(n) < prob
    u = rng.random((n, d))
    swap_var = rng.random((n, d)) < 0.5
    mix = (rng.random((n, d)) < 0.5) & do_pair[:, None] & (np.abs(p1 - p2) > 1e-14)
    y1, y2 = np.minimum(p1, p2), np.maximum(p1, p2)
    gap = np.where(mix, y2 - y1, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        def betaq(beta):
            alpha = 2.0 - beta ** -(eta + 1.0)
            return np.where(u <= 1.0 / alpha, (u * alpha) ** (1.0 / (eta + 1.0)),
                            (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0)))
        b1 = betaq(1.0 + 2.0 * y1 / gap)
        b2 = betaq(1.0 + 2.0 * (1.0 - y2) / gap)
    k1 = np.clip(0.5 * ((y1 + y2) - b1 * gap), 0.0, 1.0)
    k2 = np.clip(0.5 * ((y1 + y2) + b2 * gap), 0.0, 1.0)
    first = np.where(swap_var, k2, k1)
    second = np.where(swap_var, k1, k2)
    c1 = np.where(mix, first, c1)
    c2 = np.where(mix, second, c2)
    return c1, c2


def _mutate(rng, z, eta, prob):
    """Polynomial mutation on the unit cube, bounded variant."""
    hit = rng.random(z.shape) < prob
    u = rng.random(z.shape)
    p = 1.0 / (eta + 1.0)
    lo_side = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - z) ** (eta + 1.0)
    hi_side = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * z ** (eta + 1.0)
    delta = np.where(u < 0.5, lo_side ** p - 1.0, 1.0 - hi_side ** p)
    return np.where(hit, np.clip(z + delta, 0.0, 1.0), z)


@dataclass(frozen=True, eq=False)
class ParetoFront:
    X: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    labels: tuple[str, ...]
    names: tuple[str, ...] = PARAMETER_NAMES

    def __len__(self) -> int:
        return len(self.F)

    def is_mutually_nondominated(self) -> bool:
        return not _dominance_matrix(self.F).any()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f{i + 1}" for i in range(self.F.shape[1])] + list(self.names))
            for f, x in zip(self.F, self.X):
                w.writerow([repr(float(v)) for v in f] + [repr(float(v)) for v in x])


def _evaluate(objectives, X, vectorized, gen):
    return np.column_stack([evaluate_rows(f, X, vectorized, gen, "generation") for f in objectives])


def nsga2(objectives: Sequence, bounds: ParameterBounds, config: NSGA2Config = NSGA2Config(),
          vectorized: bool = False, labels=None) -> ParetoFront:
    """Approximate the Pareto front of ``objectives`` (all minimized) over ``bounds``.

    Each objective is a scalar function of a parameter vector, an objective
    with a ``batch`` method, or (``vectorized=True``) a row-wise array
    function.  The returned front is the first nondominated layer of the
    final population, ordered by the first objective.
    """
    objectives = list(objectives)
    if not objectives:
        raise ConfigurationError("nsga2 needs at least one objective")
    labels = tuple(labels) if labels else tuple(getattr(f, "label", f"f{i + 1}") for i, f in enumerate(objectives))
    rng = np.random.default_rng(config.seed)
    d, n = bounds.dim, config.pop
    pm = config.mutation_p if config.mutation_p is not None else 1.0 / d

    def phys(Z):
        return bounds.clip(bounds.from_unit(Z))

    Z = rng.random((n, d))
    F = _evaluate(objectives, phys(Z), vectorized, 0)
    _, rank, crowd = _rank_and_crowd(F)
    for gen in range(1, config.gens + 1):
        parents = _tournament(rng, rank, crowd, n)
        c1, c2 = _sbx(rng, Z[parents[0::2]], Z[parents[1::2]], config.crossover_eta, config.crossover_p)
        kids = _mutate(rng, np.vstack([c1, c2]), config.mutation_eta, pm)
        Fk = _evaluate(objectives, phys(kids), vectorized, gen)
        Zall, Fall = np.vstack([Z, kids]), np.vstack([F, Fk])
        fronts, rank_all, crowd_all = _rank_and_crowd(Fall)
        keep = []
        for front in fronts:
            if len(keep) + len(front) <= n:
                keep.extend(front)
            else:
                front = np.array(front)
                order = np.argsort(-crowd_all[front], kind="stable")
                keep.extend(front[order[: n - len(keep)]].tolist())
                break
        keep = np.array(keep)
        Z, F, rank, crowd = Zall[keep], Fall[keep], rank_all[keep], crowd_all[keep]

    first = np.flatnonzero(rank == 0)
    first = first[np.lexsort(F[first].T[::-1])]
    names = bounds.names
    return ParetoFront(phys(Z[first]), F[first], labels, names)
