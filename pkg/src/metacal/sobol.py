"""Variance-based sensitivity analysis by pick-freeze Monte Carlo.

Two independent uniform sample matrices ``A`` and ``B`` are drawn on the
parameter box.  For each input ``i`` the hybrid ``AB_i`` takes column ``i``
from ``B`` and every other column from ``A``.  With ``V`` the output variance:

* first order (Saltelli 2010):  V_i  = mean(f(B) * (f(AB_i) - f(A)))
* total       (Jansen 1999):    VT_i = mean((f(A) - f(AB_i))**2) / 2
* second order: the pair hybrid ``AB_ij`` takes columns ``i`` and ``j`` from
  ``B``; its closed index Vc_ij = mean(f(B) * (f(AB_ij) - f(A))) gives
  V_ij = Vc_ij - V_i - V_j.

Small negative estimates are reported unclamped.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._batch import check_finite, evaluate_batch
from .errors import InvalidInputError
from .estuary import ParameterBounds

ESTIMATOR = "saltelli2010-first/jansen1999-total"
MIN_SAMPLES = 128


def tolerance(n_mc: int) -> float:
    """Monte Carlo tolerance used by the index sanity checks."""
    return 4.0 / math.sqrt(n_mc)


@dataclass(frozen=True, eq=False)
class SobolResult:
    names: tuple[str, ...]
    first: np.ndarray = field(repr=False)
    total: np.ndarray = field(repr=False)
    second: np.ndarray | None = field(default=None, repr=False)
    n_mc: int = 0
    seed: int | None = None
    estimator: str = ESTIMATOR
    variance: float = float("nan")
    n_evals: int = 0

    @property
    def tau(self) -> float:
        return tolerance(self.n_mc)

    def table(self) -> dict[str, tuple[float, float]]:
        return {n: (float(s), float(t)) for n, s, t in zip(self.names, self.first, self.total)}


def _draw(bounds: ParameterBounds, n_mc: int, seed):
    rng = np.random.default_rng(seed)
    A = bounds.from_unit(rng.random((n_mc, bounds.dim)))
    B = bounds.from_unit(rng.random((n_mc, bounds.dim)))
    return A, B


def sobol_indices(f, bounds: ParameterBounds, n_mc: int = 4096, seed=None, with_second_order: bool = False,
                  vectorized: bool = False, workers: int = 1) -> SobolResult:
    """First-order and total Sobol indices of ``f`` under uniform inputs on ``bounds``.

    Parameters
    ----------
    f : callable
        Scalar function of a parameter vector, or an objective with a
        ``batch`` method, or (with ``vectorized=True``) a function mapping an
        ``(m, d)`` array to ``(m,)`` values.
    n_mc : int
        Rows in each base matrix; ``n_mc * (d + 2)`` evaluations are made,
        plus ``n_mc * d * (d - 1) / 2`` for the second-order pairs.
    workers : int
        Pick-freeze blocks are evaluated on this many threads; results are
        combined in block order, so the output does not depend on it.
    """
    if n_mc < MIN_SAMPLES:
        raise InvalidInputError(f"n_mc must be >= {MIN_SAMPLES}, got {n_mc}")
    d = bounds.dim
    A, B = _draw(bounds, n_mc, seed)

    blocks = [("A", A), ("B", B)]
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        blocks.append((f"AB_{bounds.names[i]}", ABi))
    pairs = list(itertools.combinations(range(d), 2)) if with_second_order else []
    for i, j in pairs:
        ABij = A.copy()
        ABij[:, [i, j]] = B[:, [i, j]]
        blocks.append((f"AB_{bounds.names[i]}_{bounds.names[j]}", ABij))

    def run(block):
        name, X = block
        return check_finite(evaluate_batch(f, X, vectorized), name)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(run, blocks))
    else:
        values = [run(b) for b in blocks]

    fA, fB = values[0], values[1]
    fAB = values[2:2 + d]
    var = float(np.var(np.concatenate([fA, fB])))
    if var == 0.0:
        zeros = np.zeros(d)
        second = np.full((d, d), np.nan) if with_second_order else None
        if second is not None:
            for i, j in pairs:
                second[i, j] = 0.0
        return SobolResult(bounds.names, zeros, zeros.copy(), second, n_mc, seed, ESTIMATOR, 0.0,
                           n_mc * len(blocks))

    first = np.array([np.mean(fB * (fABi - fA)) for fABi in fAB]) / var
    total = np.array([0.5 * np.mean((fA - fABi) ** 2) for fABi in fAB]) / var
    second = None
    if with_second_order:
        second = np.full((d, d), np.nan)
        for (i, j), fABij in zip(pairs, values[2 + d:]):
            closed = np.mean(fB * (fABij - fA)) / var
            second[i, j] = closed - first[i] - first[j]
    return SobolResult(bounds.names, first, total, second, n_mc, seed, ESTIMATOR, var, n_mc * len(blocks))


@dataclass(frozen=True)
class Ranking:
    significant: tuple[tuple[str, float], ...]
    negligible: tuple[str, ...]
    threshold: float


def rank_parameters(result: SobolResult, threshold: float = 0.05) -> Ranking:
    """Parameters whose total index reaches ``threshold``, most influential first.

    The rest could be fixed at any value in their range without changing the
    output variance appreciably.
    """
    order = np.argsort(-result.total, kind="stable")
    sig = tuple((result.names[i], float(result.total[i])) for i in order if result.total[i] >= threshold)
    rest = tuple(result.names[i] for i in range(len(result.names)) if result.total[i] < threshold)
    return Ranking(sig, rest, threshold)


def write_sobol_csv(path, result: SobolResult) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_mc={result.n_mc}\n# seed={result.seed}\n# estimator={result.estimator}\n")
        w = csv.writer(fh)
        header = ["parameter", "S_first", "S_total"]
        if result.second is not None:
            header += [f"S2_{n}" for n in result.names]
        w.writerow(header)
        for i, name in enumerate(result.names):
            row = [name, repr(float(result.first[i])), repr(float(result.total[i]))]
            if result.second is not None:
                row += ["" if np.isnan(v) else repr(float(v)) for v in result.second[i]]
            w.writerow(row)
