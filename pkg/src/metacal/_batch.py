"""Helpers for evaluating objectives on batches of points."""

from __future__ import annotations

import numpy as np

from .errors import EvaluationError


def evaluate_batch(f, X: np.ndarray, vectorized: bool = False) -> np.ndarray:
    """Evaluate ``f`` on each row of ``X``.

    Objects exposing a ``batch`` method (the objectives built by
    :mod:`metacal.optimize.objectives`) are called once on the whole array, as
    are plain callables flagged ``vectorized``.
    """
    X = np.atleast_2d(X)
    if hasattr(f, "batch"):
        out = np.asarray(f.batch(X), dtype=float)
    elif vectorized:
        out = np.asarray(f(X), dtype=float)
    else:
        out = np.array([f(x) for x in X], dtype=float)
    return out


def check_finite(values: np.ndarray, what: str) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(values.reshape(values.shape[0], -1)).all(axis=1))
    if bad.size:
        raise EvaluationError(f"non-finite objective value at {what} sample {int(bad[0])}", index=int(bad[0]))
    return values
