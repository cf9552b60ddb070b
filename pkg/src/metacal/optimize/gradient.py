"""Projected quasi-Newton descent for box-constrained problems.

The search runs in unit-cube coordinates.  Gradients come from central
differences (one-sided against a wall); variables pinned at a bound with the
gradient pushing outward are frozen for the step, and the BFGS inverse
Hessian acts on the free ones.  An Armijo backtracking search along the
projected path guarantees monotone progress.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..doe import lhs_unit
from ..errors import ConfigurationError, EvaluationError
from ..estuary import ParameterBounds
from ._run import OptimRun, evaluate_rows

_ARMIJO = 1e-4
_MAX_HALVINGS = 40


@dataclass(frozen=True)
class GradientConfig:
    max_iters: int = 200
    gtol: float = 1e-6
    fd_step: float = 1e-6  # relative to the box width
    seed: int | None = 0

    def __post_init__(self):
        if self.max_iters < 1 or self.gtol <= 0 or self.fd_step <= 0:
            raise ConfigurationError("gradient config needs max_iters >= 1 and positive gtol, fd_step")


class _UnitProblem:
    def __init__(self, f, bounds: ParameterBounds, vectorized: bool):
        self.f, self.bounds, self.vectorized = f, bounds, vectorized
        self.evals = 0
        self.iteration = 0

    def values(self, Z) -> np.ndarray:
        self.evals += len(Z)
        X = self.bounds.clip(self.bounds.from_unit(Z))
        return evaluate_rows(self.f, X, self.vectorized, self.iteration)

    def grad(self, z, h) -> np.ndarray:
        d = z.size
        zp = np.tile(z, (d, 1))
        zm = zp.copy()
        idx = np.arange(d)
        zp[idx, idx] = np.minimum(z + h, 1.0)
        zm[idx, idx] = np.maximum(z - h, 0.0)
        v = self.values(np.vstack([zp, zm]))
        return (v[:d] - v[d:]) / (zp[idx, idx] - zm[idx, idx])


def _projected_gradient(z, g):
    return z - np.clip(z - g, 0.0, 1.0)


def _descend(prob: _UnitProblem, z0: np.ndarray, config: GradientConfig):
    d = z0.size
    z = np.clip(z0, 0.0, 1.0)
    fz = prob.values(z[None, :])[0]
    g = prob.grad(z, config.fd_step)
    H = np.eye(d)
    history = [fz]
    for it in range(1, config.max_iters + 1):
        prob.iteration = it
        if np.max(np.abs(_projected_gradient(z, g))) <= config.gtol:
            break
        active = ((z <= 0.0) & (g > 0.0)) | ((z >= 1.0) & (g < 0.0))
        free = ~active
        step = np.zeros(d)
        step[free] = -H[np.ix_(free, free)] @ g[free]
        if g @ step >= 0.0:
            H = np.eye(d)
            step = np.where(free, -g, 0.0)
        scale = np.max(np.abs(step))
        if scale > 1.0:
            step /= scale

        t, accepted = 1.0, False
        for _ in range(_MAX_HALVINGS):
            z_new = np.clip(z + t * step, 0.0, 1.0)
            f_new = prob.values(z_new[None, :])[0]
            if f_new <= fz + _ARMIJO * (g @ (z_new - z)) and f_new <= fz:
                accepted = True
                break
            t *= 0.5
        if not accepted or np.array_equal(z_new, z):
            if np.allclose(H, np.eye(d)):
                break
            H = np.eye(d)  # retry once along steepest descent
            history.append(fz)
            continue

        g_new = prob.grad(z_new, config.fd_step)
        s, y = z_new - z, g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            V = np.eye(d) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        z, fz, g = z_new, f_new, g_new
        history.append(fz)
    return z, fz, history


def gradient_minimize(f, bounds: ParameterBounds, x0, config: GradientConfig = GradientConfig(),
                      vectorized: bool = False) -> OptimRun:
    """Local projected BFGS from ``x0`` (physical units, inside the box)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (bounds.dim,):
        raise ConfigurationError(f"x0 must have shape ({bounds.dim},), got {x0.shape}")
    prob = _UnitProblem(f, bounds, vectorized)
    try:
        z, fz, history = _descend(prob, bounds.to_unit(bounds.check(x0)), config)
    except EvaluationError as exc:
        if prob.iteration == 0:
            raise EvaluationError(f"objective not finite at the starting point: {exc}", index=0) from exc
        raise
    return OptimRun("grad", bounds.clip(bounds.from_unit(z)), float(fz), np.array(history), prob.evals, config.seed)


def multistart_gradient(f, bounds: ParameterBounds, n_starts: int = 10, config: GradientConfig = GradientConfig(),
                        vectorized: bool = False, extra_starts=()) -> OptimRun:
    """Projected BFGS from Latin hypercube starts; the best local run wins.

    ``extra_starts`` are appended after the LHS starts.  ``history`` chains
    the runs and tracks the best value seen so far.
    """
    rng = np.random.default_rng(config.seed)
    starts = [bounds.from_unit(z) for z in lhs_unit(n_starts, bounds.dim, rng)] if n_starts > 0 else []
    starts += [np.asarray(x, dtype=float) for x in extra_starts]
    if not starts:
        raise ConfigurationError("multistart needs at least one starting point")
    best, chain, evals = None, [], 0
    for x0 in starts:
        run = gradient_minimize(f, bounds, x0, config, vectorized)
        evals += run.evals
        chain.extend(run.history)
        if best is None or run.best_f < best.best_f:
            best = run
    history = np.minimum.accumulate(np.array(chain))
    return OptimRun("grad", best.best_x, best.best_f, history, evals, config.seed)
