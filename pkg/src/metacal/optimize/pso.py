"""Global-best particle swarm with constriction-equivalent coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..doe import lhs_unit
from ..errors import ConfigurationError
from ..estuary import ParameterBounds
from ._run import OptimRun, evaluate_rows


@dataclass(frozen=True)
class PSOConfig:
    swarm: int = 40
    iters: int = 200
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    vmax: float = 0.5  # fraction of the box width
    seed: int | None = 0

    def __post_init__(self):
        if self.swarm < 5 or self.iters < 1:
            raise ConfigurationError("PSO needs swarm >= 5 and iters >= 1")


def _phys(bounds, z):
    return bounds.clip(bounds.from_unit(z))


def _reflect(z, v):
    # work in the unit cube; bounce off the walls and reverse the velocity
    low, high = z < 0.0, z > 1.0
    z = np.where(low, -z, z)
    z = np.where(high, 2.0 - z, z)
    v = np.where(low | high, -v, v)
    return np.clip(z, 0.0, 1.0), v


def pso_minimize(f, bounds: ParameterBounds, config: PSOConfig = PSOConfig(), vectorized: bool = False,
                 init=None) -> OptimRun:
    """Minimize ``f`` over ``bounds`` with a global-best swarm.

    The swarm starts on a Latin hypercube; rows of ``init`` (physical units)
    replace its first particles.  ``history`` has ``iters + 1`` entries, the
    first for the initial swarm.
    """
    rng = np.random.default_rng(config.seed)
    n, d = config.swarm, bounds.dim
    z = lhs_unit(n, d, rng)
    if init is not None:
        extra = bounds.to_unit(np.atleast_2d(np.asarray(init, dtype=float)))[:n]
        z[: len(extra)] = np.clip(extra, 0.0, 1.0)
    v = rng.uniform(-0.1, 0.1, size=(n, d))

    fz = evaluate_rows(f, _phys(bounds, z), vectorized, 0)
    pbest, pbest_f = z.copy(), fz.copy()
    g = int(np.argmin(pbest_f))
    history = [pbest_f[g]]
    for it in range(1, config.iters + 1):
        r1 = rng.random((n, d))
        r2 = rng.random((n, d))
        v = config.inertia * v + config.c1 * r1 * (pbest - z) + config.c2 * r2 * (pbest[g] - z)
        v = np.clip(v, -config.vmax, config.vmax)
        z, v = _reflect(z + v, v)
        fz = evaluate_rows(f, _phys(bounds, z), vectorized, it)
        better = fz < pbest_f
        pbest[better] = z[better]
        pbest_f[better] = fz[better]
        g = int(np.argmin(pbest_f))
        history.append(pbest_f[g])
    return OptimRun("pso", _phys(bounds, pbest[g]), float(pbest_f[g]), np.array(history),
                    n * (config.iters + 1), config.seed)
