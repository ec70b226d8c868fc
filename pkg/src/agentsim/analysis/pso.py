"""Global-best particle swarm optimization over a box."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class PsoConfig:
    objective: Callable[[np.ndarray], float]
    bounds: Sequence[tuple[float, float]]
    swarm_size: int = 30
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    iterations: int = 100
    seed: int = 0
    initial: Sequence[Sequence[float]] = field(default_factory=list)
    """Optional starting positions for the first particles."""

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[0] == 0 or b.shape[1] != 2:
            raise ValueError("bounds must be a non-empty list of (low, high) pairs")
        if not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
            raise ValueError("bounds must be finite with low <= high")
        if self.swarm_size < 2:
            raise ValueError("swarm size must be at least 2")
        if self.iterations < 0:
            raise ValueError("iteration budget must be non-negative")


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_loss: float
    history: list[float]
    """Global best loss after initialization and after every iteration."""
    positions: list[np.ndarray]
    """Global best position matching each ``history`` entry."""


def _evaluate(objective, x) -> float:
    try:
        y = float(objective(x))
    except (FloatingPointError, OverflowError, ValueError) as exc:
        log.warning("objective failed at %s: %s", x, exc)
        return math.inf
    return y if math.isfinite(y) else math.inf


def pso_optimize(config: PsoConfig) -> PsoResult:
    """Minimize ``config.objective``; positions are clamped to the bounds."""
    rng = np.random.default_rng(config.seed)
    b = np.asarray(config.bounds, dtype=float)
    lo, hi = b[:, 0], b[:, 1]
    dim = len(b)
    n = config.swarm_size
    x = rng.uniform(lo, hi, size=(n, dim))
    for k, guess in enumerate(config.initial[:n]):
        x[k] = np.clip(np.asarray(guess, dtype=float), lo, hi)
    span = hi - lo
    v = rng.uniform(-span, span, size=(n, dim)) * 0.1
    y = np.array([_evaluate(config.objective, xi) for xi in x])
    pbest_x, pbest_y = x.copy(), y.copy()
    g = int(np.argmin(pbest_y))
    gbest_x, gbest_y = pbest_x[g].copy(), float(pbest_y[g])
    history, positions = [gbest_y], [gbest_x.copy()]

    for it in range(config.iterations):
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        v = (
            config.inertia * v
            + config.cognitive * r1 * (pbest_x - x)
            + config.social * r2 * (gbest_x - x)
        )
        x = np.clip(x + v, lo, hi)
        y = np.array([_evaluate(config.objective, xi) for xi in x])
        better = y < pbest_y
        pbest_x[better] = x[better]
        pbest_y[better] = y[better]
        g = int(np.argmin(pbest_y))
        if pbest_y[g] < gbest_y:
            gbest_x, gbest_y = pbest_x[g].copy(), float(pbest_y[g])
        history.append(gbest_y)
        positions.append(gbest_x.copy())
        log.debug("pso iteration %d: best %.6g", it, gbest_y)
    return PsoResult(gbest_x, gbest_y, history, positions)
