"""Deterministic SIR reference: rates, RK4 trajectory and final size."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class SirOdeParams:
    beta: float
    gamma: float
    N: float
    S0: float
    I0: float
    R0_init: float = 0.0

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be non-negative")
        if not math.isclose(self.S0 + self.I0 + self.R0_init, self.N, rel_tol=1e-12):
            raise ValueError("S0 + I0 + R0_init must equal N")


def derive_rates(r0: float, recovery_days: float) -> tuple[float, float]:
    """``(beta, gamma)`` from the basic reproduction number and recovery time."""
    if r0 <= 0 or recovery_days <= 0:
        raise ValueError("R0 and recovery duration must be positive")
    gamma = 1.0 / recovery_days
    return r0 * gamma, gamma


def _rhs(y, beta, gamma, n):
    s, i, _ = y
    inf = beta * s * i / n
    return np.array([-inf, inf - gamma * i, gamma * i])


def solve_sir_ode(params: SirOdeParams, t_end: float, dt: float):
    """Classical RK4; returns ``(t, S, I, R)`` arrays including both ends."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n_steps + 1) * dt
    y = np.empty((n_steps + 1, 3))
    y[0] = (params.S0, params.I0, params.R0_init)
    b, g, n = params.beta, params.gamma, params.N
    for k in range(n_steps):
        yk = y[k]
        k1 = _rhs(yk, b, g, n)
        k2 = _rhs(yk + 0.5 * dt * k1, b, g, n)
        k3 = _rhs(yk + 0.5 * dt * k2, b, g, n)
        k4 = _rhs(yk + dt * k3, b, g, n)
        y[k + 1] = yk + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return t, y[:, 0], y[:, 1], y[:, 2]


def sample_trajectory(t, values, times) -> np.ndarray:
    """Linear interpolation of a trajectory at arbitrary times."""
    return np.interp(np.asarray(times, float), t, values)


def final_size(r0: float, s0_fraction: float, tol: float = 1e-10) -> float:
    """Fraction never infected, ``s``, solving ``ln(s / s0) = -R0 (1 - s)``.

    ``f(s) = ln(s / s0) + R0 (1 - s)`` is concave with its maximum at
    ``1 / R0`` and is positive at ``min(s0, 1 / R0)`` whenever an epidemic
    is possible, so bisection runs on ``(0, min(s0, 1 / R0)]``.
    """
    if r0 <= 0:
        raise ValueError("R0 must be positive")
    if not 0 < s0_fraction <= 1:
        raise ValueError("initial susceptible fraction must lie in (0, 1]")

    def f(s):
        return math.log(s / s0_fraction) + r0 * (1.0 - s)

    hi = min(s0_fraction, 1.0 / r0)
    if f(hi) <= 0:
        return hi
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == 0.0 or f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
