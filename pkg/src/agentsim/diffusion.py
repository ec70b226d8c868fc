"""Substance concentrations on a regular 3-D lattice."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .core import Operation, OpKind, Simulation

log = logging.getLogger(__name__)

STABILITY_LIMIT = 1.0 / 6.0


class DiffusionGrid:
    """Explicit-Euler diffusion with linear decay on a node-centered lattice.

    Node ``(i, j, k)`` sits at ``origin + h * (i, j, k)``.  ``boundary`` is
    ``"closed"`` (zero flux) or ``"absorbing"`` (zero concentration outside).
    """

    def __init__(
        self,
        name: str,
        dims,
        spacing: float,
        origin=(0.0, 0.0, 0.0),
        diffusion: float = 0.0,
        decay: float = 0.0,
        boundary: str = "closed",
        dt: float = 1.0,
    ):
        if boundary not in ("closed", "absorbing"):
            raise ValueError(f"unknown boundary condition {boundary!r}")
        if spacing <= 0 or dt <= 0:
            raise ValueError("spacing and dt must be positive")
        if diffusion < 0 or decay < 0:
            raise ValueError("diffusion and decay must be non-negative")
        ratio = diffusion * dt / spacing**2
        # decay eats into the same budget; past it a node can go negative
        limit = STABILITY_LIMIT * (1.0 - decay * dt)
        if ratio > limit * (1 + 1e-12):
            raise ValueError(
                f"unstable explicit scheme: D*dt/h^2 = {ratio:.6g} exceeds the maximum "
                f"admissible {limit:.6g}"
            )
        self.name = name
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError("dims must be three positive integers")
        self.h = float(spacing)
        self.origin = np.asarray(origin, dtype=float)
        self.diffusion = float(diffusion)
        self.decay = float(decay)
        self.boundary = boundary
        self.dt = float(dt)
        self.c = np.zeros(self.dims)
        self._back = np.zeros(self.dims)
        self._grad: np.ndarray | None = None
        self.out_of_bounds = 0

    @classmethod
    def covering(cls, name, lower, upper, spacing, **kwargs) -> "DiffusionGrid":
        """Lattice whose nodes span the box ``[lower, upper]``."""
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        dims = np.ceil((upper - lower) / spacing).astype(int) + 1
        return cls(name, dims, spacing, lower, **kwargs)

    # -------------------------------------------------------------- geometry
    def node_coordinates(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h * np.arange(self.dims[axis])

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.h * (np.asarray(self.dims) - 1)

    def total_mass(self) -> float:
        return float(self.c.sum() * self.h**3)

    # ---------------------------------------------------------- initializers
    def init_gaussian_axis(self, axis: int, mean: float, sigma: float, amplitude: float) -> None:
        """Gaussian profile along one axis, uniform across the other two."""
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        x = self.node_coordinates(axis)
        profile = amplitude * np.exp(-((x - mean) ** 2) / (2.0 * sigma**2))
        shape = [1, 1, 1]
        shape[axis] = len(x)
        self.c[...] = profile.reshape(shape)
        self._grad = None

    def set_values(self, fn) -> None:
        """Fill nodes with ``fn(x, y, z)`` evaluated on broadcast coordinate grids."""
        x, y, z = np.meshgrid(*(self.node_coordinates(a) for a in range(3)), indexing="ij")
        self.c[...] = np.broadcast_to(fn(x, y, z), self.dims)
        self._grad = None

    # ---------------------------------------------------------------- update
    def laplacian(self, c: np.ndarray) -> np.ndarray:
        mode = "edge" if self.boundary == "closed" else "constant"
        p = np.pad(c, 1, mode=mode)
        return (
            p[2:, 1:-1, 1:-1] + p[:-2, 1:-1, 1:-1]
            + p[1:-1, 2:, 1:-1] + p[1:-1, :-2, 1:-1]
            + p[1:-1, 1:-1, 2:] + p[1:-1, 1:-1, :-2]
            - 6.0 * c
        ) / self.h**2

    def step(self) -> None:
        """One explicit step ``c += dt * (D lap c - mu c)``, clamped at zero."""
        c = self.c
        out = self._back
        if self.diffusion > 0:
            np.multiply(self.laplacian(c), self.diffusion, out=out)
        else:
            out[...] = 0.0
        if self.decay > 0:
            out -= self.decay * c
        out *= self.dt
        out += c
        np.maximum(out, 0.0, out=out)
        self._back, self.c = c, out
        self._grad = None

    def secrete(self, position, amount: float) -> None:
        """Add ``amount`` to the node nearest ``position``."""
        idx = np.rint((np.asarray(position, float) - self.origin) / self.h).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.dims) - 1)
        self.c[tuple(idx)] += amount
        self._grad = None

    def secrete_many(self, positions, amount: float) -> None:
        idx = np.rint((np.atleast_2d(positions) - self.origin) / self.h).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.dims) - 1)
        np.add.at(self.c, (idx[:, 0], idx[:, 1], idx[:, 2]), amount)
        self._grad = None

    def deposit(self, positions, amount: float) -> None:
        """Spread ``amount`` per position over the eight surrounding nodes with
        trilinear weights, so the source is centered on the position."""
        i0, i1, t = self._locate(positions)
        for cx in (0, 1):
            ix = i1[:, 0] if cx else i0[:, 0]
            wx = t[:, 0] if cx else 1 - t[:, 0]
            for cy in (0, 1):
                iy = i1[:, 1] if cy else i0[:, 1]
                wy = t[:, 1] if cy else 1 - t[:, 1]
                for cz in (0, 1):
                    iz = i1[:, 2] if cz else i0[:, 2]
                    wz = t[:, 2] if cz else 1 - t[:, 2]
                    np.add.at(self.c, (ix, iy, iz), amount * wx * wy * wz)
        self._grad = None

    # --------------------------------------------------------------- sampling
    def _locate(self, positions):
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        f = (pos - self.origin) / self.h
        hi = np.asarray(self.dims, dtype=float) - 1
        outside = np.any((f < -1e-9) | (f > hi + 1e-9), axis=1)
        n_out = int(outside.sum())
        if n_out:
            if self.out_of_bounds == 0:
                log.warning("%s: sampling outside the lattice; using clamped values", self.name)
            self.out_of_bounds += n_out
        f = np.clip(f, 0.0, hi)
        i0 = np.minimum(np.floor(f).astype(int), np.maximum(np.asarray(self.dims) - 2, 0))
        t = f - i0
        i1 = np.minimum(i0 + 1, np.asarray(self.dims) - 1)
        return i0, i1, t

    def _interp(self, values: np.ndarray, positions) -> np.ndarray:
        i0, i1, t = self._locate(positions)
        out = 0.0
        for cx in (0, 1):
            ix = i1[:, 0] if cx else i0[:, 0]
            wx = t[:, 0] if cx else 1 - t[:, 0]
            for cy in (0, 1):
                iy = i1[:, 1] if cy else i0[:, 1]
                wy = t[:, 1] if cy else 1 - t[:, 1]
                for cz in (0, 1):
                    iz = i1[:, 2] if cz else i0[:, 2]
                    wz = t[:, 2] if cz else 1 - t[:, 2]
                    w = wx * wy * wz
                    out = out + (w[:, None] * values[ix, iy, iz] if values.ndim == 4 else w * values[ix, iy, iz])
        return out

    def concentration_at(self, position):
        """Trilinear interpolation; scalar for one position, array for many."""
        v = self._interp(self.c, position)
        return float(v[0]) if np.ndim(position) == 1 else v

    def gradient_field(self) -> np.ndarray:
        if self._grad is None:
            g = []
            for axis in range(3):
                if self.dims[axis] > 1:
                    g.append(np.gradient(self.c, self.h, axis=axis, edge_order=1))
                else:
                    g.append(np.zeros(self.dims))
            self._grad = np.stack(g, axis=-1)
        return self._grad

    def gradient_at(self, position):
        """Central-difference gradient, trilinearly interpolated."""
        v = self._interp(self.gradient_field(), position)
        return v[0] if np.ndim(position) == 1 else v

    # ------------------------------------------------------------------- io
    def dump_csv(self, path) -> None:
        x, y, z = np.meshgrid(*(self.node_coordinates(a) for a in range(3)), indexing="ij")
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", self.name])
            for row in zip(x.ravel(), y.ravel(), z.ravel(), self.c.ravel()):
                w.writerow([f"{v:.10g}" for v in row])


class DiffusionStep:
    """Standalone operation stepping every registered diffusion grid."""

    def __call__(self, sim: Simulation) -> None:
        for field in sim.fields.values():
            if isinstance(field, DiffusionGrid):
                field.step()

    def install(self, sim: Simulation, name: str = "diffusion", frequency: int = 1) -> Operation:
        return sim.add_operation(Operation(name, self, OpKind.STANDALONE, frequency=frequency))
