"""Uniform-grid spatial index.

Agents are binned by center of mass into cubic boxes whose edge is at least the
largest agent extent, so every interaction partner within one box edge lives in
the 27-box neighborhood of an agent's own box.  Box coordinates are global
integers ``floor(position / edge)``, which keeps them comparable between two
rebuilds that share the same edge length.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=np.int64)

# global box coordinates are packed into one int64 key for set operations
_BIAS = 1 << 20
_SHIFT = 21


def _pack(coords: np.ndarray) -> np.ndarray:
    c = coords.astype(np.int64) + _BIAS
    return (c[:, 0] << (2 * _SHIFT)) | (c[:, 1] << _SHIFT) | c[:, 2]


@dataclass
class GridState:
    """What a grid needs to remember about the previous step for stationary flags."""

    ids: np.ndarray
    positions: np.ndarray
    box_length: float


class UniformGrid:
    """Immutable spatial index over one population snapshot.

    Parameters
    ----------
    positions : (n, 3) array
        Agent centers of mass.
    extents : (n,) array
        Per-agent size used for the box-edge invariant (diameter for spheres,
        full length for cylinders).
    min_box_size : float
        Lower bound on the box edge.
    """

    def __init__(self, positions, extents=None, min_box_size: float = 0.0):
        # copied so later in-place moves of the store do not leak into the index
        pos = np.array(positions, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("agent positions must be finite")
        n = len(pos)
        ext = np.zeros(n) if extents is None else np.asarray(extents, dtype=float)
        largest = float(ext.max()) if n else 0.0
        edge = max(largest, float(min_box_size))
        if edge <= 0.0:
            edge = 1.0
        self.positions = pos
        self.box_length = edge
        self.n = n

        if n == 0:
            self.coords = np.zeros((0, 3), dtype=np.int64)
            self.lo = np.zeros(3, dtype=np.int64)
            self.dims = np.ones(3, dtype=np.int64)
        else:
            self.coords = np.floor(pos / edge).astype(np.int64)
            self.lo = self.coords.min(axis=0)
            self.dims = self.coords.max(axis=0) - self.lo + 1
        self.origin = self.lo * edge

        keys = self._linear(self.coords)
        self.order = np.argsort(keys, kind="stable")
        sorted_keys = keys[self.order]
        self.box_keys, self.box_start, counts = np.unique(
            sorted_keys, return_index=True, return_counts=True
        )
        self.box_end = self.box_start + counts
        self.keys = keys
        # dense per-box tables when the bounding lattice is small enough
        # the padded lattice has one empty layer around the occupied boxes so
        # every 27-neighborhood lookup stays in range
        padded = self.dims + 2
        n_boxes = int(np.prod(padded))
        self._dense = n_boxes <= max(8 * n, 1 << 21)
        if self._dense:
            rel = self.coords + 1 - self.lo
            self._pkeys = (rel[:, 0] * padded[1] + rel[:, 1]) * padded[2] + rel[:, 2]
            self._pdelta = (OFFSETS[:, 0] * padded[1] + OFFSETS[:, 1]) * padded[2] + OFFSETS[:, 2]
            first = self.order[self.box_start]
            self._dense_start = np.zeros(n_boxes, dtype=np.int64)
            self._dense_count = np.zeros(n_boxes, dtype=np.int64)
            self._dense_start[self._pkeys[first]] = self.box_start
            self._dense_count[self._pkeys[first]] = counts
        # filled by mark_stationary
        self._moving_keys: np.ndarray | None = None

    # ------------------------------------------------------------------ layout
    def _linear(self, coords: np.ndarray) -> np.ndarray:
        rel = coords - self.lo
        return (rel[:, 0] * self.dims[1] + rel[:, 1]) * self.dims[2] + rel[:, 2]

    def box_coordinates(self, row: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in self.coords[row])

    def rows_in_box(self, coord) -> np.ndarray:
        c = np.asarray(coord, dtype=np.int64).reshape(1, 3)
        if np.any(c < self.lo) or np.any(c >= self.lo + self.dims):
            return np.zeros(0, dtype=np.int64)
        k = self._linear(c)[0]
        i = np.searchsorted(self.box_keys, k)
        if i >= len(self.box_keys) or self.box_keys[i] != k:
            return np.zeros(0, dtype=np.int64)
        return self.order[self.box_start[i]:self.box_end[i]]

    def occupancy(self) -> np.ndarray:
        return self.box_end - self.box_start

    # --------------------------------------------------------------- queries
    def _check_radius(self, radius: float) -> None:
        if radius <= 0:
            raise ValueError("neighbor radius must be positive")
        if radius > self.box_length * (1 + 1e-12):
            raise ValueError(
                f"radius {radius} exceeds box edge {self.box_length}; rebuild the "
                "grid with min_box_size >= radius"
            )

    def candidate_pairs(self, rows=None) -> tuple[np.ndarray, np.ndarray]:
        """All (row, other) combinations sharing a 27-box neighborhood.

        Self pairs are excluded.  The result is not distance filtered.
        """
        if rows is None:
            rows = np.arange(self.n, dtype=np.int64)
        rows = np.asarray(rows, dtype=np.int64)
        if len(rows) == 0 or self.n == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        if self._dense:
            k = self._pkeys[rows][:, None] + self._pdelta[None, :]
            cnt = self._dense_count[k]
            found = cnt > 0
            src = np.broadcast_to(rows[:, None], k.shape)[found]
            start = self._dense_start[k[found]]
            count = cnt[found]
            return self._expand(src, start, count)
        base = self.coords[rows]
        srcs, starts, counts = [], [], []
        hi = self.lo + self.dims
        for off in OFFSETS:
            nc = base + off
            valid = np.all((nc >= self.lo) & (nc < hi), axis=1)
            if not valid.any():
                continue
            src = rows[valid]
            k = self._linear(nc[valid])
            idx = np.searchsorted(self.box_keys, k)
            idx_c = np.minimum(idx, len(self.box_keys) - 1)
            found = self.box_keys[idx_c] == k
            src, idx_c = src[found], idx_c[found]
            srcs.append(src)
            starts.append(self.box_start[idx_c])
            counts.append(self.box_end[idx_c] - self.box_start[idx_c])
        return self._expand(np.concatenate(srcs), np.concatenate(starts), np.concatenate(counts))

    def _expand(self, src, start, count):
        total = int(count.sum())
        rep_src = np.repeat(src, count)
        first = np.repeat(np.cumsum(count) - count, count)
        within = np.arange(total, dtype=np.int64) - first
        other = self.order[np.repeat(start, count) + within]
        keep = other != rep_src
        return rep_src[keep], other[keep]

    def neighbor_pairs(self, radius: float, rows=None, positions=None, sort: bool = True):
        """Directed pairs ``(i, j)`` with ``|p_i - p_j| <= radius``, sorted by (i, j).

        ``rows`` restricts the first element of each pair.  ``positions`` may be
        passed to filter distances with coordinates other than the indexed ones
        (for example a step-start snapshot equal to them).  With ``sort=False``
        pairs come grouped by ``i`` in the order of ``rows``, which is still
        deterministic.
        """
        self._check_radius(radius)
        i, j = self.candidate_pairs(rows)
        pos = self.positions if positions is None else positions
        d = pos[i] - pos[j]
        keep = np.einsum("ij,ij->i", d, d) <= radius * radius
        i, j = i[keep], j[keep]
        if not sort:
            return i, j
        order = np.lexsort((j, i))
        return i[order], j[order]

    def neighbors(self, row: int, radius: float) -> np.ndarray:
        i, j = self.neighbor_pairs(radius, rows=np.array([row]))
        return j

    def for_each_neighbor(self, row: int, radius: float, visit: Callable[[int, float], None]) -> None:
        """Call ``visit(neighbor_row, distance)`` once per neighbor of ``row``."""
        for j in self.neighbors(row, radius):
            visit(int(j), float(np.linalg.norm(self.positions[row] - self.positions[j])))

    # ------------------------------------------------------------ stationary
    def mark_stationary(self, ids: np.ndarray, previous: GridState | None, epsilon: float) -> None:
        """Flag boxes whose 27-neighborhood saw motion, births or deaths.

        ``ids`` are the agent ids aligned with this grid's rows, sorted ascending.
        Without a previous state, or when the box edge changed, every box is
        treated as moving.
        """
        if previous is None or previous.box_length != self.box_length:
            self._moving_keys = None
            return
        ids = np.asarray(ids, dtype=np.int64)
        pos_prev = previous.positions
        if len(previous.ids):
            loc_c = np.minimum(np.searchsorted(previous.ids, ids), len(previous.ids) - 1)
            existed = previous.ids[loc_c] == ids
        else:
            loc_c = np.zeros(len(ids), dtype=np.int64)
            existed = np.zeros(len(ids), dtype=bool)
        moved = ~existed
        if existed.any():
            disp = self.positions[existed] - pos_prev[loc_c[existed]]
            moved_existing = np.sqrt(np.einsum("ij,ij->i", disp, disp)) > epsilon
            moved[np.flatnonzero(existed)[moved_existing]] = True
        changed = [self.coords[moved]]
        # old box of anything that moved or vanished
        still = np.zeros(len(previous.ids), dtype=bool)
        still[loc_c[existed]] = True
        prev_changed = ~still
        if existed.any():
            prev_changed[loc_c[np.flatnonzero(existed)[moved[existed]]]] = True
        if prev_changed.any():
            changed.append(np.floor(pos_prev[prev_changed] / self.box_length).astype(np.int64))
        changed = np.concatenate(changed) if changed else np.zeros((0, 3), np.int64)
        if len(changed) == 0:
            self._moving_keys = np.zeros(0, dtype=np.int64)
            return
        dilated = (changed[:, None, :] + OFFSETS[None, :, :]).reshape(-1, 3)
        self._moving_keys = np.unique(_pack(dilated))

    def is_region_stationary(self, coord) -> bool:
        if self._moving_keys is None:
            return False
        k = _pack(np.asarray(coord, dtype=np.int64).reshape(1, 3))
        return not bool(np.isin(k, self._moving_keys)[0])

    def stationary_rows(self) -> np.ndarray:
        """Boolean mask over rows: True where the agent's box is stationary."""
        if self._moving_keys is None:
            return np.zeros(self.n, dtype=bool)
        return ~np.isin(_pack(self.coords), self._moving_keys)

    def state(self, ids) -> GridState:
        return GridState(np.asarray(ids, dtype=np.int64).copy(), self.positions.copy(), self.box_length)

    # ------------------------------------------------------------------ debug
    def dump_occupancy(self, path) -> None:
        """Write the box-occupancy histogram as ``occupancy,boxes`` CSV rows."""
        occ = self.occupancy()
        values, counts = np.unique(occ, return_counts=True)
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["occupancy", "boxes"])
            for v, c in zip(values, counts):
                w.writerow([int(v), int(c)])
