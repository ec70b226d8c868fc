"""Equivalent-sphere diameter of a point cloud's convex hull."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError


@dataclass
class HullDiameter:
    diameter: float
    volume: float
    degenerate: bool = False


def _max_pairwise(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    d = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def convex_hull_diameter(points) -> HullDiameter:
    """Diameter ``(6 V / pi)^(1/3)`` of the sphere with the hull's volume.

    Fewer than four points or a flat set yield the largest pairwise distance
    with ``degenerate=True``.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    # lexicographic order makes the hull construction independent of input order
    p = p[np.lexsort((p[:, 2], p[:, 1], p[:, 0]))]
    if len(p) < 4:
        return HullDiameter(_max_pairwise(p), 0.0, True)
    centered = p - p.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0 or sv[2] <= 1e-12 * sv[0]:
        return HullDiameter(_max_pairwise(p), 0.0, True)
    try:
        hull = ConvexHull(p)
    except QhullError:
        return HullDiameter(_max_pairwise(p), 0.0, True)
    v = float(hull.volume)
    return HullDiameter((6.0 * v / math.pi) ** (1.0 / 3.0), v)
