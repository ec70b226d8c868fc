"""Independent brute-force references used by several test modules."""

import math

import numpy as np


def all_pairs(positions, radius):
    """Set of ordered (i, j), i != j, with |p_i - p_j| <= radius."""
    p = np.asarray(positions, dtype=float)
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    i, j = np.nonzero(d <= radius)
    return {(a, b) for a, b in zip(i.tolist(), j.tolist()) if a != b}


def heat_kernel(r2, t, D, mass=1.0):
    """Free-space 3-D Green's function for a point release of ``mass``."""
    return mass / (4.0 * math.pi * D * t) ** 1.5 * np.exp(-r2 / (4.0 * D * t))


def sphere_volume(d):
    return math.pi / 6.0 * d**3


def diameter_from_volume(v):
    return (6.0 * v / math.pi) ** (1.0 / 3.0)
