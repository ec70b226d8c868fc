"""Branch-point counts and dendritic lengths per arbor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Simulation
from ..neuro import APICAL, BASAL, arbor_elements, daughters


@dataclass
class ArborStats:
    root: int
    lineage: int
    branch_points: int
    total_length: float
    elements: int


@dataclass
class Morphometrics:
    arbors: list[ArborStats]

    @property
    def branch_points(self) -> int:
        return sum(a.branch_points for a in self.arbors)

    @property
    def total_length(self) -> float:
        return sum(a.total_length for a in self.arbors)

    @property
    def mean_branch_points(self) -> float:
        return self.branch_points / len(self.arbors) if self.arbors else 0.0

    @property
    def mean_length(self) -> float:
        return self.total_length / len(self.arbors) if self.arbors else 0.0

    def by_lineage(self, lineage: int) -> list[ArborStats]:
        return [a for a in self.arbors if a.lineage == lineage]


def morphometrics(sim: Simulation, soma_id: int) -> Morphometrics:
    store = sim.store
    arbors = []
    for root in sim.agent(soma_id)["roots"]:
        ids = arbor_elements(sim, root)
        rows = store.rows_of(ids)
        lengths = np.linalg.norm(store["distal"][rows] - store["proximal"][rows], axis=1)
        bp = sum(1 for e in ids if len(daughters(sim, e)) == 2)
        arbors.append(ArborStats(root, int(store["lineage"][rows[0]]), bp, float(lengths.sum()), len(ids)))
    return Morphometrics(arbors)


__all__ = ["APICAL", "BASAL", "ArborStats", "Morphometrics", "morphometrics"]
