"""Sampled scalar channels and their CSV form."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable

import numpy as np

from ..core import Operation, OpKind, Simulation


class TimeSeries:
    """Named scalar channels sampled at strictly increasing step indices."""

    def __init__(self, channels):
        self.channels = list(channels)
        self.steps: list[int] = []
        self.values: dict[str, list] = {c: [] for c in self.channels}

    def record(self, step: int, **values) -> None:
        if set(values) != set(self.channels):
            raise ValueError(f"expected channels {self.channels}, got {sorted(values)}")
        if self.steps and step <= self.steps[-1]:
            if step == self.steps[-1]:
                for c in self.channels:
                    self.values[c][-1] = values[c]
                return
            raise ValueError("time-series steps must be strictly increasing")
        self.steps.append(int(step))
        for c in self.channels:
            self.values[c].append(values[c])

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, channel: str) -> np.ndarray:
        return np.asarray(self.values[channel])

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", *self.channels])
            for k, step in enumerate(self.steps):
                w.writerow([step, *(_fmt(self.values[c][k]) for c in self.channels)])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        ts = cls(rows[0][1:])
        for row in rows[1:]:
            ts.record(int(row[0]), **{c: float(v) for c, v in zip(ts.channels, row[1:])})
        return ts


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


class Sampler:
    """Standalone operation recording ``probe(sim) -> dict`` into a TimeSeries.

    Runs at the start of every scheduled step and once after the last step.
    """

    def __init__(self, series: TimeSeries, probe: Callable[[Simulation], dict]):
        self.series = series
        self.probe = probe

    def __call__(self, sim: Simulation) -> None:
        self.series.record(sim.step, **self.probe(sim))

    def install(self, sim: Simulation, name: str = "sampler", frequency: int = 1) -> Operation:
        op = Operation(name, self, OpKind.STANDALONE, frequency=frequency, at_end=True)
        sim.add_operation(op)
        # sample before anything else moves
        sim.operations.remove(op)
        sim.operations.insert(0, op)
        return op
