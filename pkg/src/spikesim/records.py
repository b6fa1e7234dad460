"""Per-neuron spike time records for one presentation window."""

from __future__ import annotations

import numpy as np


class SpikeRecord:
    """Sorted spike times (ms) for each neuron of a population.

    Times are strictly increasing per neuron and live in [0, window). The
    constructor validates, so a SpikeRecord in hand is always well formed.
    """

    __slots__ = ("window", "times")

    def __init__(self, times: list[np.ndarray], window: float):
        if not window > 0.0:
            raise ValueError(f"window must be positive, got {window}")
        self.window = float(window)
        self.times = [np.asarray(t, dtype=np.float64) for t in times]
        for i, t in enumerate(self.times):
            if t.ndim != 1:
                raise ValueError(f"neuron {i}: spike times must be 1-D")
            if t.size and not np.all(np.isfinite(t)):
                raise ValueError(f"neuron {i}: non-finite spike time")
            if t.size and (t[0] < 0.0 or t[-1] >= self.window):
                raise ValueError(f"neuron {i}: spike time outside [0, {window})")
            if t.size > 1 and not np.all(np.diff(t) > 0.0):
                raise ValueError(f"neuron {i}: spike times not strictly increasing")

    @classmethod
    def empty(cls, n_neurons: int, window: float) -> "SpikeRecord":
        return cls([np.empty(0)] * n_neurons, window)

    @classmethod
    def from_step_events(cls, events: list[tuple[int, np.ndarray]], n_neurons: int,
                         dt: float, window: float) -> "SpikeRecord":
        """Assemble a record from per-step spike events.

        `events` holds (step_index, spiking_neuron_ids) pairs in step order;
        spike times are step_index * dt.
        """
        per_neuron: list[list[float]] = [[] for _ in range(n_neurons)]
        for step, ids in events:
            t = step * dt
            for i in ids:
                per_neuron[int(i)].append(t)
        return cls([np.asarray(ts, dtype=np.float64) for ts in per_neuron], window)

    @property
    def n_neurons(self) -> int:
        return len(self.times)

    def counts(self) -> np.ndarray:
        """Spike count per neuron."""
        return np.array([t.size for t in self.times], dtype=np.int64)

    def total(self) -> int:
        return int(self.counts().sum())

    def subset(self, start: int, stop: int) -> "SpikeRecord":
        """Record restricted to neurons [start, stop), reindexed from 0."""
        if not (0 <= start <= stop <= self.n_neurons):
            raise IndexError(f"bad subset [{start}, {stop}) of {self.n_neurons}")
        return SpikeRecord(self.times[start:stop], self.window)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpikeRecord):
            return NotImplemented
        return (self.window == other.window
                and self.n_neurons == other.n_neurons
                and all(np.array_equal(a, b) for a, b in zip(self.times, other.times)))

    def __repr__(self) -> str:
        return f"SpikeRecord(n_neurons={self.n_neurons}, window={self.window}, total={self.total()})"
