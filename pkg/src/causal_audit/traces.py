"""Trace containers shared by the explorer, the replay kernel and properties."""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

from .lang import InitialConfiguration
from .terms import Store

# stores: per-thread store snapshot after the step (aligned with initial.threads)
# message: the transferred term for a sync step, None for a local one
TraceStep = namedtuple("TraceStep", "label stores message")


@dataclass(frozen=True)
class Trace:
    initial: InitialConfiguration
    steps: tuple = ()
    path: object = None  # PathCondition of the dummy resolution, None when irrelevant

    @property
    def labels(self) -> tuple:
        return tuple(s.label for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def snapshot(self, k: int) -> dict[str, Store]:
        """Stores after k steps (k = 0 is the initial configuration)."""
        stores = self.initial.stores if k == 0 else self.steps[k - 1].stores
        return dict(zip(self.initial.threads, stores))

    def store_history(self, tid: str):
        idx = self.initial.index(tid)
        yield self.initial.stores[idx]
        for s in self.steps:
            yield s.stores[idx]

    def final_store(self, tid: str) -> Store:
        idx = self.initial.index(tid)
        return self.steps[-1].stores[idx] if self.steps else self.initial.stores[idx]

    def prefix(self, k: int) -> Trace:
        return Trace(self.initial, self.steps[:k], self.path)
