"""Deterministic discrete-event task scheduler.

Tasks form a DAG; each occupies a set of named resources for a fixed
duration. A task becomes ready when its last dependency finishes and starts
once all its resources are free. Ready tasks are served in (ready time,
task id) order, so runs are reproducible bit for bit. Times are integer
picoseconds.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field


@dataclass
class Task:
    name: str
    duration: int
    resources: tuple[str, ...] = ()
    deps: tuple[int, ...] = ()
    kind: str = "compute"  # compute | transfer | buffer | simd
    category: str = "SA"
    energy: dict = field(default_factory=dict)
    tag: str = ""
    nbytes: int = 0
    macs: int = 0
    layers: tuple[str, ...] = ()

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"{self.name}: negative duration")


@dataclass(frozen=True)
class SimEvent:
    time: int  # ps
    kind: str
    resource: str
    duration: int
    energy: float
    tag: str

    def to_json(self) -> str:
        """One log record; times are written in ns."""
        return json.dumps({"time": self.time / 1000, "kind": self.kind, "resource": self.resource,
                           "duration": self.duration / 1000, "energy": self.energy, "tag": self.tag},
                          ensure_ascii=False)


class EventSimulator:
    def __init__(self):
        self.tasks: list[Task] = []
        self.start: list[int] = []
        self.end: list[int] = []

    def add(self, task: Task) -> int:
        tid = len(self.tasks)
        for d in task.deps:
            if not 0 <= d < tid:
                raise ValueError(f"{task.name}: dependency {d} not yet defined")
        self.tasks.append(task)
        return tid

    def run(self) -> int:
        """Schedule every task; returns the makespan in ps."""
        n = len(self.tasks)
        succ: list[list[int]] = [[] for _ in range(n)]
        pending = [len(t.deps) for t in self.tasks]
        ready = [0] * n
        for i, t in enumerate(self.tasks):
            for d in t.deps:
                succ[d].append(i)
        heap = [(0, i) for i in range(n) if pending[i] == 0]
        heapq.heapify(heap)
        free: dict[str, int] = {}
        self.start = [0] * n
        self.end = [0] * n
        done = 0
        while heap:
            t_ready, i = heapq.heappop(heap)
            task = self.tasks[i]
            s = max([t_ready] + [free.get(r, 0) for r in task.resources])
            e = s + task.duration
            for r in task.resources:
                free[r] = e
            self.start[i], self.end[i] = s, e
            done += 1
            for j in succ[i]:
                ready[j] = max(ready[j], e)
                pending[j] -= 1
                if pending[j] == 0:
                    heapq.heappush(heap, (ready[j], j))
        if done != n:
            raise RuntimeError("dependency cycle in task graph")
        return max(self.end, default=0)

    def events(self) -> list[SimEvent]:
        out = []
        for i, t in enumerate(self.tasks):
            res = ",".join(t.resources)
            out.append(SimEvent(self.start[i], t.kind, res, t.duration,
                                float(sum(t.energy.values())), t.tag or t.name))
        out.sort(key=lambda ev: ev.time)
        return out

    def busy_intervals(self, predicate) -> list[tuple[int, int]]:
        """Merged [start, end) intervals of tasks matching predicate."""
        spans = sorted((self.start[i], self.end[i]) for i, t in enumerate(self.tasks)
                       if predicate(t) and self.end[i] > self.start[i])
        merged: list[tuple[int, int]] = []
        for s, e in spans:
            if merged and s <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], e))
            else:
                merged.append((s, e))
        return merged
