"""A small, fully enumerable reference system on the k-bit hypercube.

Configurations are integers in ``[0, 2**k)``. A task is solved by any
configuration in its target set, reconfiguration costs the Hamming distance,
and adaptation is a greedy bit-flip walk to the nearest target, costing one
unit per flip. Adaption and reconfiguration cost therefore share units, which
makes the hypercube the natural fixture for checking the formalism's bounds.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .formalism import INF, AdaptiveSystem, Task, TaskContext, TaskDistance

MAX_BITS = 16


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _parse_target(t, k: int) -> int:
    if isinstance(t, str):
        if len(t) != k:
            raise ValueError(f"target {t!r} is not {k} bits long")
        return int(t, 2)
    t = int(t)
    if not 0 <= t < 2 ** k:
        raise ValueError(f"target {t} outside the {k}-bit hypercube")
    return t


class HypercubeSystem(AdaptiveSystem):
    def __init__(self, k: int, targets: dict, initial_config: int = 0):
        if not 1 <= k <= MAX_BITS:
            raise ValueError(f"k must be in [1, {MAX_BITS}] to stay enumerable")
        self.k = k
        self.targets = {tid: frozenset(ts) for tid, ts in targets.items()}
        self.initial_config = initial_config
        self.tasks = tuple(
            Task(id=tid, env_dim=k, goal=self._goal_for(tid), distance_tag=tid)
            for tid in self.targets)

    def _goal_for(self, tid):
        ts = self.targets[tid]
        return lambda x: int(x in ts)

    def context(self, weights: Sequence[float] | None = None,
                transition=None) -> TaskContext:
        return TaskContext(self.tasks, weights=weights, transition=transition)

    def nearest_target(self, config: int, task: Task):
        ts = self.targets[task.id]
        if not ts:
            return None
        return min(ts, key=lambda t: (_popcount(config ^ t), t))

    def adapt(self, config: int, task: Task, rng=None):
        target = self.nearest_target(config, task)
        if target is None:
            return config, INF
        flips = 0
        diff = config ^ target
        while diff:
            low = diff & -diff  # flip lowest differing bit first
            config ^= low
            diff ^= low
            flips += 1
        return config, float(flips)

    def reconfig_cost(self, a: int, b: int) -> float:
        return float(_popcount(a ^ b))

    def performs(self, config: int, task: Task) -> bool:
        return config in self.targets[task.id]

    def enumerate_configs(self) -> Iterable[int]:
        return range(2 ** self.k)

    def target_distance(self) -> TaskDistance:
        """Hamming distance between the smallest targets of two tasks."""
        def fn(a: Task, b: Task) -> float:
            ta, tb = self.targets[a.id], self.targets[b.id]
            if not ta or not tb:
                return float(self.k)
            return float(_popcount(min(ta) ^ min(tb)))
        return TaskDistance(fn)


def hypercube_reference_system(k: int, tasks: Sequence[Iterable], initial_config=0) -> HypercubeSystem:
    """Build a hypercube system with one task per target set.

    Targets may be integers or ``k``-character bit strings; tasks are named
    ``T1, T2, ...`` in order.
    """
    targets = {f"T{i + 1}": {_parse_target(t, k) for t in ts} for i, ts in enumerate(tasks)}
    return HypercubeSystem(k, targets, _parse_target(initial_config, k))


def random_instance(k: int, n_tasks: int, rng, max_targets: int = 3,
                    initial_config: int | None = None) -> HypercubeSystem:
    """Random hypercube system, used by the oracle suites."""
    rng = np.random.default_rng(rng)
    tasks = []
    for _ in range(n_tasks):
        size = int(rng.integers(1, max_targets + 1))
        tasks.append([int(x) for x in rng.choice(2 ** k, size=size, replace=False)])
    start = int(rng.integers(2 ** k)) if initial_config is None else initial_config
    return hypercube_reference_system(k, tasks, start)
