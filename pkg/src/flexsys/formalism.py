"""Tasks, task contexts and flexibility measures for task-performing systems.

Costs are nonnegative floats; ``math.inf`` marks an adaptation that failed or a
task no configuration can perform. Estimators never average an infinite cost
into a mean: failed trials are counted separately and the mean is taken over
the finite ones.

Every Monte Carlo routine derives one child generator per trial from the
caller's generator (``Generator.spawn``), so a trial's outcome depends only on
its index and results are reduced in trial order.
"""

from __future__ import annotations

import abc
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, NamedTuple, Sequence

import numpy as np

INF = math.inf
_ATOL = 1e-9


class ConfigurationError(ValueError):
    """Raised for invalid task contexts, budgets or estimator settings."""


@dataclass(frozen=True, eq=False)
class Task:
    """A task: environment size, feasible states, goal oracle and threshold."""

    id: Hashable
    env_dim: int
    goal: Callable[[Any], Any]
    feasible: Callable[[Any], bool] = lambda x: True
    perf_threshold: float = 1.0
    distance_tag: Any = None

    def __post_init__(self):
        if self.env_dim < 1:
            raise ConfigurationError(f"env_dim must be positive, got {self.env_dim}")
        if not 0.0 <= self.perf_threshold <= 1.0:
            raise ConfigurationError(f"perf_threshold must be in [0, 1], got {self.perf_threshold}")

    def __repr__(self):
        return f"Task({self.id!r})"


@dataclass(frozen=True, eq=False)
class TaskContext:
    """Tasks plus either iid weights or a row-stochastic transition matrix."""

    tasks: tuple[Task, ...]
    weights: np.ndarray | None = None
    transition: np.ndarray | None = None

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if not tasks:
            raise ConfigurationError("a task context needs at least one task")
        ids = [t.id for t in tasks]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("task ids must be unique within a context")
        object.__setattr__(self, "tasks", tasks)
        n = len(tasks)
        if self.weights is not None and self.transition is not None:
            raise ConfigurationError("give either weights or a transition matrix, not both")
        if self.transition is not None:
            Q = np.asarray(self.transition, dtype=float)
            if Q.shape != (n, n) or np.any(Q < 0) or not np.allclose(Q.sum(axis=1), 1.0, rtol=0, atol=_ATOL):
                raise ConfigurationError("transition matrix must be n x n, nonnegative, rows summing to 1")
            object.__setattr__(self, "transition", Q)
        else:
            w = np.full(n, 1.0 / n) if self.weights is None else np.asarray(self.weights, dtype=float)
            if w.shape != (n,) or np.any(w < 0) or abs(w.sum() - 1.0) > _ATOL:
                raise ConfigurationError("weights must be n nonnegative numbers summing to 1")
            object.__setattr__(self, "weights", w)

    @property
    def markov(self) -> bool:
        return self.transition is not None

    def __len__(self):
        return len(self.tasks)

    def index(self, task_id: Hashable) -> int:
        for i, t in enumerate(self.tasks):
            if t.id == task_id:
                return i
        raise KeyError(task_id)

    def task(self, task_id: Hashable) -> Task:
        return self.tasks[self.index(task_id)]

    def pair_weights(self) -> np.ndarray:
        """Distribution used when two tasks are drawn independently.

        For a Markov context this is the stationary distribution of the chain.
        """
        if not self.markov:
            return self.weights
        vals, vecs = np.linalg.eig(self.transition.T)
        pi = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        return pi / pi.sum()

    def draw(self, rng: np.random.Generator, previous: int | None = None) -> int:
        """Index of the next task; Markov chains start from a uniform task."""
        n = len(self.tasks)
        if not self.markov:
            return int(rng.choice(n, p=self.weights))
        if previous is None:
            return int(rng.integers(n))
        return int(rng.choice(n, p=self.transition[previous]))


@dataclass(frozen=True)
class TaskHistory:
    entries: tuple = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def check(self, context: TaskContext) -> None:
        for e in self.entries:
            context.index(e)


@dataclass(frozen=True)
class CostBudget:
    budget: float

    def __post_init__(self):
        if not self.budget > 0:
            raise ConfigurationError(f"budget must be positive, got {self.budget}")


@dataclass(frozen=True)
class TaskDistance:
    """Symmetric nonnegative distance over tasks."""

    fn: Callable[[Task, Task], float]

    def __call__(self, a: Task, b: Task) -> float:
        if a.id == b.id:
            return 0.0
        value = float(self.fn(a, b))
        if value < 0:
            raise ConfigurationError("task distance must be nonnegative")
        return value


class AdaptiveSystem(abc.ABC):
    """A configurable system that can search for configurations performing tasks.

    Subclasses provide ``initial_config`` plus :meth:`adapt`,
    :meth:`reconfig_cost` and :meth:`performs`. Small configuration spaces may
    also implement :meth:`enumerate_configs`; systems with an execution-cost
    model override :meth:`exec_cost` and set ``has_exec_cost``.
    """

    initial_config: Any
    has_exec_cost: bool = False

    @abc.abstractmethod
    def adapt(self, config, task: Task, rng: np.random.Generator) -> tuple[Any, float]:
        """Return ``(new_config, adaption_cost)``; cost is ``inf`` on failure."""

    @abc.abstractmethod
    def reconfig_cost(self, a, b) -> float:
        ...

    @abc.abstractmethod
    def performs(self, config, task: Task) -> bool:
        ...

    def enumerate_configs(self) -> Iterable:
        raise NotImplementedError(f"{type(self).__name__} cannot enumerate its configurations")

    def exec_cost(self, config, x) -> float:
        return 0.0

    def exec_inputs(self) -> Sequence:
        return ()


@dataclass(frozen=True)
class Estimate:
    """Mean over finite trials, its standard error and the failure count."""

    mean: float
    stderr: float
    n: int
    n_failed: int = 0

    @property
    def failure_fraction(self) -> float:
        return self.n_failed / self.n if self.n else 0.0

    @classmethod
    def from_samples(cls, samples: Sequence[float], sign: float = 1.0) -> "Estimate":
        x = np.asarray(samples, dtype=float)
        finite = x[np.isfinite(x)]
        n_failed = int(len(x) - len(finite))
        if len(finite) == 0:
            return cls(sign * INF, INF, len(x), n_failed)
        se = float(finite.std(ddof=1) / math.sqrt(len(finite))) if len(finite) > 1 else 0.0
        return cls(sign * float(finite.mean()), se, len(x), n_failed)


class MinReco(NamedTuple):
    cost: float
    exact: bool  # False: min over sampled solutions, an upper bound on the true minimum


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def trial_rngs(rng, n: int) -> list[np.random.Generator]:
    return _as_rng(rng).spawn(n)


# -- histories ---------------------------------------------------------------

def sample_history(context: TaskContext, n: int, rng) -> TaskHistory:
    if n < 0:
        raise ConfigurationError("history length must be nonnegative")
    rng = _as_rng(rng)
    entries, prev = [], None
    for _ in range(n):
        prev = context.draw(rng, prev)
        entries.append(context.tasks[prev].id)
    return TaskHistory(tuple(entries))


# -- reconfigurability -------------------------------------------------------

def solution_set(system: AdaptiveSystem, task: Task) -> list:
    return [g for g in system.enumerate_configs() if system.performs(g, task)]


def min_reconfiguration_cost(system: AdaptiveSystem, t1: Task, t2: Task,
                             solutions: tuple[Sequence, Sequence] | None = None) -> MinReco:
    """Cheapest reconfiguration between any solution of ``t1`` and of ``t2``.

    Without ``solutions`` the configuration space is enumerated and the result
    is exact. With sampled solution sets the result is only an upper bound.
    """
    if solutions is None:
        s1, s2, exact = solution_set(system, t1), solution_set(system, t2), True
    else:
        (s1, s2), exact = solutions, False
    if len(s1) == 0 or len(s2) == 0:
        return MinReco(INF, exact)
    best = min(system.reconfig_cost(a, b) for a, b in itertools.product(s1, s2))
    return MinReco(float(best), exact)


def min_reco_matrix(system: AdaptiveSystem, context: TaskContext) -> np.ndarray:
    sols = [solution_set(system, t) for t in context.tasks]
    n = len(sols)
    out = np.zeros((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        if not sols[i] or not sols[j]:
            out[i, j] = INF
        elif i != j:
            out[i, j] = min(system.reconfig_cost(a, b) for a in sols[i] for b in sols[j])
    return out


def worst_case_reconfigurability(system: AdaptiveSystem, context: TaskContext,
                                 matrix: np.ndarray | None = None) -> float:
    C = min_reco_matrix(system, context) if matrix is None else matrix
    return -float(C.max())


def average_case_reconfigurability(system: AdaptiveSystem, context: TaskContext,
                                   n_samples: int | None = None, rng=None,
                                   matrix: np.ndarray | None = None) -> Estimate:
    """Negative expected min-reco cost of two independent tasks.

    ``n_samples=None`` computes the expectation exactly from the weights;
    otherwise pairs are drawn by Monte Carlo.
    """
    C = min_reco_matrix(system, context) if matrix is None else matrix
    w = context.pair_weights()
    if n_samples is None:
        support = w > 0
        sub = C[np.ix_(support, support)]
        if np.isinf(sub).any():
            return Estimate(-INF, 0.0, 1, 1)
        return Estimate(-float(w[support] @ sub @ w[support]), 0.0, 1)
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    rng = _as_rng(rng)
    i = rng.choice(len(w), size=n_samples, p=w)
    j = rng.choice(len(w), size=n_samples, p=w)
    return Estimate.from_samples(C[i, j], sign=-1.0)


# -- adaptation and total cost -------------------------------------------------

def drive(system: AdaptiveSystem, context: TaskContext, history: Iterable, rng, config=None):
    """Adapt through ``history`` from ``config`` (default the initial config).

    Returns ``(config, per_step_costs)``; stops at the first failure.
    """
    config = system.initial_config if config is None else config
    costs = []
    for task_id in history:
        config, c = system.adapt(config, context.task(task_id), rng)
        costs.append(float(c))
        if math.isinf(c):
            break
    return config, costs


def adaptability(system: AdaptiveSystem, context: TaskContext, n: int, n_trials: int, rng) -> Estimate:
    """Negative mean cost of adapting to a fresh task after an ``n``-task history.

    Trials where the history or the test task cannot be adapted to count as
    failures. In a Markov context the test task continues the walk.
    """
    if n < 0 or n_trials < 1:
        raise ConfigurationError("need n >= 0 and n_trials >= 1")
    costs = []
    for trng in trial_rngs(rng, n_trials):
        history = sample_history(context, n, trng)
        config, steps = drive(system, context, history, trng)
        if steps and math.isinf(steps[-1]):
            costs.append(INF)
            continue
        prev = context.index(history.entries[-1]) if n else None
        test = context.tasks[context.draw(trng, prev)]
        _, c = system.adapt(config, test, trng)
        costs.append(float(c))
    return Estimate.from_samples(costs, sign=-1.0)


def execution_cost(system: AdaptiveSystem, config, mode: str = "worst",
                   weights: Sequence[float] | None = None) -> float:
    """Worst-, best- or average-case execution cost over the system's inputs."""
    if not system.has_exec_cost:
        return 0.0
    xs = list(system.exec_inputs())
    if not xs:
        return 0.0
    costs = np.array([system.exec_cost(config, x) for x in xs], dtype=float)
    if mode == "worst":
        return float(costs.max())
    if mode == "best":
        return float(costs.min())
    if mode == "average":
        p = np.full(len(xs), 1.0 / len(xs)) if weights is None else np.asarray(weights, float)
        return float(costs @ p)
    raise ConfigurationError(f"unknown execution cost mode {mode!r}")


@dataclass
class TotalCost:
    total: float
    adaption: list[float] = field(default_factory=list)
    run: list[float] = field(default_factory=list)
    run_cost_modeled: bool = False


def total_cost(system: AdaptiveSystem, tasks: Sequence[Task], rng, config=None) -> TotalCost:
    """Sum of adaption plus execution cost over a task sequence."""
    if len(tasks) == 0:
        raise ConfigurationError("task sequence must be nonempty")
    rng = _as_rng(rng)
    config = system.initial_config if config is None else config
    report = TotalCost(0.0, run_cost_modeled=system.has_exec_cost)
    for task in tasks:
        config, c = system.adapt(config, task, rng)
        report.adaption.append(float(c))
        if math.isinf(c):
            report.total = INF
            return report
        r = execution_cost(system, config)
        report.run.append(r)
        report.total += float(c) + r
    return report


# -- task richness and diversity ----------------------------------------------

def _budget(b) -> float:
    return (b if isinstance(b, CostBudget) else CostBudget(float(b))).budget


def _affordable_prefix(system, context, budget, rng, max_tasks):
    """Tasks of one streamed sequence whose cumulative cost stays below budget."""
    config, spent, done, prev = system.initial_config, 0.0, [], None
    while len(done) < max_tasks:
        prev = context.draw(rng, prev)
        task = context.tasks[prev]
        config, c = system.adapt(config, task, rng)
        if math.isinf(c):
            break
        spent += float(c) + execution_cost(system, config)
        if not spent < budget:
            break
        done.append(task)
    return done


def task_richness(system: AdaptiveSystem, context: TaskContext, budget, n_trials: int, rng,
                  max_tasks: int = 10_000) -> Estimate:
    """Mean number of streamed tasks completed strictly within the budget."""
    b = _budget(budget)
    counts = [len(_affordable_prefix(system, context, b, trng, max_tasks))
              for trng in trial_rngs(rng, n_trials)]
    return Estimate.from_samples(counts)


def path_length(tasks: Sequence[Task], distance: TaskDistance) -> float:
    """``1 + sum of consecutive distances``; an empty sequence has length 0."""
    if not tasks:
        return 0.0
    return 1.0 + sum(distance(a, b) for a, b in zip(tasks, tasks[1:]))


def task_diversity(system: AdaptiveSystem, context: TaskContext, distance: TaskDistance,
                   budget, n_trials: int, rng, max_tasks: int = 10_000) -> Estimate:
    b = _budget(budget)
    lengths = [path_length(_affordable_prefix(system, context, b, trng, max_tasks), distance)
               for trng in trial_rngs(rng, n_trials)]
    return Estimate.from_samples(lengths)


# -- multi-objective -----------------------------------------------------------

def pareto_dominates(perf_a: Sequence[float], perf_b: Sequence[float]) -> bool:
    """True iff ``perf_a`` is at least as good everywhere and better somewhere."""
    a = np.asarray(perf_a, dtype=float)
    b = np.asarray(perf_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError("performance vectors must be nonempty and of equal length")
    return bool(np.all(b <= a) and np.any(b < a))
