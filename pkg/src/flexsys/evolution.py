"""Genetic algorithm over circuit genotypes, goal schedules and the random baseline.

The GA is a plain generational one: elitism, tournament selection, single-point
crossover and per-bit mutation. A population is a ``(pop_size, B)`` array of
0/1 ``uint8``. All randomness of a run comes from the one generator handed to
it; fitness evaluation is deterministic, so results do not depend on how the
evaluation is scheduled.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import (BooleanGoal, CircuitParams, genotype_table, hamming, fitness as table_fitness,
                       population_fitness, population_tables)
from .formalism import INF, AdaptiveSystem, ConfigurationError, Task, TaskContext

FG = "FG"
MVG = "MVG"


@dataclass(frozen=True)
class GAParams:
    pop_size: int = 1000
    mutation_rate: float | None = None  # None: 1 / B
    crossover_rate: float = 0.5
    elite_count: int = 1
    tournament_size: int = 2
    max_generations: int = 2000

    def __post_init__(self):
        if self.pop_size < 1:
            raise ConfigurationError("pop_size must be positive")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigurationError("mutation_rate must lie in [0, 1]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigurationError("crossover_rate must lie in [0, 1]")
        if not 0 <= self.elite_count <= self.pop_size:
            raise ConfigurationError("elite_count must lie in [0, pop_size]")
        if self.tournament_size < 1:
            raise ConfigurationError("tournament_size must be positive")
        if self.max_generations < 0:
            raise ConfigurationError("max_generations must be nonnegative")

    def mutation_for(self, circuit: CircuitParams) -> float:
        return 1.0 / circuit.B if self.mutation_rate is None else self.mutation_rate


@dataclass(frozen=True)
class Schedule:
    """Goal schedule for pretraining: FG never switches, MVG walks every epoch."""

    kind: str = MVG
    epoch_len: int = 20
    transition: np.ndarray | None = None  # None: uniform over training goals
    reset_on_switch: bool = False

    def __post_init__(self):
        if self.kind not in (FG, MVG):
            raise ConfigurationError(f"schedule kind must be FG or MVG, got {self.kind!r}")
        if self.epoch_len < 1:
            raise ConfigurationError("epoch_len must be at least 1")
        if self.transition is not None:
            Q = np.asarray(self.transition, dtype=float)
            if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q.sum(axis=1), 1.0, atol=1e-9):
                raise ConfigurationError("transition matrix must be square and row-stochastic")
            object.__setattr__(self, "transition", Q)

    def matrix(self, n_goals: int) -> np.ndarray:
        if self.transition is None:
            return np.full((n_goals, n_goals), 1.0 / n_goals)
        if self.transition.shape != (n_goals, n_goals):
            raise ConfigurationError("schedule transition matrix does not match the training context")
        return self.transition


@dataclass(frozen=True)
class NormalizedFitness:
    F: float
    F_r: float

    @property
    def F_N(self) -> float:
        return (self.F - self.F_r) / (1.0 - self.F_r)


def success_threshold(F_r: float, fn_threshold: float = 0.8) -> float:
    """Raw fitness at which normalized fitness reaches ``fn_threshold``."""
    return F_r + (1.0 - F_r) * fn_threshold


def genotype_hash(genotype: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(genotype, dtype=np.uint8).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class GenerationRecord:
    gen: int
    goal: str
    best_f: float
    mean_f: float
    best_hash: str

    def to_json(self) -> str:
        return json.dumps({"gen": self.gen, "goal": self.goal, "best_f": self.best_f,
                           "mean_f": self.mean_f, "best_hash": self.best_hash})


@dataclass
class RunTrace:
    records: list[GenerationRecord] = field(default_factory=list)
    solved: bool = False
    generations: int = 0
    best_genotype: np.ndarray | None = None
    final_goal: str | None = None

    def append(self, rec: GenerationRecord) -> None:
        if self.records and rec.gen <= self.records[-1].gen:
            raise ValueError("generation indices must increase")
        self.records.append(rec)

    def goals(self) -> list[str]:
        return [r.goal for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def digest(self) -> str:
        h = hashlib.sha256(self.to_jsonl().encode())
        if self.best_genotype is not None:
            h.update(np.ascontiguousarray(self.best_genotype, dtype=np.uint8).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class GenStats:
    best_f: float
    mean_f: float
    best_index: int


# -- operators -----------------------------------------------------------------

def init_population(ga: GAParams, circuit: CircuitParams, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=(ga.pop_size, circuit.B), dtype=np.uint8)


def evaluate(population: np.ndarray, goal: BooleanGoal, circuit: CircuitParams) -> np.ndarray:
    return population_fitness(population_tables(population, circuit), goal, circuit)


def best_index(fit: np.ndarray) -> int:
    """Highest fitness, lowest index among ties."""
    return int(np.argmax(fit))


def _stats(fit: np.ndarray) -> GenStats:
    return GenStats(float(fit.max()), float(fit.mean()), best_index(fit))


def step_generation(population: np.ndarray, goal: BooleanGoal, ga: GAParams,
                    circuit: CircuitParams, rng: np.random.Generator,
                    fit: np.ndarray | None = None) -> tuple[np.ndarray, GenStats]:
    """One generation. Returns the next population and stats of the current one.

    Elites keep their relative order at the front of the next population.
    """
    P, B = population.shape
    if P == 0:
        raise ValueError("population is empty")
    if fit is None:
        fit = evaluate(population, goal, circuit)
    order = np.argsort(-fit, kind="stable")
    elites = population[np.sort(order[: ga.elite_count])]
    n = P - len(elites)
    if n == 0:
        return elites.copy(), _stats(fit)

    k = min(ga.tournament_size, P)
    contestants = rng.integers(0, P, size=(2 * n, k))
    winners = contestants[np.arange(2 * n), np.argmax(fit[contestants], axis=1)]
    mothers = population[winners[:n]]
    fathers = population[winners[n:]]

    cross = rng.random(n) < ga.crossover_rate
    points = rng.integers(1, B, size=n) if B > 1 else np.ones(n, dtype=np.int64)
    take_mother = (np.arange(B)[None, :] < points[:, None]) | ~cross[:, None]
    children = np.where(take_mother, mothers, fathers)
    # iid per-bit flips: binomial count, then positions without replacement
    n_flips = rng.binomial(n * B, ga.mutation_for(circuit))
    flat = children.reshape(-1)
    flat[rng.choice(n * B, size=n_flips, replace=False)] ^= 1
    return np.concatenate([elites, children]), _stats(fit)


def estimate_random_baseline(ga: GAParams, circuit: CircuitParams, goals: Sequence[BooleanGoal],
                             n_populations: int, rng: np.random.Generator) -> np.ndarray:
    """Mean over fresh random populations of the best fitness, per goal."""
    if n_populations < 1:
        raise ConfigurationError("n_populations must be at least 1")
    maxima = np.zeros((n_populations, len(goals)))
    for i in range(n_populations):
        tables = population_tables(init_population(ga, circuit, rng), circuit)
        for j, goal in enumerate(goals):
            maxima[i, j] = population_fitness(tables, goal, circuit).max()
    return maxima.mean(axis=0)


@dataclass
class AdaptResult:
    solved: bool
    generations: int
    genotype: np.ndarray | None
    population: np.ndarray
    trace: RunTrace


def run_until_solved(population: np.ndarray, goal: BooleanGoal, eps: float, ga: GAParams,
                     circuit: CircuitParams, rng: np.random.Generator,
                     goal_id: str | None = None) -> AdaptResult:
    """Evolve until some genotype reaches fitness ``eps`` or the cap is hit.

    The cost is the number of generations stepped; a population that already
    contains a solver costs 0. The returned genotype is the lowest-index solver.
    """
    goal_id = goal_id or goal.label
    trace = RunTrace()
    gen = 0
    while True:
        fit = evaluate(population, goal, circuit)
        stats = _stats(fit)
        trace.append(GenerationRecord(gen, goal_id, stats.best_f, stats.mean_f,
                                      genotype_hash(population[stats.best_index])))
        solvers = np.flatnonzero(fit >= eps)
        if len(solvers):
            genotype = population[solvers[0]].copy()
            trace.solved, trace.generations, trace.best_genotype = True, gen, genotype
            return AdaptResult(True, gen, genotype, population, trace)
        if gen >= ga.max_generations:
            trace.generations = gen
            trace.best_genotype = population[stats.best_index].copy()
            return AdaptResult(False, gen, None, population, trace)
        population, _ = step_generation(population, goal, ga, circuit, rng, fit)
        gen += 1


def training_goals(context: TaskContext) -> list[BooleanGoal]:
    goals = [t.goal for t in context.tasks]
    if not all(isinstance(g, BooleanGoal) for g in goals):
        raise ConfigurationError("training tasks must carry BooleanGoal oracles")
    return goals


def run_schedule(schedule: Schedule, context: TaskContext, ga: GAParams, circuit: CircuitParams,
                 total_generations: int, rng: np.random.Generator,
                 population: np.ndarray | None = None) -> tuple[np.ndarray, RunTrace]:
    """Pretrain a population under a fixed or modularly varying goal.

    FG evolves against the first task throughout. MVG starts from a uniformly
    drawn task and, every ``epoch_len`` generations, draws the next one from the
    transition matrix; the population carries over unless ``reset_on_switch``.
    The trace's ``best_genotype`` is the best genotype for the final goal.
    """
    goals = training_goals(context)
    ids = [str(t.id) for t in context.tasks]
    Q = schedule.matrix(len(goals))
    if population is None:
        population = init_population(ga, circuit, rng)
    trace = RunTrace()
    current = 0 if schedule.kind == FG else int(rng.integers(len(goals)))
    for gen in range(total_generations):
        if schedule.kind == MVG and gen > 0 and gen % schedule.epoch_len == 0:
            nxt = int(rng.choice(len(goals), p=Q[current]))
            if schedule.reset_on_switch and nxt != current:
                population = init_population(ga, circuit, rng)
            current = nxt
        population, stats = step_generation(population, goals[current], ga, circuit, rng)
        trace.append(GenerationRecord(gen, ids[current], stats.best_f, stats.mean_f, ""))
    fit = evaluate(population, goals[current], circuit)
    trace.generations = total_generations
    trace.best_genotype = population[best_index(fit)].copy()
    trace.final_goal = ids[current]
    return population, trace


# -- the GA as an adaptive system -----------------------------------------------

@dataclass(frozen=True, eq=False)
class PopulationState:
    """Configuration of the circuit system: the population and its current best."""

    population: np.ndarray
    best: np.ndarray


class CircuitAdaptiveSystem(AdaptiveSystem):
    """Circuit plus GA, viewed as one self-adapting system.

    Tasks carry a :class:`BooleanGoal` as their goal oracle and the success
    threshold as ``perf_threshold``.
    """

    def __init__(self, population: np.ndarray, ga: GAParams, circuit: CircuitParams,
                 best: np.ndarray | None = None):
        self.ga = ga
        self.circuit = circuit
        best = population[0] if best is None else best
        self.initial_config = PopulationState(population, np.asarray(best).copy())
        self.last_result: AdaptResult | None = None

    def performs(self, config, task: Task) -> bool:
        genome = config.best if isinstance(config, PopulationState) else config
        table = genotype_table(genome, self.circuit)
        return table_fitness(table, task.goal) >= task.perf_threshold

    def reconfig_cost(self, a, b) -> float:
        ga_ = a.best if isinstance(a, PopulationState) else a
        gb_ = b.best if isinstance(b, PopulationState) else b
        return float(hamming(ga_, gb_))

    def adapt(self, config: PopulationState, task: Task, rng: np.random.Generator):
        if self.performs(config, task):
            self.last_result = None
            return config, 0.0
        res = run_until_solved(config.population, task.goal, task.perf_threshold,
                               self.ga, self.circuit, rng, goal_id=str(task.id))
        self.last_result = res
        if not res.solved:
            return config, INF
        return PopulationState(res.population, res.genotype), float(res.generations)


def circuit_adaptive_system(population: np.ndarray, ga: GAParams, circuit: CircuitParams,
                            best: np.ndarray | None = None) -> CircuitAdaptiveSystem:
    return CircuitAdaptiveSystem(population, ga, circuit, best)
