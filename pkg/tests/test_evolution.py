import numpy as np
import pytest

from flexsys import circuits as cc
from flexsys import evolution as ev
from flexsys.circuits import CircuitParams, GoalFamily, modular_goal
from flexsys.evolution import FG, MVG, GAParams, Schedule
from flexsys.formalism import ConfigurationError

CIRCUIT = CircuitParams()
GOAL = modular_goal(GoalFamily("AND", "XOR", "XOR"))
TRAIN = [GoalFamily.parse(s) for s in ("AND(XOR,XOR)", "OR(XOR,XOR)", "OR(EQ,EQ)")]


def _contexts():
    return cc.build_contexts(TRAIN, [GoalFamily.parse("NAND(XOR,XOR)")])


def _solver_for(goal_family: GoalFamily) -> np.ndarray:
    """Feedforward-safe genome that computes AND(XOR(x1,x2), XOR(x3,x4))."""
    assert goal_family.label == "AND(XOR,XOR)"
    # XOR(a,b) = NAND(NAND(a,n), NAND(b,n)) with n = NAND(a,b)
    gates = [(0, 1), (0, 4), (1, 4), (5, 6),        # g0..g3: XOR(x1,x2) at source 7
             (2, 3), (2, 8), (3, 8), (9, 10),       # g4..g7: XOR(x3,x4) at source 11
             (7, 11), (12, 12), (0, 0), (0, 0)]     # g8 = NAND, g9 = AND at source 13
    topo = cc.CircuitTopology(tuple(gates), output_source=13, d=4)
    return cc.encode(topo, CIRCUIT)


def test_planted_solver_is_perfect():
    g = _solver_for(TRAIN[0])
    for policy in (cc.SETTLE, cc.FEEDFORWARD):
        assert cc.fitness(cc.genotype_table(g, CIRCUIT, policy), GOAL) == 1.0


def test_ga_param_validation():
    with pytest.raises(ConfigurationError):
        GAParams(pop_size=0)
    with pytest.raises(ConfigurationError):
        GAParams(mutation_rate=1.5)
    with pytest.raises(ConfigurationError):
        GAParams(pop_size=10, elite_count=11)
    assert GAParams().mutation_for(CIRCUIT) == pytest.approx(0.01)


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        Schedule("XYZ")
    with pytest.raises(ConfigurationError):
        Schedule(MVG, epoch_len=0)
    with pytest.raises(ConfigurationError):
        Schedule(MVG, transition=[[0.5, 0.6], [1.0, 0.0]])


def test_init_population_shape_and_balance():
    pop = ev.init_population(GAParams(pop_size=5000), CIRCUIT, np.random.default_rng(0))
    assert pop.shape == (5000, 100)
    assert np.all(np.abs(pop.mean(axis=0) - 0.5) < 0.02)


def test_init_population_is_seeded():
    a = ev.init_population(GAParams(pop_size=50), CIRCUIT, np.random.default_rng(3))
    b = ev.init_population(GAParams(pop_size=50), CIRCUIT, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_identity_step():
    ga = GAParams(pop_size=40, mutation_rate=0.0, crossover_rate=0.0, elite_count=40)
    pop = ev.init_population(ga, CIRCUIT, np.random.default_rng(1))
    new, _ = ev.step_generation(pop, GOAL, ga, CIRCUIT, np.random.default_rng(2))
    assert np.array_equal(new, pop)


def test_population_size_constant_and_elitism():
    ga = GAParams(pop_size=200, elite_count=2)
    rng = np.random.default_rng(4)
    pop = ev.init_population(ga, CIRCUIT, rng)
    best = -1.0
    for _ in range(30):
        pop, stats = ev.step_generation(pop, GOAL, ga, CIRCUIT, rng)
        assert pop.shape == (200, 100)
        assert stats.best_f >= best
        best = stats.best_f


def test_step_fitness_agrees_with_truth_tables():
    ga = GAParams(pop_size=100)
    pop = ev.init_population(ga, CIRCUIT, np.random.default_rng(5))
    fit = ev.evaluate(pop, GOAL, CIRCUIT)
    for i in range(0, 100, 7):
        assert fit[i] == cc.fitness(cc.genotype_table(pop[i], CIRCUIT), GOAL)


def test_planted_solver_is_found_immediately():
    ga = GAParams(pop_size=100)
    pop = ev.init_population(ga, CIRCUIT, np.random.default_rng(6))
    pop[37] = _solver_for(TRAIN[0])
    _, stats = ev.step_generation(pop, GOAL, ga, CIRCUIT, np.random.default_rng(7))
    assert stats.best_f == 1.0
    res = ev.run_until_solved(pop, GOAL, 1.0, ga, CIRCUIT, np.random.default_rng(8))
    assert res.solved and res.generations == 0
    assert np.array_equal(res.genotype, pop[37])


def test_zero_generation_cap_fails():
    ga = GAParams(pop_size=20, max_generations=0)
    pop = np.zeros((20, 100), dtype=np.uint8)
    res = ev.run_until_solved(pop, GOAL, 1.0, ga, CIRCUIT, np.random.default_rng(0))
    assert not res.solved and res.generations == 0 and res.genotype is None


def test_best_index_prefers_lowest_index_on_ties():
    assert ev.best_index(np.array([0.5, 0.9, 0.9, 0.1])) == 1


def test_random_baseline_for_constant_zero_goal():
    zero = cc.BooleanGoal(np.zeros(16, dtype=np.uint8), "ZERO")
    F_r = ev.estimate_random_baseline(GAParams(pop_size=200), CIRCUIT, [zero, GOAL], 5,
                                      np.random.default_rng(0))
    assert F_r[0] == 1.0
    assert 0.0 <= F_r[1] <= 1.0


def test_random_baseline_variance_halves():
    ga = GAParams(pop_size=100)
    spread = {}
    for n in (4, 8):
        ests = [ev.estimate_random_baseline(ga, CIRCUIT, [GOAL], n, np.random.default_rng([n, r]))[0]
                for r in range(60)]
        spread[n] = np.var(ests)
    assert 0.25 < spread[8] / spread[4] < 1.0


def test_normalized_fitness_threshold():
    F_r = 0.85
    eps = ev.success_threshold(F_r)
    assert ev.NormalizedFitness(eps, F_r).F_N == pytest.approx(0.8)
    assert ev.NormalizedFitness(1.0, F_r).F_N == 1.0
    assert ev.NormalizedFitness(0.99, F_r).F_N < 1.0


def test_fg_schedule_single_goal():
    train, _ = _contexts()
    _, trace = ev.run_schedule(Schedule(FG), train, GAParams(pop_size=50), CIRCUIT, 60,
                               np.random.default_rng(0))
    assert set(trace.goals()) == {"AND(XOR,XOR)"}


def test_mvg_switches_on_epoch_boundaries():
    train, _ = _contexts()
    _, trace = ev.run_schedule(Schedule(MVG, epoch_len=20), train, GAParams(pop_size=30), CIRCUIT,
                               400, np.random.default_rng(1))
    goals = trace.goals()
    assert len(set(goals)) > 1
    for g in range(1, len(goals)):
        if goals[g] != goals[g - 1]:
            assert g % 20 == 0


def test_mvg_goal_frequencies():
    train, _ = _contexts()
    ga = GAParams(pop_size=2, elite_count=1)
    _, trace = ev.run_schedule(Schedule(MVG, epoch_len=1), train, ga, CIRCUIT, 10_000,
                               np.random.default_rng(2))
    goals = trace.goals()
    for label in ("AND(XOR,XOR)", "OR(XOR,XOR)", "OR(EQ,EQ)"):
        assert abs(goals.count(label) / 10_000 - 1 / 3) < 0.02


def test_schedule_is_deterministic():
    train, _ = _contexts()
    runs = [ev.run_schedule(Schedule(MVG, epoch_len=5), train, GAParams(pop_size=60), CIRCUIT, 40,
                            np.random.default_rng(9)) for _ in range(2)]
    assert runs[0][1].digest() == runs[1][1].digest()
    assert np.array_equal(runs[0][0], runs[1][0])


def test_reset_on_switch_redraws_population():
    train, _ = _contexts()
    ga = GAParams(pop_size=40)
    pop0 = ev.init_population(ga, CIRCUIT, np.random.default_rng(0))
    Q = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    sched = Schedule(MVG, epoch_len=3, transition=Q, reset_on_switch=True)
    pop, trace = ev.run_schedule(sched, train, ga, CIRCUIT, 4, np.random.default_rng(1), pop0.copy())
    assert len(set(trace.goals())) == 2
    assert not np.array_equal(pop, pop0)


def test_run_trace_rejects_non_increasing_generations():
    t = ev.RunTrace()
    t.append(ev.GenerationRecord(0, "a", 0.5, 0.4, ""))
    with pytest.raises(ValueError):
        t.append(ev.GenerationRecord(0, "a", 0.5, 0.4, ""))


def test_adaptive_system_zero_cost_when_already_solving():
    ga = GAParams(pop_size=30)
    pop = ev.init_population(ga, CIRCUIT, np.random.default_rng(0))
    solver = _solver_for(TRAIN[0])
    system = ev.circuit_adaptive_system(pop, ga, CIRCUIT, solver)
    task = cc.goal_task(TRAIN[0], 1.0)
    cfg, cost = system.adapt(system.initial_config, task, np.random.default_rng(1))
    assert cost == 0.0 and cfg is system.initial_config
    assert system.reconfig_cost(cfg, cfg) == 0.0


def test_adaptive_system_failure_is_infinite():
    ga = GAParams(pop_size=10, max_generations=2)
    pop = np.zeros((10, 100), dtype=np.uint8)
    system = ev.circuit_adaptive_system(pop, ga, CIRCUIT)
    _, cost = system.adapt(system.initial_config, cc.goal_task(TRAIN[0], 1.0), np.random.default_rng(0))
    assert cost == float("inf")


def test_adaptive_system_solves_easy_goal():
    ga = GAParams(pop_size=300, tournament_size=4)
    pop = ev.init_population(ga, CIRCUIT, np.random.default_rng(3))
    system = ev.circuit_adaptive_system(pop, ga, CIRCUIT)
    task = cc.goal_task(GoalFamily("AND", "AND", "AND"), 1.0)
    cfg, cost = system.adapt(system.initial_config, task, np.random.default_rng(4))
    assert np.isfinite(cost)
    assert system.performs(cfg, task)
    assert system.reconfig_cost(system.initial_config, cfg) == cc.hamming(pop[0], cfg.best)
