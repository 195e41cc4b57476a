"""Brute-force verification suites behind ``flexsys oracle``.

Each check compares a production routine with a deliberately naive, independent
reimplementation: a pure-Python bit decoder and gate simulator for circuits,
and direct enumeration over target sets for hypercube systems.

Faults can be injected into the production side to confirm the suites notice
them: set ``FLEXSYS_FAULT`` to a comma-separated list of names from
:data:`FAULT_NAMES`, or use :func:`injected`.
"""

from __future__ import annotations

import contextlib
import itertools
import math
import os
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import circuits as cc
from . import formalism as fm
from .hypercube import random_instance

FAULT_ENV = "FLEXSYS_FAULT"
FAULT_NAMES = ("evaluator", "decoder", "min_reco", "estimator")
SCOPES = ("circuit", "formalism", "all")

_active: set[str] = set()


def active_faults() -> set[str]:
    env = {f.strip() for f in os.environ.get(FAULT_ENV, "").split(",") if f.strip()}
    unknown = env - set(FAULT_NAMES)
    if unknown:
        raise ValueError(f"unknown fault names {sorted(unknown)}")
    return env | _active


@contextlib.contextmanager
def injected(*names: str):
    for n in names:
        if n not in FAULT_NAMES:
            raise ValueError(f"unknown fault {n!r}")
    before = set(_active)
    _active.update(names)
    try:
        yield
    finally:
        _active.clear()
        _active.update(before)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.3f}s)"


# -- production side, with optional faults -------------------------------------

def _tables(pop, params, policy):
    t = cc.population_tables(pop, params, policy)
    if "evaluator" in active_faults():
        t = t.copy()
        t[::7] ^= np.uint64(1)
    return t


def _decode(genotype, params, policy):
    topo = cc.decode(genotype, params, policy)
    if "decoder" in active_faults():
        pairs = list(topo.gate_inputs)
        a, b = pairs[0]
        pairs[0] = (b, a) if a != b else ((a + 1) % params.n_sources, b)
        topo = cc.CircuitTopology(tuple(pairs), (topo.output_source + 1) % params.n_sources, topo.d)
    return topo


def _min_reco(system, t1, t2):
    c = fm.min_reconfiguration_cost(system, t1, t2).cost
    return c + 1 if "min_reco" in active_faults() and c > 0 else c


def _avg_reco_mc(system, ctx, n, rng, matrix):
    est = fm.average_case_reconfigurability(system, ctx, n_samples=n, rng=rng, matrix=matrix)
    if "estimator" in active_faults():
        est = fm.Estimate(est.mean * 1.25, est.stderr, est.n, est.n_failed)
    return est


# -- naive circuit oracle --------------------------------------------------------

def naive_decode(bits, d: int, M: int, feedforward: bool):
    """Read the wiring bit by bit: 2M gate sources then the output source."""
    S = M + d
    m = max(1, math.ceil(math.log2(S)))
    vals = []
    for k in range(2 * M + 1):
        v = 0
        for b in bits[k * m:(k + 1) * m]:
            v = v * 2 + int(b)
        vals.append(v)
    gates = []
    for i in range(M):
        mod = d + i if feedforward else S
        gates.append((vals[2 * i] % mod, vals[2 * i + 1] % mod))
    return gates, vals[-1] % S


def recursive_eval(gates, out: int, x, d: int) -> int:
    """Feedforward evaluation by recursion from the output source."""
    def value(s):
        if s < d:
            return x[s]
        a, b = gates[s - d]
        return cc.nand(value(a), value(b))
    return value(out)


def simulated_eval(gates, out: int, x, d: int) -> int:
    """Synchronous simulation from all-zero gates; unsettled outputs read 0."""
    M = len(gates)
    cone, stack = {out}, [out]
    while stack:
        s = stack.pop()
        if s >= d:
            for t in gates[s - d]:
                if t not in cone:
                    cone.add(t)
                    stack.append(t)
    state = list(x) + [0] * M

    def step(st):
        return list(x) + [cc.nand(st[a], st[b]) for a, b in gates]

    for _ in range(M + 1):
        state = step(state)
    after = step(state)
    if any(after[s] != state[s] for s in cone if s >= d):
        return 0
    return state[out]


def _inputs(d: int):
    return [tuple((i >> (d - 1 - j)) & 1 for j in range(d)) for i in range(2 ** d)]


def _check(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def check_encoding_arithmetic():
    p = cc.CircuitParams()
    ok = (p.m, p.B) == (4, 100)
    return ok, f"d={p.d} M={p.M} -> m={p.m} B={p.B}"


def check_feedforward_oracle(n: int = 1000, seed: int = 11):
    """Packed evaluator vs. recursive oracle; timed over the packed side only."""
    params = cc.CircuitParams(policy=cc.FEEDFORWARD)
    pop = np.random.default_rng(seed).integers(0, 2, size=(n, params.B), dtype=np.uint8)
    cc.population_tables(pop[:1], params, cc.FEEDFORWARD)  # compile outside the timed window
    t0 = time.perf_counter()
    tables = _tables(pop, params, cc.FEEDFORWARD)
    fast = np.array([cc.unpack_table(t, params) for t in tables])
    elapsed = time.perf_counter() - t0
    xs = _inputs(params.d)
    bad = 0
    for p in range(n):
        gates, out = naive_decode(pop[p], params.d, params.M, True)
        ref = [recursive_eval(gates, out, x, params.d) for x in xs]
        bad += int(not np.array_equal(fast[p], ref))
    ok = bad == 0 and elapsed < 1.0
    return ok, f"{n} genotypes x {len(xs)} inputs, {bad} mismatches, evaluator {elapsed * 1e3:.1f} ms"


def check_settle_oracle(n: int = 300, seed: int = 12):
    params = cc.CircuitParams(policy=cc.SETTLE)
    pop = np.random.default_rng(seed).integers(0, 2, size=(n, params.B), dtype=np.uint8)
    tables = _tables(pop, params, cc.SETTLE)
    xs = _inputs(params.d)
    bad = 0
    for p in range(n):
        gates, out = naive_decode(pop[p], params.d, params.M, False)
        ref = [simulated_eval(gates, out, x, params.d) for x in xs]
        bad += int(not np.array_equal(cc.unpack_table(tables[p], params), ref))
    return bad == 0, f"{n} genotypes, {bad} mismatches"


def check_decode_roundtrip(n: int = 200, seed: int = 13):
    params = cc.CircuitParams()
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        g = rng.integers(0, 2, size=params.B, dtype=np.uint8)
        topo = _decode(g, params, cc.SETTLE)
        gates, out = naive_decode(g, params.d, params.M, False)
        if list(topo.gate_inputs) != gates or topo.output_source != out:
            bad += 1
            continue
        # indices < 2**m all survive the modulus here, so encode inverts decode on them
        again = _decode(cc.encode(topo, params), params, cc.SETTLE)
        bad += int(again != topo)
    return bad == 0, f"{n} genotypes, {bad} decode mismatches"


def check_goal_tables():
    bad = []
    for f, g, h in itertools.product(cc.BOOLEAN_OPS, repeat=3):
        fam = cc.GoalFamily(f, g, h)
        goal = cc.modular_goal(fam)
        F, G, H = (cc.BOOLEAN_OPS[o] for o in (f, g, h))
        for x in _inputs(4):
            if goal(x) != F(G(x[0], x[1]), H(x[2], x[3])):
                bad.append(fam.label)
                break
    return not bad, f"{len(cc.BOOLEAN_OPS) ** 3} families, {len(bad)} wrong"


def check_population_fitness(n: int = 500, seed: int = 14):
    params = cc.CircuitParams()
    pop = np.random.default_rng(seed).integers(0, 2, size=(n, params.B), dtype=np.uint8)
    tables = _tables(pop, params, params.policy)
    goal = cc.modular_goal(cc.GoalFamily("AND", "XOR", "XOR"))
    fast = cc.population_fitness(tables, goal, params)
    slow = np.array([cc.fitness(cc.unpack_table(t, params), goal) for t in tables])
    return bool(np.array_equal(fast, slow)), f"{n} genotypes"


CIRCUIT_CHECKS = {
    "encoding arithmetic": check_encoding_arithmetic,
    "feedforward evaluator vs recursive oracle": check_feedforward_oracle,
    "settle evaluator vs gate simulation": check_settle_oracle,
    "decode vs bitwise reader": check_decode_roundtrip,
    "modular goal tables": check_goal_tables,
    "packed fitness vs table fitness": check_population_fitness,
}


# -- formalism oracle on hypercubes ----------------------------------------------

def _instances(n: int, seed: int, k_max: int = 8):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        k = int(rng.integers(3, k_max + 1))
        yield random_instance(k, int(rng.integers(2, 6)), rng)


def _direct_min_reco(sys_, a, b) -> float:
    return float(min(bin(x ^ y).count("1") for x in sys_.targets[a.id] for y in sys_.targets[b.id]))


def check_min_reco_exact(n: int = 100, seed: int = 21):
    bad = 0
    for s in _instances(n, seed):
        for a, b in itertools.product(s.tasks, repeat=2):
            bad += int(_min_reco(s, a, b) != _direct_min_reco(s, a, b))
    return bad == 0, f"{n} instances, {bad} pair mismatches"


def check_min_reco_sampled_bound(n: int = 100, seed: int = 22):
    rng = np.random.default_rng(seed + 1)
    bad = 0
    for s in _instances(n, seed):
        for a, b in itertools.product(s.tasks, repeat=2):
            sa, sb = sorted(s.targets[a.id]), sorted(s.targets[b.id])
            sub = (list(rng.choice(sa, size=int(rng.integers(1, len(sa) + 1)), replace=False)),
                   list(rng.choice(sb, size=int(rng.integers(1, len(sb) + 1)), replace=False)))
            sub = ([int(x) for x in sub[0]], [int(x) for x in sub[1]])
            sampled = fm.min_reconfiguration_cost(s, a, b, solutions=sub)
            bad += int(sampled.exact or sampled.cost < _min_reco(s, a, b))
    return bad == 0, f"{n} instances, {bad} sampled minima below the exact one"


def check_worst_le_average(n: int = 100, seed: int = 23):
    bad = 0
    for s in _instances(n, seed):
        ctx = s.context(np.random.default_rng(seed).dirichlet(np.ones(len(s.tasks))))
        C = fm.min_reco_matrix(s, ctx)
        if fm.worst_case_reconfigurability(s, ctx, C) > fm.average_case_reconfigurability(s, ctx, matrix=C).mean:
            bad += 1
    return bad == 0, f"{n} instances, {bad} violations of rho_wor <= rho_avg"


def check_average_mc(n: int = 10, seed: int = 24, samples: int = 100_000):
    """Monte Carlo average-case reconfigurability within 3 standard errors of exact.

    The band is per estimate, so many instances would make a chance excursion
    likely; a handful of large-sample estimates keeps the check meaningful.
    """
    worst_z = 0.0
    bad = 0
    rng = np.random.default_rng(seed + 1)
    for s in _instances(n, seed):
        ctx = s.context()
        C = np.array([[_direct_min_reco(s, a, b) for b in s.tasks] for a in s.tasks])
        exact = -float(ctx.weights @ C @ ctx.weights)
        est = _avg_reco_mc(s, ctx, samples, rng, fm.min_reco_matrix(s, ctx))
        z = abs(est.mean - exact) / est.stderr if est.stderr > 0 else (0.0 if est.mean == exact else math.inf)
        worst_z = max(worst_z, z)
        bad += int(z > 3.0)
    return bad == 0, f"{n} instances, {bad} outside 3 SE, max |z| = {worst_z:.2f}"


def adaptability_gaps(system, ctx, ns=(0, 1, 2, 4, 8), trials: int = 200, seed: int = 0):
    """``(n, mean adaption cost, stderr, c_avg_reco)`` rows for the bound check."""
    c_avg = -fm.average_case_reconfigurability(system, ctx).mean
    rows = []
    for n in ns:
        est = fm.adaptability(system, ctx, n, trials, np.random.default_rng([seed, n]))
        rows.append((n, -est.mean, est.stderr, c_avg))
    return rows


def check_adaptability_bound(n_instances: int = 10, seed: int = 25, trials: int = 200):
    """-alpha_n >= c_avg_reco, and the gap does not grow with n beyond 3 SE."""
    bad_bound = bad_trend = 0
    for i, s in enumerate(_instances(n_instances, seed)):
        rows = adaptability_gaps(s, s.context(), trials=trials, seed=seed + i)
        for n, cost, se, c_avg in rows:
            bad_bound += int(cost + 3 * se < c_avg)
        for (_, c0, s0, _), (_, c1, s1, _) in zip(rows, rows[1:]):
            bad_trend += int(c1 - c0 > 3 * math.hypot(s0, s1))
    return bad_bound == 0 and bad_trend == 0, \
        f"{n_instances} instances x n in (0,1,2,4,8) x {trials} trials, " \
        f"{bad_bound} bound and {bad_trend} trend violations"


def check_hypercube_adapt():
    """Greedy adaptation costs exactly the Hamming distance to the nearest target."""
    bad = 0
    for s in _instances(50, 26):
        for t in s.tasks:
            for x in range(0, 2 ** s.k, max(1, 2 ** s.k // 16)):
                cfg, c = s.adapt(x, t, None)
                bad += int(not s.performs(cfg, t) or c != min(bin(x ^ y).count("1") for y in s.targets[t.id]))
    return bad == 0, f"{bad} mismatches"


FORMALISM_CHECKS = {
    "min-reco enumeration vs direct": check_min_reco_exact,
    "sampled min-reco is an upper bound": check_min_reco_sampled_bound,
    "worst-case <= average-case reconfigurability": check_worst_le_average,
    "Monte Carlo average-case within 3 SE": check_average_mc,
    "adaptability bound and trend": check_adaptability_bound,
    "hypercube adaptation cost": check_hypercube_adapt,
}


def run_suite(scope: str = "all") -> list[CheckResult]:
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}, got {scope!r}")
    checks = {}
    if scope in ("circuit", "all"):
        checks.update(CIRCUIT_CHECKS)
    if scope in ("formalism", "all"):
        checks.update(FORMALISM_CHECKS)
    return [_check(name, fn) for name, fn in checks.items()]
