"""NAND-gate circuits encoded as fixed-length bit strings.

A genotype of ``B = m * (2M + 1)`` bits holds ``M`` gate genes followed by one
output gene. Each gate gene is two ``m``-bit wire indices (most significant bit
first); each index selects either a primary input (``0 .. d-1``) or a gate
output (``d .. d+M-1``). Every bit pattern decodes to a valid wiring.

Truth tables are indexed by the input vector read as an integer with ``x1`` as
the most significant bit, so for ``d = 4`` entry 5 is ``(x1, x2, x3, x4) =
(0, 1, 0, 1)``. Internally whole truth tables are packed into ``uint64`` masks
(bit ``i`` holds the output for input ``i``) which lets a population be
evaluated on all inputs at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .formalism import ConfigurationError, Task, TaskContext

SETTLE = "settle"
FEEDFORWARD = "feedforward"
CYCLE_POLICIES = (SETTLE, FEEDFORWARD)

MAX_INPUTS = 6  # 2**6 entries fill one uint64 mask


def nand(a: int, b: int) -> int:
    return 0 if (a and b) else 1


@dataclass(frozen=True)
class CircuitParams:
    """Size of the evolvable circuit.

    ``m`` and ``B`` are derived: ``m = ceil(log2(M + d))`` and
    ``B = m * (2M + 1)``. The defaults give ``m = 4`` and ``B = 100``.
    """

    d: int = 4
    M: int = 12
    policy: str = SETTLE

    def __post_init__(self):
        if not 1 <= self.d <= MAX_INPUTS:
            raise ValueError(f"d must be in [1, {MAX_INPUTS}], got {self.d}")
        if self.M < 1:
            raise ValueError(f"M must be positive, got {self.M}")
        if self.policy not in CYCLE_POLICIES:
            raise ValueError(f"unknown cycle policy {self.policy!r}")

    @property
    def n_sources(self) -> int:
        return self.M + self.d

    @property
    def m(self) -> int:
        return max(1, math.ceil(math.log2(self.M + self.d)))

    @property
    def B(self) -> int:
        return self.m * (2 * self.M + 1)

    @property
    def n_inputs(self) -> int:
        return 2 ** self.d

    @property
    def full_mask(self) -> np.uint64:
        return np.uint64((1 << self.n_inputs) - 1)


@dataclass(frozen=True)
class CircuitTopology:
    """Decoded wiring. ``gate_inputs[i]`` are the two sources of gate ``i``."""

    gate_inputs: tuple[tuple[int, int], ...]
    output_source: int
    d: int

    @property
    def M(self) -> int:
        return len(self.gate_inputs)


# -- genotypes ---------------------------------------------------------------

def random_genotype(params: CircuitParams, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=params.B, dtype=np.uint8)


def to_bitstring(genotype: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in np.asarray(genotype).ravel())


def from_bitstring(s: str) -> np.ndarray:
    if any(c not in "01" for c in s):
        raise ValueError("genotype strings may only contain '0' and '1'")
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def hamming(g1: np.ndarray, g2: np.ndarray) -> int:
    """Number of differing bits; the circuit system's reconfiguration cost."""
    g1 = np.asarray(g1)
    g2 = np.asarray(g2)
    if g1.shape != g2.shape:
        raise ValueError(f"genotype shapes differ: {g1.shape} vs {g2.shape}")
    return int(np.count_nonzero(g1 != g2))


def _index_weights(m: int) -> np.ndarray:
    return (1 << np.arange(m - 1, -1, -1)).astype(np.int64)


def decode_population(population: np.ndarray, params: CircuitParams,
                      policy: str | None = None):
    """Decode a ``(P, B)`` bit array into source index arrays.

    Returns ``(src_a, src_b, out)`` with shapes ``(P, M)``, ``(P, M)``, ``(P,)``.
    Raw indices are reduced modulo ``M + d``; under the feedforward policy gate
    ``i`` reduces modulo ``d + i`` so that it only sees inputs and earlier gates.
    """
    policy = policy or params.policy
    pop = np.asarray(population)
    if pop.ndim != 2 or pop.shape[1] != params.B:
        raise ValueError(f"expected population of shape (P, {params.B}), got {pop.shape}")
    m, M = params.m, params.M
    w = _index_weights(m)
    gates = pop[:, : 2 * m * M].reshape(len(pop), M, 2, m).astype(np.int64) @ w
    out = pop[:, 2 * m * M:].astype(np.int64) @ w
    if policy == FEEDFORWARD:
        gates = gates % (params.d + np.arange(M))[None, :, None]
    else:
        gates = gates % params.n_sources
    out = out % params.n_sources
    return gates[..., 0], gates[..., 1], out


def decode(genotype: np.ndarray, params: CircuitParams | None = None,
           policy: str | None = None) -> CircuitTopology:
    params = params or CircuitParams()
    a, b, out = decode_population(np.asarray(genotype)[None, :], params, policy)
    pairs = tuple((int(x), int(y)) for x, y in zip(a[0], b[0]))
    return CircuitTopology(gate_inputs=pairs, output_source=int(out[0]), d=params.d)


def encode(topology: CircuitTopology, params: CircuitParams | None = None) -> np.ndarray:
    """Inverse of :func:`decode` for indices below ``2**m``."""
    params = params or CircuitParams()
    m = params.m
    indices = [i for pair in topology.gate_inputs for i in pair] + [topology.output_source]
    if len(topology.gate_inputs) != params.M:
        raise ValueError("topology gate count does not match params")
    bits = []
    for idx in indices:
        if not 0 <= idx < 2 ** m:
            raise ValueError(f"index {idx} does not fit in {m} bits")
        bits.extend((idx >> k) & 1 for k in range(m - 1, -1, -1))
    return np.array(bits, dtype=np.uint8)


# -- evaluation --------------------------------------------------------------

def input_masks(d: int) -> np.ndarray:
    """Packed truth tables of the primary inputs ``x1 .. xd``."""
    idx = np.arange(2 ** d, dtype=np.uint64)
    masks = np.zeros(d, dtype=np.uint64)
    for j in range(d):
        on = ((idx >> np.uint64(d - 1 - j)) & np.uint64(1)).astype(bool)
        masks[j] = np.bitwise_or.reduce(np.uint64(1) << idx[on]) if on.any() else 0
    return masks


@numba.njit(cache=True)
def _settle_kernel(src_a, src_b, out, d, in_masks, full):
    P, M = src_a.shape
    S = d + M
    result = np.zeros(P, dtype=np.uint64)
    state = np.zeros(S, dtype=np.uint64)
    nxt = np.zeros(M, dtype=np.uint64)
    cone = np.zeros(S, dtype=np.bool_)
    for p in range(P):
        # fan-in cone of the output
        cone[:] = False
        cone[out[p]] = True
        grew = True
        while grew:
            grew = False
            for i in range(M):
                if cone[d + i]:
                    for s in (src_a[p, i], src_b[p, i]):
                        if not cone[s]:
                            cone[s] = True
                            grew = True
        state[:d] = in_masks
        state[d:] = 0
        for _ in range(M + 1):
            for i in range(M):
                nxt[i] = ~(state[src_a[p, i]] & state[src_b[p, i]]) & full
            state[d:] = nxt
        unsettled = np.uint64(0)
        for i in range(M):
            if cone[d + i]:
                unsettled |= (~(state[src_a[p, i]] & state[src_b[p, i]]) & full) ^ state[d + i]
        result[p] = state[out[p]] & ~unsettled
    return result


@numba.njit(cache=True)
def _feedforward_kernel(src_a, src_b, out, d, in_masks, full):
    P, M = src_a.shape
    result = np.zeros(P, dtype=np.uint64)
    state = np.zeros(d + M, dtype=np.uint64)
    for p in range(P):
        state[:d] = in_masks
        for i in range(M):
            state[d + i] = ~(state[src_a[p, i]] & state[src_b[p, i]]) & full
        result[p] = state[out[p]]
    return result


def population_tables(population: np.ndarray, params: CircuitParams,
                      policy: str | None = None) -> np.ndarray:
    """Packed truth tables (``uint64``, one per genotype) of a population."""
    policy = policy or params.policy
    pop = np.ascontiguousarray(population, dtype=np.uint8)
    if pop.ndim != 2 or pop.shape[1] != params.B:
        raise ValueError(f"expected population of shape (P, {params.B}), got {pop.shape}")
    src_a, src_b, out = _decode_kernel(pop, params.m, params.M, params.d, policy == FEEDFORWARD)
    return _tables(src_a, src_b, out, params, policy)


@numba.njit(cache=True)
def _decode_kernel(pop, m, M, d, feedforward):
    P = pop.shape[0]
    S = M + d
    src_a = np.empty((P, M), dtype=np.int64)
    src_b = np.empty((P, M), dtype=np.int64)
    out = np.empty(P, dtype=np.int64)
    for p in range(P):
        pos = 0
        for i in range(M):
            mod = d + i if feedforward else S
            v = 0
            for _ in range(m):
                v = (v << 1) | pop[p, pos]
                pos += 1
            src_a[p, i] = v % mod
            v = 0
            for _ in range(m):
                v = (v << 1) | pop[p, pos]
                pos += 1
            src_b[p, i] = v % mod
        v = 0
        for _ in range(m):
            v = (v << 1) | pop[p, pos]
            pos += 1
        out[p] = v % S
    return src_a, src_b, out


def _tables(src_a, src_b, out, params: CircuitParams, policy: str) -> np.ndarray:
    """Evaluate wirings on all inputs at once.

    ``settle``: all gate outputs start at 0 and are updated synchronously for
    ``M + 1`` passes. For each input, if one further pass leaves every gate in
    the output's fan-in cone unchanged the circuit has settled and the output
    source's value is used; otherwise the output is 0.

    ``feedforward``: gates are evaluated once in index order.
    """
    kernel = _feedforward_kernel if policy == FEEDFORWARD else _settle_kernel
    return kernel(np.ascontiguousarray(src_a), np.ascontiguousarray(src_b),
                  np.ascontiguousarray(out), params.d, input_masks(params.d), params.full_mask)


def unpack_table(mask, params: CircuitParams) -> np.ndarray:
    idx = np.arange(params.n_inputs, dtype=np.uint64)
    return ((np.uint64(mask) >> idx) & np.uint64(1)).astype(np.uint8)


def pack_table(table: Sequence[int]) -> np.uint64:
    table = np.asarray(table, dtype=np.uint64)
    if len(table) > 64:
        raise ValueError("tables longer than 64 entries cannot be packed")
    return np.uint64(np.bitwise_or.reduce(table << np.arange(len(table), dtype=np.uint64)))


def _topology_population(topology: CircuitTopology, params: CircuitParams):
    a = np.array([[p[0] for p in topology.gate_inputs]], dtype=np.int64)
    b = np.array([[p[1] for p in topology.gate_inputs]], dtype=np.int64)
    out = np.array([topology.output_source], dtype=np.int64)
    return a, b, out


def evaluate(topology: CircuitTopology, x: Sequence[int],
             params: CircuitParams | None = None, policy: str | None = None) -> int:
    """Output bit of the circuit on one input vector ``(x1, ..., xd)``."""
    params = params or CircuitParams(d=topology.d, M=topology.M)
    if len(x) != params.d:
        raise ValueError(f"expected {params.d} input bits, got {len(x)}")
    index = 0
    for bit in x:
        index = (index << 1) | (1 if bit else 0)
    return int(truth_table(topology, params, policy)[index])


def truth_table(topology: CircuitTopology, params: CircuitParams | None = None,
                policy: str | None = None) -> np.ndarray:
    """All ``2**d`` outputs of a decoded circuit, in input-index order."""
    params = params or CircuitParams(d=topology.d, M=topology.M)
    policy = policy or params.policy
    a, b, out = _topology_population(topology, params)
    S = params.n_sources
    if np.any(a >= S) or np.any(b >= S) or out[0] >= S:
        raise ValueError("topology index out of range")
    if policy == FEEDFORWARD:
        allowed = params.d + np.arange(params.M)
        if np.any(a[0] >= allowed) or np.any(b[0] >= allowed):
            raise ValueError("feedforward topology reads a later gate")
    mask = _tables(a, b, out, params, policy)[0]
    return unpack_table(mask, params)


def genotype_table(genotype: np.ndarray, params: CircuitParams | None = None,
                   policy: str | None = None) -> np.ndarray:
    params = params or CircuitParams()
    return unpack_table(population_tables(np.asarray(genotype)[None, :], params, policy)[0], params)


# -- goals and fitness -------------------------------------------------------

BOOLEAN_OPS: dict[str, Callable[[int, int], int]] = {
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "EQ": lambda a, b: 1 - (a ^ b),
    "NAND": lambda a, b: 1 - (a & b),
    "NOR": lambda a, b: 1 - (a | b),
    "ANDN": lambda a, b: a & (1 - b),
    "ORN": lambda a, b: a | (1 - b),
}


@dataclass(frozen=True)
class GoalFamily:
    """Goal of the form ``f(g(x1, x2), h(x3, x4))``, ops named as in BOOLEAN_OPS."""

    f: str
    g: str
    h: str

    def __post_init__(self):
        for op in (self.f, self.g, self.h):
            if op not in BOOLEAN_OPS:
                raise ValueError(f"unknown Boolean op {op!r}; expected one of {sorted(BOOLEAN_OPS)}")

    @property
    def label(self) -> str:
        return f"{self.f}({self.g},{self.h})"

    @classmethod
    def parse(cls, text) -> "GoalFamily":
        if isinstance(text, str):
            text = text.replace("(", " ").replace(")", " ").replace(",", " ").split()
        ops = [str(s).upper() for s in text]
        if len(ops) != 3:
            raise ValueError(f"goal family needs three ops (f, g, h), got {text!r}")
        return cls(*ops)


@dataclass(frozen=True)
class BooleanGoal:
    table: np.ndarray = field(compare=False)
    label: str = ""

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.uint8)
        n = len(table)
        if n == 0 or n & (n - 1):
            raise ValueError("truth table length must be a power of two")
        object.__setattr__(self, "table", table)

    @property
    def d(self) -> int:
        return int(len(self.table)).bit_length() - 1

    @property
    def mask(self) -> np.uint64:
        return pack_table(self.table)

    def __call__(self, x: Sequence[int]) -> int:
        index = 0
        for bit in x:
            index = (index << 1) | (1 if bit else 0)
        return int(self.table[index])

    def to_string(self) -> str:
        return "".join(str(int(b)) for b in self.table)

    @classmethod
    def from_string(cls, s: str, label: str = "") -> "BooleanGoal":
        return cls(np.array([int(c) for c in s], dtype=np.uint8), label)

    def __eq__(self, other):
        return isinstance(other, BooleanGoal) and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash(self.to_string())


def modular_goal(family: GoalFamily, params: CircuitParams | None = None) -> BooleanGoal:
    if params is not None and params.d != 4:
        raise ValueError("modular goal families are defined on exactly 4 inputs")
    f, g, h = (BOOLEAN_OPS[op] for op in (family.f, family.g, family.h))
    table = []
    for i in range(16):
        x1, x2, x3, x4 = (i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1
        table.append(f(g(x1, x2), h(x3, x4)))
    return BooleanGoal(np.array(table, dtype=np.uint8), family.label)


def fitness(u_table, goal) -> float:
    """Fraction of inputs on which ``u_table`` agrees with the goal."""
    t = goal.table if isinstance(goal, BooleanGoal) else np.asarray(goal)
    u = np.asarray(u_table)
    if u.shape != t.shape:
        raise ValueError(f"table lengths differ: {u.shape} vs {t.shape}")
    return float(np.count_nonzero(u == t)) / len(t)


def population_fitness(tables: np.ndarray, goal: BooleanGoal, params: CircuitParams) -> np.ndarray:
    agree = ~(tables ^ goal.mask) & params.full_mask
    return np.bitwise_count(agree).astype(np.float64) / params.n_inputs


def binary_performance(fitness_value: float, eps: float) -> int:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {eps}")
    return int(fitness_value >= eps)


def goal_task(family: GoalFamily, eps: float = 1.0, task_id: str | None = None) -> Task:
    goal = modular_goal(family)
    return Task(id=task_id or family.label, env_dim=4, goal=goal,
                perf_threshold=eps, distance_tag=family)


def build_contexts(training: Sequence[GoalFamily], test: Sequence[GoalFamily],
                   thresholds: dict | None = None) -> tuple[TaskContext, TaskContext]:
    """Training context with a uniform transition matrix and an equally weighted test context.

    ``thresholds`` maps family labels to success thresholds (default 1.0).
    """
    if not training:
        raise ConfigurationError("training goal list is empty")
    if not test:
        raise ConfigurationError("test goal list is empty")
    thresholds = thresholds or {}

    def tasks(families):
        seen, out = set(), []
        for fam in families:
            if fam.label in seen:
                continue  # duplicates would break unique task ids
            seen.add(fam.label)
            out.append(goal_task(fam, thresholds.get(fam.label, 1.0)))
        return out

    train_tasks, test_tasks = tasks(training), tasks(test)
    n = len(train_tasks)
    train = TaskContext(train_tasks, transition=np.full((n, n), 1.0 / n))
    return train, TaskContext(test_tasks)
