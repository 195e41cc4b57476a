"""Experiment configuration: TOML documents, dotted overrides, schema checks.

A config has five tables. Every key is optional; missing keys take the values
in :data:`SCHEMA`, which are canonical GA settings. The bundled ``desk`` and
``full`` presets override several of them::

    [circuit]     d, M, policy
    [ga]          pop_size, mutation_rate, crossover_rate, elite_count,
                  tournament_size, max_generations
    [schedule]    epoch_len, pretrain_generations, reset_on_switch
    [goals]       training, test       (lists of "F(G,H)" strings)
    [experiment]  seeds, master_seed, fn_threshold, baseline_populations,
                  failure_mode, bootstrap_resamples, workers, output_dir

Unknown tables or keys are rejected, as are values of the wrong type.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import tomli

from .circuits import CYCLE_POLICIES, CircuitParams, GoalFamily
from .evolution import GAParams, Schedule
from .formalism import ConfigurationError

FAILURE_MODES = ("exclude", "cap")
PRESETS = ("desk", "full")
OUTPUT_ENV = "FLEXSYS_OUTPUT_DIR"

# section -> key -> (accepted types, default)
SCHEMA: dict[str, dict[str, tuple[tuple[type, ...], Any]]] = {
    "circuit": {
        "d": ((int,), 4),
        "M": ((int,), 12),
        "policy": ((str,), "settle"),
    },
    "ga": {
        "pop_size": ((int,), 1000),
        "mutation_rate": ((float, int, type(None)), None),
        "crossover_rate": ((float, int), 0.5),
        "elite_count": ((int,), 1),
        "tournament_size": ((int,), 2),
        "max_generations": ((int,), 2000),
    },
    "schedule": {
        "epoch_len": ((int,), 20),
        "pretrain_generations": ((int,), 200),
        "reset_on_switch": ((bool,), False),
    },
    "goals": {
        "training": ((list,), []),
        "test": ((list,), []),
    },
    "experiment": {
        "seeds": ((int, list), 20),
        "master_seed": ((int,), 0),
        "fn_threshold": ((float, int), 0.8),
        "baseline_populations": ((int,), 20),
        "failure_mode": ((str,), "exclude"),
        "bootstrap_resamples": ((int,), 1000),
        "workers": ((int,), 1),
        "output_dir": ((str,), "results"),
    },
}

# keys that change where or how fast results are produced, not what they are
_NON_SEMANTIC = {("experiment", "workers"), ("experiment", "output_dir")}


def _check_type(section: str, key: str, value):
    types, _ = SCHEMA[section][key]
    if isinstance(value, bool) and bool not in types:
        raise ConfigurationError(f"{section}.{key}: expected {_names(types)}, got a boolean")
    if not isinstance(value, types):
        raise ConfigurationError(f"{section}.{key}: expected {_names(types)}, got {type(value).__name__}")


def _names(types) -> str:
    return " or ".join("none" if t is type(None) else t.__name__ for t in types)


def defaults() -> dict:
    return {s: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for s, keys in SCHEMA.items()}


def merge(base: dict, doc: dict) -> dict:
    out = copy.deepcopy(base)
    for section, values in doc.items():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config table [{section}]")
        if not isinstance(values, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown config key {section}.{key}")
            _check_type(section, key, value)
            out[section][key] = value
    return out


def parse_override(item: str) -> tuple[str, str, Any]:
    """``"ga.pop_size=500"`` -> ``("ga", "pop_size", 500)``; values use TOML syntax."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not of the form section.key=value")
    path, raw = item.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2:
        raise ConfigurationError(f"override key {path!r} must be section.key")
    section, key = parts
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigurationError(f"unknown config key {path!r}")
    raw = raw.strip()
    if raw.lower() in ("none", "null"):
        value = None
    else:
        try:
            value = tomli.loads(f"v = {raw}")["v"]
        except tomli.TOMLDecodeError:
            value = raw  # bare string
    return section, key, value


def preset_path(name: str) -> Path:
    return Path(str(resources.files("flexsys") / "configs" / f"{name}.toml"))


def resolve_path(path: str | os.PathLike | None) -> Path:
    """A config file path, or the name of a bundled preset (``desk``, ``full``)."""
    if path is None:
        return preset_path("desk")
    p = Path(path)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".toml") else p.name
    if stem in PRESETS and p.parent == Path("."):
        return preset_path(stem)
    raise ConfigurationError(f"config file {str(path)!r} not found")


@dataclass(frozen=True)
class ExperimentConfig:
    circuit: CircuitParams
    ga: GAParams
    schedule_epoch_len: int
    pretrain_generations: int
    reset_on_switch: bool
    training: tuple[GoalFamily, ...]
    test: tuple[GoalFamily, ...]
    seeds: tuple[int, ...]
    master_seed: int
    fn_threshold: float
    baseline_populations: int
    failure_mode: str
    bootstrap_resamples: int
    workers: int
    output_dir: str
    raw: dict

    def schedule(self, kind: str) -> Schedule:
        return Schedule(kind, self.schedule_epoch_len, None, self.reset_on_switch)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def hash(self) -> str:
        return config_hash(self.raw)

    def with_overrides(self, *items: str) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        for item in items:
            section, key, value = parse_override(item)
            _check_type(section, key, value)
            raw[section][key] = value
        return build(raw)


def config_hash(raw: dict) -> str:
    semantic = {s: {k: v for k, v in keys.items() if (s, k) not in _NON_SEMANTIC}
                for s, keys in raw.items()}
    blob = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build(raw: dict) -> ExperimentConfig:
    """Validate a merged raw config and construct the typed config."""
    c, g, s, go, e = (raw[k] for k in ("circuit", "ga", "schedule", "goals", "experiment"))
    if c["policy"] not in CYCLE_POLICIES:
        raise ConfigurationError(f"circuit.policy must be one of {CYCLE_POLICIES}")
    circuit = CircuitParams(c["d"], c["M"], c["policy"])
    ga = GAParams(
        pop_size=g["pop_size"],
        mutation_rate=None if g["mutation_rate"] is None else float(g["mutation_rate"]),
        crossover_rate=float(g["crossover_rate"]),
        elite_count=g["elite_count"],
        tournament_size=g["tournament_size"],
        max_generations=g["max_generations"],
    )
    if s["epoch_len"] < 1:
        raise ConfigurationError("schedule.epoch_len must be at least 1")
    if s["pretrain_generations"] < 0:
        raise ConfigurationError("schedule.pretrain_generations must be nonnegative")
    try:
        training = tuple(GoalFamily.parse(x) for x in go["training"])
        test = tuple(GoalFamily.parse(x) for x in go["test"])
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    if not training:
        raise ConfigurationError("goals.training is empty")
    if not test:
        raise ConfigurationError("goals.test is empty")
    if circuit.d != 4:
        raise ConfigurationError("modular goal families need circuit.d = 4")
    seeds = e["seeds"]
    if isinstance(seeds, int):
        if seeds < 1:
            raise ConfigurationError("experiment.seeds must be at least 1")
        seeds = list(range(seeds))
    if not seeds or not all(isinstance(x, int) and not isinstance(x, bool) for x in seeds):
        raise ConfigurationError("experiment.seeds must be a count or a nonempty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("experiment.seeds contains duplicates")
    if not 0.0 < e["fn_threshold"] < 1.0:
        raise ConfigurationError("experiment.fn_threshold must lie in (0, 1)")
    if e["failure_mode"] not in FAILURE_MODES:
        raise ConfigurationError(f"experiment.failure_mode must be one of {FAILURE_MODES}")
    if e["baseline_populations"] < 1:
        raise ConfigurationError("experiment.baseline_populations must be at least 1")
    if e["bootstrap_resamples"] < 1:
        raise ConfigurationError("experiment.bootstrap_resamples must be at least 1")
    if e["workers"] < 1:
        raise ConfigurationError("experiment.workers must be at least 1")
    return ExperimentConfig(
        circuit=circuit, ga=ga,
        schedule_epoch_len=s["epoch_len"],
        pretrain_generations=s["pretrain_generations"],
        reset_on_switch=s["reset_on_switch"],
        training=training, test=test,
        seeds=tuple(seeds), master_seed=e["master_seed"],
        fn_threshold=float(e["fn_threshold"]),
        baseline_populations=e["baseline_populations"],
        failure_mode=e["failure_mode"],
        bootstrap_resamples=e["bootstrap_resamples"],
        workers=e["workers"],
        output_dir=e["output_dir"],
        raw=copy.deepcopy(raw),
    )


def load_config(path: str | os.PathLike | None = None, overrides=()) -> ExperimentConfig:
    p = resolve_path(path)
    try:
        with open(p, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{p}: {exc}") from exc
    raw = merge(defaults(), doc)
    for item in overrides:
        section, key, value = parse_override(item)
        _check_type(section, key, value)
        raw[section][key] = value
    return build(raw)


def from_dict(doc: dict, overrides=()) -> ExperimentConfig:
    raw = merge(defaults(), doc)
    for item in overrides:
        section, key, value = parse_override(item)
        _check_type(section, key, value)
        raw[section][key] = value
    return build(raw)
