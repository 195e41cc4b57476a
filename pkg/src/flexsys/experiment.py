"""FG vs. MVG pretraining followed by adaptation to every test goal.

One work unit is a (seed, scenario) pair: pretrain a population under the
scenario's schedule, then adapt a copy of it to each test task. Units are
independent and seeded from ``(master_seed, seed, scenario)``, so results do
not depend on the number of workers. Records are written in unit order as the
units finish; summaries are computed from the written records only.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .circuits import from_bitstring, hamming, modular_goal, to_bitstring, build_contexts
from .config import ExperimentConfig
from .evolution import (FG, MVG, CircuitAdaptiveSystem, RunTrace, GenerationRecord,
                        estimate_random_baseline, genotype_hash, run_schedule, success_threshold)

log = logging.getLogger(__name__)

SCENARIOS = (FG, MVG)
_SCENARIO_CODE = {FG: 0, MVG: 1}
SUMMARY_HEADER = ["scenario", "task", "mean_ada", "stderr_ada", "mean_reco", "fail_frac", "n"]
ALL_TASKS = "ALL"


class IntegrityError(RuntimeError):
    """A replayed run does not match its stored record."""


@dataclass
class RunRecord:
    seed: int
    scenario: str
    task: str
    task_index: int
    pre_genotype: str
    post_genotype: str | None
    adaption_cost: int
    reco_cost: int | None
    solved: bool
    wall_time: float
    config_hash: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        data = json.loads(line)
        missing = set(cls.__dataclass_fields__) - set(data)
        if missing:
            raise ValueError(f"record lacks fields {sorted(missing)}")
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class CellStats:
    scenario: str
    task: str
    mean_ada: float
    median_ada: float
    stderr_ada: float
    mean_ada_capped: float
    mean_reco: float
    fail_frac: float
    n: int


@dataclass
class SummaryStats:
    failure_mode: str
    cells: list[CellStats] = field(default_factory=list)

    def scenario(self, name: str) -> CellStats | None:
        for c in self.cells:
            if c.scenario == name and c.task == ALL_TASKS:
                return c
        return None

    @property
    def ada_ratio(self) -> float:
        """Mean adaption cost FG / MVG."""
        return _ratio(self.scenario(FG), self.scenario(MVG), "mean_ada")

    @property
    def reco_ratio(self) -> float:
        return _ratio(self.scenario(FG), self.scenario(MVG), "mean_reco")


def _ratio(a: CellStats | None, b: CellStats | None, attr: str) -> float:
    if a is None or b is None:
        return math.nan
    num, den = getattr(a, attr), getattr(b, attr)
    if math.isnan(num) or math.isnan(den):
        return math.nan
    if den == 0:
        return math.inf if num > 0 else math.nan
    return num / den


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    stats: SummaryStats
    thresholds: dict[str, float]
    files: dict[str, Path] = field(default_factory=dict)


# -- running ---------------------------------------------------------------------

def thresholds_for(config: ExperimentConfig) -> dict[str, float]:
    """Success threshold per goal label from the random-population baseline."""
    families = list(dict.fromkeys(config.training + config.test))
    goals = [modular_goal(f) for f in families]
    rng = np.random.default_rng([config.master_seed, 0])
    F_r = estimate_random_baseline(config.ga, config.circuit, goals,
                                   config.baseline_populations, rng)
    return {f.label: success_threshold(float(fr), config.fn_threshold) for f, fr in zip(families, F_r)}


def pretrain(config: ExperimentConfig, seed: int, scenario: str, thresholds: dict):
    train, test = build_contexts(config.training, config.test, thresholds)
    rng = np.random.default_rng([config.master_seed, seed, _SCENARIO_CODE[scenario], 0])
    population, trace = run_schedule(config.schedule(scenario), train, config.ga, config.circuit,
                                     config.pretrain_generations, rng)
    return CircuitAdaptiveSystem(population, config.ga, config.circuit, trace.best_genotype), test


def adapt_one(system: CircuitAdaptiveSystem, task, config: ExperimentConfig, seed: int,
              scenario: str, index: int):
    rng = np.random.default_rng([config.master_seed, seed, _SCENARIO_CODE[scenario], 1, index])
    start = system.initial_config
    cfg, cost = system.adapt(start, task, rng)
    if system.last_result is not None:
        trace = system.last_result.trace
    else:
        trace = RunTrace(solved=True, generations=0, best_genotype=start.best.copy())
        trace.append(GenerationRecord(0, str(task.id), 1.0, math.nan, genotype_hash(start.best)))
    return cfg, cost, trace


def _run_unit(args) -> list[RunRecord]:
    config, seed, scenario, thresholds = args
    system, test = pretrain(config, seed, scenario, thresholds)
    chash = config.hash()
    pre = system.initial_config.best
    out = []
    for j, task in enumerate(test.tasks):
        t0 = time.perf_counter()
        cfg, cost, trace = adapt_one(system, task, config, seed, scenario, j)
        solved = math.isfinite(cost)
        out.append(RunRecord(
            seed=seed, scenario=scenario, task=str(task.id), task_index=j,
            pre_genotype=to_bitstring(pre),
            post_genotype=to_bitstring(cfg.best) if solved else None,
            adaption_cost=int(cost) if solved else int(trace.generations),
            reco_cost=hamming(pre, cfg.best) if solved else None,
            solved=solved, wall_time=round(time.perf_counter() - t0, 6), config_hash=chash))
    return out


def work_units(config: ExperimentConfig, thresholds: dict) -> list[tuple]:
    return [(config, seed, scen, thresholds) for seed in config.seeds for scen in SCENARIOS]


def run_experiment(config: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   workers: int | None = None, progress=None) -> ExperimentResult:
    """Pretrain both scenarios for every seed and adapt to every test task.

    With ``out_dir`` the records are appended to ``records.jsonl`` as units
    finish, then ``summary.csv`` and the histograms are written.
    """
    workers = config.workers if workers is None else workers
    thresholds = thresholds_for(config)
    units = work_units(config, thresholds)
    out = Path(out_dir) if out_dir is not None else None
    records: list[RunRecord] = []
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_config_json(config, out / "config.json")
        writer = open(out / "records.jsonl", "w")
        writer.write(header_line(config) + "\n")
    try:
        with contextlib.ExitStack() as stack:
            if workers == 1:
                results = map(_run_unit, units)
            else:
                pool = stack.enter_context(ProcessPoolExecutor(max_workers=workers))
                results = pool.map(_run_unit, units)
            for k, unit_records in enumerate(results):
                records.extend(unit_records)
                if writer is not None:
                    writer.writelines(r.to_json() + "\n" for r in unit_records)
                    writer.flush()
                if progress is not None:
                    progress(k + 1, len(units))
    finally:
        if writer is not None:
            writer.close()
    if out is not None:
        records = read_records(out / "records.jsonl")
    stats = summarize(records, config.failure_mode)
    result = ExperimentResult(records, stats, thresholds)
    if out is not None:
        result.files = export(records, stats, out, config)
    return result


# -- statistics --------------------------------------------------------------------

def _cell(scenario: str, task: str, rows: Sequence[RunRecord], failure_mode: str) -> CellStats:
    n = len(rows)
    solved = [r for r in rows if r.solved]
    capped = np.array([r.adaption_cost for r in rows], dtype=float)
    ada = capped if failure_mode == "cap" else np.array([r.adaption_cost for r in solved], dtype=float)
    reco = np.array([r.reco_cost for r in solved], dtype=float)
    nan = math.nan
    return CellStats(
        scenario=scenario, task=task,
        mean_ada=float(ada.mean()) if len(ada) else nan,
        median_ada=float(np.median(ada)) if len(ada) else nan,
        stderr_ada=float(ada.std(ddof=1) / math.sqrt(len(ada))) if len(ada) > 1 else (0.0 if len(ada) else nan),
        mean_ada_capped=float(capped.mean()) if n else nan,
        mean_reco=float(reco.mean()) if len(reco) else nan,
        fail_frac=(n - len(solved)) / n if n else nan,
        n=n)


def summarize(records: Sequence[RunRecord], failure_mode: str = "exclude") -> SummaryStats:
    """Per (scenario, task) cells plus one ``ALL`` cell per scenario.

    ``exclude`` averages adaption cost over solved runs; ``cap`` counts a
    failure at the generation cap it reached.
    """
    stats = SummaryStats(failure_mode)
    scenarios = [s for s in SCENARIOS if any(r.scenario == s for r in records)]
    scenarios += sorted({r.scenario for r in records} - set(scenarios))
    for scen in scenarios:
        rows = [r for r in records if r.scenario == scen]
        tasks = sorted({(r.task_index, r.task) for r in rows})
        for _, task in tasks:
            stats.cells.append(_cell(scen, task, [r for r in rows if r.task == task], failure_mode))
        stats.cells.append(_cell(scen, ALL_TASKS, rows, failure_mode))
    return stats


@dataclass
class ScenarioFlexibility:
    scenario: str
    adaptability: float
    adaptability_capped: float
    mean_reco: float
    reconfigurability: float
    fail_frac: float
    n: int


@dataclass
class FlexibilityReport:
    scenarios: dict[str, ScenarioFlexibility]
    ada_ratio: float
    ada_ratio_ci: tuple[float, float]
    reco_ratio: float
    reco_ratio_ci: tuple[float, float]
    resamples: int

    def lines(self) -> list[str]:
        out = []
        for s in self.scenarios.values():
            out.append(f"{s.scenario}: adaptability={s.adaptability:.4g} (capped {s.adaptability_capped:.4g}) "
                       f"mean_reco={s.mean_reco:.4g} fail_frac={s.fail_frac:.3f} n={s.n}")
        out.append(_ratio_line("adaption cost FG/MVG", self.ada_ratio, self.ada_ratio_ci))
        out.append(_ratio_line("reconfiguration cost FG/MVG", self.reco_ratio, self.reco_ratio_ci))
        return out


def _ratio_line(name: str, value: float, ci: tuple[float, float]) -> str:
    if math.isnan(value):
        return f"{name} = undefined"
    return f"{name} = {value:.4g}  CI95 [{ci[0]:.4g}, {ci[1]:.4g}]"


def ratio_ci(num: Sequence[float], den: Sequence[float], resamples: int, seed) -> tuple[float, float]:
    """Percentile bootstrap interval for mean(num) / mean(den)."""
    num, den = np.asarray(num, float), np.asarray(den, float)
    if len(num) == 0 or len(den) == 0:
        return (math.nan, math.nan)
    if len(num) == 1 and len(den) == 1:
        r = _safe_div(num.mean(), den.mean())
        return (r, r)

    def statistic(a, b, axis=-1):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.mean(a, axis=axis) / np.mean(b, axis=axis)

    res = sps.bootstrap((num, den), statistic, n_resamples=resamples, paired=False,
                        vectorized=True, method="percentile", confidence_level=0.95,
                        random_state=np.random.default_rng(seed))
    return (float(res.confidence_interval.low), float(res.confidence_interval.high))


def _safe_div(a: float, b: float) -> float:
    if b == 0:
        return math.inf if a > 0 else math.nan
    return float(a / b)


def flexibility_report(records: Sequence[RunRecord], config: ExperimentConfig) -> FlexibilityReport:
    stats = summarize(records, config.failure_mode)
    scen = {}
    samples_ada, samples_reco = {}, {}
    for name in SCENARIOS:
        cell = stats.scenario(name)
        rows = [r for r in records if r.scenario == name]
        solved = [r for r in rows if r.solved]
        ada_rows = rows if config.failure_mode == "cap" else solved
        samples_ada[name] = [r.adaption_cost for r in ada_rows]
        samples_reco[name] = [r.reco_cost for r in solved]
        if cell is None:
            continue
        scen[name] = ScenarioFlexibility(name, -cell.mean_ada, -cell.mean_ada_capped, cell.mean_reco,
                                         -cell.mean_reco, cell.fail_frac, cell.n)
    R = config.bootstrap_resamples
    return FlexibilityReport(
        scenarios=scen,
        ada_ratio=stats.ada_ratio,
        ada_ratio_ci=ratio_ci(samples_ada[FG], samples_ada[MVG], R, [config.master_seed, 7, 0]),
        reco_ratio=stats.reco_ratio,
        reco_ratio_ci=ratio_ci(samples_reco[FG], samples_reco[MVG], R, [config.master_seed, 7, 1]),
        resamples=R)


# -- persistence -------------------------------------------------------------------

def write_config_json(config: ExperimentConfig, path: Path) -> None:
    """Resolved config; the ``meta`` entry on the second line mirrors the CSV headers."""
    meta = header_line(config).lstrip("# ")
    body = json.dumps(config.to_dict(), indent=2, sort_keys=True)
    path.write_text('{\n  "meta": ' + json.dumps(meta) + ',\n  "config": ' + body.replace("\n", "\n  ") + "\n}\n")


def read_config_json(path: str | os.PathLike) -> dict:
    return json.loads(Path(path).read_text())["config"]


def header_line(config: ExperimentConfig) -> str:
    return f"# config_hash={config.hash()} master_seed={config.master_seed}"


def parse_header(line: str) -> dict:
    out = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            k, v = token.split("=", 1)
            out[k] = v
    return out


class RecordFormatError(ValueError):
    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        super().__init__("; ".join(f"line {n}: {msg}" for n, msg in problems))


def read_records(path: str | os.PathLike) -> list[RunRecord]:
    return read_records_with_header(path)[0]


def read_records_with_header(path: str | os.PathLike) -> tuple[list[RunRecord], str | None]:
    """Records plus the first metadata line, if any.

    Every malformed line is collected before raising :class:`RecordFormatError`.
    """
    records, problems, header = [], [], None
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if line.startswith("#"):
                header = line if header is None else header
                continue
            if not line:
                continue
            try:
                records.append(RunRecord.from_json(line))
            except (ValueError, TypeError) as exc:
                problems.append((n, str(exc)))
    if problems:
        raise RecordFormatError(problems)
    return records, header


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def summary_csv(stats: SummaryStats, header: str) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for c in stats.cells:
        w.writerow([c.scenario, c.task, _fmt(c.mean_ada), _fmt(c.stderr_ada), _fmt(c.mean_reco),
                    _fmt(c.fail_frac), c.n])
    return buf.getvalue()


def histogram_csv(records: Iterable[RunRecord], scenario: str, header: str) -> str:
    rows = [r for r in records if r.scenario == scenario]
    solved = sorted({r.adaption_cost for r in rows if r.solved})
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["adaption_cost", "count"])
    for c in solved:
        w.writerow([c, sum(1 for r in rows if r.solved and r.adaption_cost == c)])
    failed = sum(1 for r in rows if not r.solved)
    if failed:
        w.writerow(["inf", failed])
    return buf.getvalue()


def export(records: Sequence[RunRecord], stats: SummaryStats, out_dir: str | os.PathLike,
           config: ExperimentConfig | str, fmt: Sequence[str] = ("jsonl", "csv")) -> dict[str, Path]:
    """Write ``records.jsonl``, ``summary.csv`` and ``hist_<scenario>.csv``.

    ``config`` supplies the metadata line; a ready header string also works.
    """
    header = config if isinstance(config, str) else header_line(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for f in fmt:
        if f not in ("jsonl", "csv"):
            raise ValueError(f"unknown export format {f!r}")
    if "jsonl" in fmt:
        p = out / "records.jsonl"
        with open(p, "w") as fh:
            fh.write(header + "\n")
            fh.writelines(r.to_json() + "\n" for r in records)
        files["records"] = p
    if "csv" in fmt:
        p = out / "summary.csv"
        p.write_text(summary_csv(stats, header))
        files["summary"] = p
        for scen in sorted({r.scenario for r in records}):
            hp = out / f"hist_{scen}.csv"
            hp.write_text(histogram_csv(records, scen, header))
            files[f"hist_{scen}"] = hp
    return files


# -- replay ------------------------------------------------------------------------

def replay(record: RunRecord, config: ExperimentConfig, thresholds: dict | None = None) -> RunTrace:
    """Re-run one record's pretraining and adaptation and check it matches."""
    if record.config_hash != config.hash():
        raise IntegrityError(f"config drift: record hash {record.config_hash} != {config.hash()}")
    if record.scenario not in _SCENARIO_CODE:
        raise IntegrityError(f"unknown scenario {record.scenario!r}")
    thresholds = thresholds_for(config) if thresholds is None else thresholds
    system, test = pretrain(config, record.seed, record.scenario, thresholds)
    if not 0 <= record.task_index < len(test.tasks) or str(test.tasks[record.task_index].id) != record.task:
        raise IntegrityError(f"task {record.task!r} not at index {record.task_index}")
    if to_bitstring(system.initial_config.best) != record.pre_genotype:
        raise IntegrityError("pre-adaptation genotype differs from record")
    cfg, cost, trace = adapt_one(system, test.tasks[record.task_index], config,
                                 record.seed, record.scenario, record.task_index)
    solved = math.isfinite(cost)
    post = to_bitstring(cfg.best) if solved else None
    if solved != record.solved or post != record.post_genotype or \
            (solved and int(cost) != record.adaption_cost):
        raise IntegrityError("replayed run does not reproduce the stored record")
    return trace


def check_reco(record: RunRecord) -> bool:
    if not record.solved:
        return record.reco_cost is None
    return hamming(from_bitstring(record.pre_genotype), from_bitstring(record.post_genotype)) == record.reco_cost
