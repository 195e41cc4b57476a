"""``flexsys`` command line: run, goals, oracle, analyze.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime or input
error, 3 failed oracle check. Progress goes to stderr; stdout carries only the
subcommand's data.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import experiment as ex
from . import oracles
from .circuits import modular_goal
from .config import OUTPUT_ENV, ExperimentConfig, load_config
from .formalism import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ORACLE = 0, 1, 2, 3

log = logging.getLogger("flexsys")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file or preset name (desk, full); default desk")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value; repeatable")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or experiment.output_dir)")
    p.add_argument("--seed", type=int, help="master seed, shorthand for --set experiment.master_seed=N")
    p.add_argument("--quiet", action="store_true", help="suppress progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flexsys", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="pretrain FG and MVG populations and adapt them to the test goals")
    _common(p)
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")

    p = sub.add_parser("goals", help="list training and test goals with their truth tables")
    _common(p)

    p = sub.add_parser("oracle", help="run brute-force verification suites")
    p.add_argument("scope", help="circuit, formalism or all")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("analyze", help="recompute summaries from a records.jsonl file")
    p.add_argument("records", help="records.jsonl, or a run directory containing it")
    _common(p)
    return parser


def _config(args) -> ExperimentConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"experiment.master_seed={args.seed}")
    return load_config(args.config, overrides)


def _out_dir(args, config: ExperimentConfig) -> Path:
    return Path(args.out or os.environ.get(OUTPUT_ENV) or config.output_dir)


def cmd_run(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)

    def progress(done, total):
        log.info("unit %d/%d done", done, total)

    try:
        result = ex.run_experiment(config, out, workers=args.workers, progress=progress)
        report = ex.flexibility_report(result.records, config)
    except OSError as exc:
        print(f"flexsys: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in report.lines():
        print(line)
    log.info("wrote %s", ", ".join(str(p) for p in result.files.values()))
    return EXIT_OK


def cmd_goals(args) -> int:
    config = _config(args)
    for kind, families in (("training", config.training), ("test", config.test)):
        seen = set()
        for i, fam in enumerate(families, start=1):
            if fam.label in seen:
                print(f"flexsys: warning: duplicate {kind} goal {fam.label}", file=sys.stderr)
            seen.add(fam.label)
            print(f"{kind}\t{i}\t{fam.label}\t{modular_goal(fam).to_string()}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.scope not in oracles.SCOPES:
        print(f"flexsys: unknown oracle scope {args.scope!r}; choose from {', '.join(oracles.SCOPES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    results = oracles.run_suite(args.scope)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_ORACLE if failed else EXIT_OK


def _analysis_config(args, records_path: Path) -> ExperimentConfig:
    if args.config is not None:
        return _config(args)
    stored = records_path.parent / "config.json"
    if stored.exists():
        from .config import from_dict
        return from_dict(ex.read_config_json(stored), args.overrides)
    return _config(args)


def cmd_analyze(args) -> int:
    path = Path(args.records)
    if path.is_dir():
        path = path / "records.jsonl"
    if not path.exists():
        print(f"flexsys: {path} not found", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        records, header = ex.read_records_with_header(path)
    except ex.RecordFormatError as exc:
        for n, msg in exc.problems:
            print(f"{path}:{n}: malformed record: {msg}", file=sys.stderr)
        return EXIT_RUNTIME
    if not records:
        print(f"flexsys: {path} holds no records", file=sys.stderr)
        return EXIT_RUNTIME
    config = _analysis_config(args, path)
    hashes = {r.config_hash for r in records}
    if len(hashes) > 1:
        print(f"flexsys: records mix config hashes {sorted(hashes)}", file=sys.stderr)
        return EXIT_RUNTIME
    if header is None:
        header = ex.header_line(config)
    stats = ex.summarize(records, config.failure_mode)
    report = ex.flexibility_report(records, config)
    out = Path(args.out) if args.out else path.parent
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(ex.summary_csv(stats, header))
    except OSError as exc:
        print(f"flexsys: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in report.lines():
        print(line)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "goals": cmd_goals, "oracle": cmd_oracle, "analyze": cmd_analyze}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"flexsys: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        print(f"flexsys: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
