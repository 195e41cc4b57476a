import json
import os
import subprocess
import sys

import pytest

from flexsys.cli import main

from conftest import TINY

SMALL_SETS = [
    "--set", "ga.pop_size=80", "--set", "ga.max_generations=10", "--set", "experiment.seeds=1",
    "--set", "schedule.pretrain_generations=10", "--set", "experiment.baseline_populations=2",
    "--set", 'goals.test=["AND(AND,AND)","NAND(XOR,XOR)"]', "--set", "experiment.bootstrap_resamples=50",
]


def _write_config(tmp_path, doc=TINY):
    lines = []
    for section, values in doc.items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            lines.append(f"{k} = {json.dumps(v)}")
    p = tmp_path / "tiny.toml"
    p.write_text("\n".join(lines) + "\n")
    return p


def test_goals_default_listing(capsys):
    assert main(["goals"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert sum(r.startswith("training") for r in rows) == 3
    assert sum(r.startswith("test") for r in rows) == 20
    assert all(len(r.split("\t")[3]) == 16 for r in rows)


def test_goals_warns_on_duplicates(capsys):
    assert main(["goals", "--set", 'goals.test=["AND(XOR,XOR)","AND(XOR,XOR)"]']) == 0
    assert "duplicate test goal AND(XOR,XOR)" in capsys.readouterr().err


def test_missing_config_exit_1(capsys):
    assert main(["run", "--config", "no/such/file.toml"]) == 1
    assert "not found" in capsys.readouterr().err


def test_bad_override_exit_1(capsys):
    assert main(["run", "--set", "ga.pop_size=-5"]) == 1
    assert "pop_size" in capsys.readouterr().err
    assert main(["run", "--set", "ga.nope=3"]) == 1
    assert main(["run", "--set", "ga.pop_size=ten"]) == 1


def test_unknown_subcommand_exit_1():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1


def test_oracle_bogus_scope_exit_1():
    assert main(["oracle", "bogus"]) == 1


def test_oracle_circuit_passes(capsys):
    assert main(["oracle", "circuit"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_oracle_fault_injection_exit_3(monkeypatch, capsys):
    monkeypatch.setenv("FLEXSYS_FAULT", "evaluator")
    assert main(["oracle", "circuit"]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_run_then_analyze_is_byte_identical(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--quiet", "--out", str(out), "--seed", "3", *SMALL_SETS]) == 0
    printed = capsys.readouterr().out
    before = (out / "summary.csv").read_bytes()
    assert main(["analyze", str(out / "records.jsonl"), "--quiet"]) == 0
    assert (out / "summary.csv").read_bytes() == before
    assert capsys.readouterr().out == printed
    assert "master_seed=3" in before.decode().splitlines()[0]


def test_run_is_idempotent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "--quiet", "--out", str(d), *SMALL_SETS]) == 0
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_run_uses_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FLEXSYS_OUTPUT_DIR", str(tmp_path / "env_out"))
    assert main(["run", "--quiet", *SMALL_SETS]) == 0
    assert (tmp_path / "env_out" / "records.jsonl").exists()


def test_run_with_config_file(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "o"
    assert main(["run", "--quiet", "--config", str(cfg), "--out", str(out),
                 "--set", "experiment.seeds=1", "--set", "ga.max_generations=5"]) == 0
    assert (out / "hist_MVG.csv").exists()


def test_run_unwritable_output_exit_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--quiet", "--out", str(blocker / "sub"), *SMALL_SETS]) == 2


def test_analyze_empty_file_exit_2(tmp_path):
    p = tmp_path / "records.jsonl"
    p.write_text("")
    assert main(["analyze", str(p)]) == 2


def test_analyze_missing_file_exit_2(tmp_path):
    assert main(["analyze", str(tmp_path / "nothing.jsonl")]) == 2


def test_analyze_reports_malformed_lines(tmp_path, capsys):
    p = tmp_path / "records.jsonl"
    p.write_text("# config_hash=x master_seed=0\nnot json\n\n{\"seed\": 2}\n")
    assert main(["analyze", str(p)]) == 2
    err = capsys.readouterr().err
    assert f"{p}:2:" in err and f"{p}:4:" in err


def test_analyze_mixed_scenarios(tiny_run, capsys):
    _, _, out = tiny_run
    assert main(["analyze", str(out), "--out", str(out / "again")]) == 0
    text = capsys.readouterr().out
    assert "FG:" in text and "MVG:" in text and "FG/MVG" in text


def test_console_script_entry_point(tmp_path):
    env = dict(os.environ, FLEXSYS_FAULT="")
    proc = subprocess.run([sys.executable, "-m", "flexsys.cli", "oracle", "nope"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 1
    assert "unknown oracle scope" in proc.stderr
