import pytest

from flexsys.config import from_dict

TINY = {
    "ga": {"pop_size": 120, "tournament_size": 4, "mutation_rate": 0.02, "max_generations": 30},
    "schedule": {"epoch_len": 5, "pretrain_generations": 30},
    "goals": {
        "training": ["AND(XOR,XOR)", "OR(XOR,XOR)", "OR(EQ,EQ)"],
        "test": ["AND(AND,AND)", "OR(AND,AND)", "NAND(XOR,XOR)"],
    },
    "experiment": {"seeds": 2, "baseline_populations": 3, "bootstrap_resamples": 200},
}


@pytest.fixture
def tiny_config():
    return from_dict(TINY)


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    from flexsys.experiment import run_experiment
    out = tmp_path_factory.mktemp("tiny_run")
    config = from_dict(TINY)
    return config, run_experiment(config, out), out


# -- acceptance summary: one line per criterion ------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        label = props.get("criterion", report.nodeid.split("::")[-1])
        outcome = {"passed": "PASS", "failed": "FAIL"}.get(report.outcome, "SKIP")
        _acceptance.append(f"{outcome}  {label}  [{props.get('measured', '')}]")


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance:
            terminalreporter.write_line(line)
