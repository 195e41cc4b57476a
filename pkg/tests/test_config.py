import pytest

from flexsys.config import (ConfigurationError, config_hash, defaults, from_dict, load_config,
                            parse_override, resolve_path)
from flexsys.evolution import FG, MVG


def test_presets_load():
    desk = load_config("desk")
    full = load_config("full.toml")
    assert desk.ga.pop_size == 1000 and full.ga.pop_size == 5000
    assert len(desk.training) == 3 and len(desk.test) == 20
    assert desk.circuit.B == 100
    assert load_config(None).hash() == desk.hash()


def test_schema_defaults_are_canonical_ga_settings():
    cfg = from_dict({"goals": {"training": ["AND(XOR,XOR)"], "test": ["OR(XOR,XOR)"]}})
    assert (cfg.ga.tournament_size, cfg.ga.elite_count, cfg.ga.crossover_rate) == (2, 1, 0.5)
    assert cfg.ga.mutation_rate is None and cfg.ga.max_generations == 2000
    assert cfg.pretrain_generations == 200 and cfg.schedule_epoch_len == 20
    assert cfg.seeds == tuple(range(20))


@pytest.mark.parametrize("item,expected", [
    ("ga.pop_size=500", ("ga", "pop_size", 500)),
    ("ga.mutation_rate=none", ("ga", "mutation_rate", None)),
    ("circuit.policy=feedforward", ("circuit", "policy", "feedforward")),
    ("schedule.reset_on_switch=true", ("schedule", "reset_on_switch", True)),
    ('goals.test=["AND(XOR,XOR)"]', ("goals", "test", ["AND(XOR,XOR)"])),
])
def test_parse_override(item, expected):
    assert parse_override(item) == expected


@pytest.mark.parametrize("item", ["ga.pop_size", "pop_size=3", "ga.colour=red", "x.y.z=1"])
def test_parse_override_rejects(item):
    with pytest.raises(ConfigurationError):
        parse_override(item)


@pytest.mark.parametrize("override", [
    "ga.pop_size=-5", "ga.pop_size=true", "ga.crossover_rate=2.0", "experiment.fn_threshold=1.0",
    "experiment.seeds=0", "experiment.seeds=[1,1]", "experiment.failure_mode=drop",
    "circuit.policy=async", "circuit.d=3", "goals.test=[]", 'goals.training=["AND(XOR)"]',
    "schedule.epoch_len=0", "experiment.workers=0",
])
def test_invalid_values(override):
    with pytest.raises(ConfigurationError):
        load_config("desk", [override])


def test_unknown_table_rejected():
    with pytest.raises(ConfigurationError):
        from_dict({"plotting": {"dpi": 300}})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        resolve_path(tmp_path / "missing.toml")


def test_malformed_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[ga\npop_size = 3\n")
    with pytest.raises(ConfigurationError):
        load_config(p)


def test_hash_tracks_semantics_only():
    raw = defaults()
    other = defaults()
    other["experiment"]["output_dir"] = "elsewhere"
    other["experiment"]["workers"] = 8
    assert config_hash(raw) == config_hash(other)
    other["ga"]["pop_size"] = 999
    assert config_hash(raw) != config_hash(other)


def test_schedules():
    cfg = load_config("desk")
    assert cfg.schedule(FG).kind == FG
    assert cfg.schedule(MVG).epoch_len == 20


def test_explicit_seed_list():
    cfg = load_config("desk", ["experiment.seeds=[3, 9]"])
    assert cfg.seeds == (3, 9)
