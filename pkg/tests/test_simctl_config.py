import json
from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from spikearray.errors import ConfigError
from spikearray.simctl import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "format_version": 1,
    "engine": "ifat",
    "ticks": 100,
    "ifat": {"rows": 4, "cols": 4, "lut": [{"src": 0, "dst": 1}, {"src": 1, "dst": 2, "weight": 0.5}]},
    "stimulus": {"events": [[0, 0], [3, 1]]},
}

# (path, bad value, expected path prefix in the error)
MUTATIONS = [
    (("ticks",), "soon", "ticks"),
    (("seed",), -4, "seed"),
    (("trials",), 0, "trials"),
    (("ifat", "rows"), 0, "ifat.rows"),
    (("ifat", "mode"), "HH", "ifat.mode"),
    (("ifat", "lut", 0, "kind"), "maybe", "ifat.lut[0].kind"),
    (("ifat", "lut", 1, "delay"), -2, "ifat.lut[1].delay"),
    (("stimulus", "events", 1), [3], "stimulus.events[1]"),
    (("tick_seconds",), 0, "tick_seconds"),
    (("energy_profile",), 5, "energy_profile"),
]


def mutate(doc, path, value):
    node = doc
    for p in path[:-1]:
        node = node[p]
    node[path[-1]] = value


def errors_of(doc):
    with pytest.raises(ConfigError) as ei:
        load_config(doc)
    return ei.value.errors


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_validate(name):
    cfg = load_config(CONFIGS / name)
    assert cfg.engine in name


def test_defaults_filled():
    cfg = load_config(json.loads(json.dumps(BASE)))
    assert cfg.seed == 0 and cfg.doc["trials"] == 1 and cfg.doc["energy_profile"] == "MNIFAT"
    assert cfg.section["mode"] == "LIF"
    assert "hiaer" not in cfg.doc


@pytest.mark.parametrize("fmt", ["yaml", "json"])
def test_round_trip(fmt):
    cfg = load_config(CONFIGS / "cortex_small.yaml")
    again = load_config(cfg.dumps(fmt) if fmt == "yaml" else cfg.dumps(fmt).replace("\n", " ") + "\n")
    assert again == cfg
    assert load_config(cfg.to_document()) == cfg


def test_every_error_reported_with_path():
    doc = json.loads(json.dumps(BASE))
    for path, bad, _ in MUTATIONS:
        mutate(doc, path, bad)
    errs = errors_of(doc)
    for _, _, where in MUTATIONS:
        assert any(e.startswith(where) for e in errs), where


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(0, len(MUTATIONS) - 1), min_size=1))
def test_validation_completeness(picked):
    doc = json.loads(json.dumps(BASE))
    for i in picked:
        mutate(doc, MUTATIONS[i][0], MUTATIONS[i][1])
    errs = errors_of(doc)
    for i in picked:
        assert any(e.startswith(MUTATIONS[i][2]) for e in errs), MUTATIONS[i][2]


def test_semantic_errors_name_the_field():
    doc = json.loads(json.dumps(BASE))
    doc["ifat"]["lut"].append({"src": 2, "dst": 99})
    assert any(e.startswith("ifat.lut[2]") for e in errors_of(doc))


def test_direct_stimulus_bounded_by_array():
    doc = json.loads(json.dumps(BASE))
    del doc["ifat"]["lut"]
    doc["stimulus"]["events"].append([5, 400])
    assert errors_of(doc) == ["stimulus.events[2]: address 400 outside 0..63"]


def test_unknown_keys_and_version():
    doc = json.loads(json.dumps(BASE))
    doc["format_version"] = 2
    doc["ifat"]["colour"] = "red"
    errs = errors_of(doc)
    assert any(e.startswith("format_version") for e in errs)
    assert any(e.startswith("ifat") and "colour" in e for e in errs)


def test_generator_requirements():
    doc = json.loads(json.dumps(BASE))
    doc["ticks"] = None
    doc["stimulus"] = {"generators": [{"kind": "poisson", "addresses": [0]}]}
    errs = errors_of(doc)
    assert any(e.startswith("stimulus.generators[0].rate_hz") for e in errs)
    assert any(e.startswith("stimulus.generators[0].duration") for e in errs)


def test_missing_stimulus_file(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["stimulus"] = {"file": "nope.csv"}
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(doc))
    with pytest.raises(ConfigError) as ei:
        load_config(p)
    assert ei.value.errors[0].startswith("stimulus.file")


def test_malformed_documents(tmp_path):
    with pytest.raises(ConfigError):
        load_config("engine: [unterminated\n")
    with pytest.raises(ConfigError):
        load_config("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_overrides_revalidate():
    cfg = load_config(json.loads(json.dumps(BASE)))
    assert cfg.with_overrides(seed=9).seed == 9
    with pytest.raises(ConfigError):
        cfg.with_overrides(ticks=-1)


def test_unknown_energy_profile():
    doc = json.loads(json.dumps(BASE))
    doc["energy_profile"] = "Abacus"
    assert errors_of(doc)[0].startswith("energy_profile")


def test_poisson_rate_above_tick_rate_rejected():
    doc = {"format_version": 1, "engine": "wta", "ticks": 10, "tick_seconds": 1e-2, "wta": {"rows": 1, "cols": 2},
           "stimulus": {"generators": [{"kind": "poisson", "addresses": [0], "rate_hz": 150}]}}
    assert errors_of(doc)[0].startswith("stimulus.generators[0].rate_hz")
