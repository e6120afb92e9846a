"""Configuration documents.

A document is YAML or JSON. Structure is checked against :data:`SCHEMA`
(every violation is collected), defaults are filled in, and then each engine
section is checked semantically by building the engine objects it
describes. Every problem is reported with the path of the field at fault,
e.g. ``ifat.lut[3].dst``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import yaml

from ..errors import ConfigError, ValidationError

FORMAT_VERSION = 1
ENGINES = ("ifat", "hiaer", "cortex", "crossbar", "wta")

_num = {"type": "number"}
_int = {"type": "integer"}
_nonneg_int = {"type": "integer", "minimum": 0}
_pair = {"type": "array", "items": _int, "minItems": 2, "maxItems": 2}

_generator = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "addresses"],
    "properties": {
        "kind": {"enum": ["poisson", "regular", "uniform"]},
        "addresses": {"oneOf": [{"type": "array", "items": _nonneg_int}, {"const": "all"}]},
        "rate_hz": {"type": "number", "minimum": 0},
        "period": {"type": "integer", "minimum": 1},
        "events_per_address": _nonneg_int,
        "start": {"type": "integer", "minimum": 0, "default": 0},
        "duration": {"type": "integer", "minimum": 0},
        "inhibitory": {"type": "boolean", "default": False},
    },
}

_stimulus = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "file": {"type": "string"},
        "events": {"type": "array", "items": {"type": "array", "items": _nonneg_int,
                                              "minItems": 2, "maxItems": 3}},
        "generators": {"type": "array", "items": _generator},
    },
}

_mn_neuron = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {k: _num for k in ("alpha_m", "alpha_t", "lambda_m", "lambda_t", "f_l_m", "f_l_t",
                                     "E_m", "V_r", "theta_r", "V_th_fixed", "E_inh")},
}

_ifat = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "rows": {"type": "integer", "minimum": 1, "default": 30},
        "cols": {"type": "integer", "minimum": 1, "default": 34},
        "mode": {"enum": ["MN", "LIF"], "default": "LIF"},
        "neuron": _mn_neuron,
        "mismatch_sigma": {"type": "number", "minimum": 0, "default": 0.0},
        "service_rate": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}], "default": 1},
        "leak_divisor_m": {"type": "integer", "minimum": 0, "default": 0},
        "leak_divisor_t": {"type": "integer", "minimum": 0, "default": 0},
        "lut": {
            "type": "array",
            "default": [],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["src", "dst"],
                "properties": {
                    "src": _nonneg_int,
                    "dst": _int,
                    "kind": {"enum": ["conductance", "probabilistic"], "default": "conductance"},
                    "weight": {"type": "number", "default": 1.0},
                    "polarity": {"enum": ["exc", "inh"], "default": "exc"},
                    "delay": {"type": "integer", "minimum": 0, "default": 0},
                },
            },
        },
    },
}

_hiaer = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "width": {"type": "integer", "minimum": 1, "default": 2},
        "height": {"type": "integer", "minimum": 1, "default": 2},
        "synapses": {
            "type": "array",
            "default": [],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["chip", "core", "neuron", "slot", "tag"],
                "properties": {
                    "chip": _pair, "core": _int, "neuron": _int, "slot": _int, "tag": _int,
                    "weight": {"type": "integer", "default": 1},
                    "type": {"enum": ["exc", "inh"], "default": "exc"},
                },
            },
        },
        "fanout": {
            "type": "array",
            "default": [],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["chip", "core", "neuron", "dests"],
                "properties": {
                    "chip": _pair, "core": _int, "neuron": _int,
                    "dests": {"type": "array", "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["dchip", "core_mask", "tag"],
                        "properties": {"dchip": _pair, "core_mask": _int, "tag": _int},
                    }},
                },
            },
        },
    },
}

_cortex = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "n_hypercolumns": {"type": "integer", "minimum": 1, "default": 2},
        "n_minicolumns": {"type": "integer", "minimum": 1, "default": 4},
        "stochastic_delays": {"type": "boolean", "default": False},
        "record_neurons": {"type": "boolean", "default": False},
        "types": {
            "type": "array",
            "minItems": 1,
            "default": [{"count": 100}],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["count"],
                "properties": {
                    "count": _nonneg_int, "leak": {"type": "number", "default": 0.0},
                    "threshold": {"type": "number", "default": 1.0},
                    "refractory": {"type": "integer", "default": 0},
                    "tau_psc": {"type": "number", "default": 5.0},
                },
            },
        },
        "rules": {
            "type": "array",
            "default": [],
            "items": {"type": "array", "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["weights"],
                "properties": {
                    "hc_offset": {"type": "integer", "default": 0},
                    "delay": {"type": "number", "default": 1},
                    "mc_map": {"oneOf": [{"enum": ["all", "identity"]},
                                         {"type": "object", "required": ["offset"],
                                          "additionalProperties": False,
                                          "properties": {"offset": _int}}],
                               "default": "all"},
                    "weights": {"type": "array", "items": _num},
                },
            }},
        },
        "external_weights": {"type": "array", "items": _num},
        "external": {
            "type": "array",
            "default": [],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["tick", "hc", "mc", "count", "weights"],
                "properties": {"tick": _nonneg_int, "hc": _int, "mc": _int, "count": _nonneg_int,
                               "weights": {"type": "array", "items": _num},
                               "delay": {"type": "number", "default": 1}},
            },
        },
    },
}

_device = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "levels": {"oneOf": [{"type": "integer", "minimum": 2}, {"type": "null"}]},
        "G_on": _num, "G_off": _num, "nu_pot": _num, "nu_dep": _num,
        "sigma_spatial": _num, "sigma_temporal": _num,
        "pulses_full_swing": _int, "pulses_per_period": _int,
    },
}

_crossbar = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "rows": {"type": "integer", "minimum": 1, "default": 8},
        "cols": {"type": "integer", "minimum": 1, "default": 8},
        "device": _device,
        "mitigation": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {"dummy_column": {"type": "boolean"}, "smart_programming": {"type": "boolean"},
                           "cells_per_weight": _int, "wire_width_relax": _num},
        },
        "wire_r": {"type": "number", "minimum": 0, "default": 0.0},
        "V_read": {"type": "number", "exclusiveMinimum": 0, "default": 0.1},
        "adc_bits": {"type": "integer", "minimum": 1, "maximum": 32, "default": 6},
        "threshold": {"oneOf": [_num, {"type": "null"}], "default": None},
        "weights": {"type": "array", "items": {"type": "array", "items": _num}},
        "reads": {"type": "integer", "minimum": 0, "default": 16},
        "inputs": {"type": "array", "items": {"type": "array", "items": {"enum": [0, 1]}}},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "levels": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1,
                           "default": [4, 16, 64, 256]},
                "rows": {"type": "integer", "minimum": 1, "default": 64},
                "cols": {"type": "integer", "minimum": 1, "default": 32},
                "trials": {"type": "integer", "minimum": 1, "default": 50},
            },
        },
    },
}

_wta_neuron = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {"leak_rate": _num, "threshold": _num, "refractory_period": _int,
                   "adapt_increment": _num, "adapt_decay": _num, "self_excitation_weight": _num},
}

_wta = {
    "type": "object",
    "additionalProperties": False,
    "default": {},
    "properties": {
        "rows": {"type": "integer", "minimum": 1, "default": 32},
        "cols": {"type": "integer", "minimum": 1, "default": 64},
        "flags": {"type": "array", "items": {"enum": ["LAT", "VERT1", "VERT2", "SELF"]},
                  "uniqueItems": True, "default": ["LAT", "VERT1"]},
        "weights": {"type": "object", "additionalProperties": _num, "default": {}},
        "inhibition": {"type": "boolean", "default": True},
        "wrap": {"type": "boolean", "default": False},
        "input_weight": {"type": "number", "default": 1.0},
        "neuron": _wta_neuron,
        "interneuron": _wta_neuron,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["format_version", "engine"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "engine": {"enum": list(ENGINES)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1, "default": 0},
        "ticks": {"oneOf": [{"type": "integer", "minimum": 0}, {"type": "null"}], "default": None},
        "tick_seconds": {"type": "number", "exclusiveMinimum": 0, "default": 1e-3},
        "trials": {"type": "integer", "minimum": 1, "default": 1},
        "workers": {"type": "integer", "minimum": 1, "default": 1},
        "energy_profile": {
            "oneOf": [
                {"type": "string"},
                {"type": "object", "additionalProperties": False, "required": ["pJ_per_synaptic_event"],
                 "properties": {"pJ_per_synaptic_event": {"type": "number", "minimum": 0},
                                "pJ_per_spike": {"type": "number", "minimum": 0},
                                "pJ_per_router_hop": {"type": "number", "minimum": 0}}},
            ],
            "default": "MNIFAT",
        },
        "stimulus": _stimulus,
        "ifat": _ifat,
        "hiaer": _hiaer,
        "cortex": _cortex,
        "crossbar": _crossbar,
        "wta": _wta,
    },
}


@dataclass
class NetworkConfig:
    """Validated document with defaults filled; ``doc`` is the canonical form."""

    doc: dict
    base_dir: str = "."

    @property
    def engine(self) -> str:
        return self.doc["engine"]

    @property
    def seed(self) -> int:
        return self.doc["seed"]

    @property
    def section(self) -> dict:
        return self.doc.get(self.engine, {})

    def with_overrides(self, **kw) -> "NetworkConfig":
        doc = copy.deepcopy(self.doc)
        for k, v in kw.items():
            if v is not None:
                doc[k] = v
        return load_config(doc, base_dir=self.base_dir)

    def to_document(self) -> dict:
        return copy.deepcopy(self.doc)

    def dumps(self, fmt: str = "yaml") -> str:
        if fmt == "json":
            return json.dumps(self.doc, sort_keys=True, indent=2)
        return yaml.safe_dump(self.doc, sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, NetworkConfig) and self.doc == other.doc


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _fill_defaults(node, schema):
    if not isinstance(node, dict) or schema.get("type") != "object":
        if isinstance(node, list) and "items" in schema and isinstance(schema["items"], dict):
            for v in node:
                _fill_defaults(v, schema["items"])
        return
    for key, sub in schema.get("properties", {}).items():
        if key not in node and "default" in sub:
            node[key] = copy.deepcopy(sub["default"])
        if key in node:
            _fill_defaults(node[key], sub)


def parse_document(text: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<root>: not well-formed YAML/JSON: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["<root>: document must be a mapping"])
    return doc


def load_config(document, base_dir: str | None = None) -> NetworkConfig:
    """Parse and validate ``document`` (a mapping, YAML/JSON text, or a path).

    Raises :class:`ConfigError` carrying every error found.
    """
    if isinstance(document, Path) or (isinstance(document, str) and "\n" not in document
                                      and Path(document).suffix in (".yaml", ".yml", ".json")):
        p = Path(document)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError([f"<root>: cannot read {p}: {exc.strerror}"]) from None
        doc = parse_document(text)
        base_dir = base_dir or str(p.parent)
    elif isinstance(document, str):
        doc = parse_document(document)
    elif isinstance(document, dict):
        doc = copy.deepcopy(document)
    else:
        raise ConfigError([f"<root>: unsupported document type {type(document).__name__}"])

    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise ConfigError([f"{_path(e.absolute_path)}: {e.message}" for e in errors])
    present = set(doc)
    _fill_defaults(doc, SCHEMA)
    for e in ENGINES:
        if e != doc["engine"] and e not in present:
            del doc[e]
    cfg = NetworkConfig(doc, base_dir or ".")
    problems = semantic_errors(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


# ---------------------------------------------------------------------------
# semantic checks


def semantic_errors(cfg: NetworkConfig) -> list[str]:
    from . import engines

    errs: list[str] = []
    doc = cfg.doc
    try:
        from .energy import resolve_profile
        resolve_profile(doc["energy_profile"])
    except ValidationError as exc:
        errs.append(f"energy_profile: {exc}")
    checker = engines.CHECKERS[cfg.engine]
    errs.extend(checker(cfg))
    errs.extend(_stimulus_errors(cfg))
    return errs


def _stimulus_errors(cfg: NetworkConfig) -> list[str]:
    from . import engines

    errs = []
    st = cfg.doc["stimulus"]
    limit = engines.address_limit(cfg)
    for i, ev in enumerate(st.get("events", [])):
        if limit is not None and ev[1] >= limit:
            errs.append(f"stimulus.events[{i}]: address {ev[1]} outside 0..{limit - 1}")
    for i, g in enumerate(st.get("generators", [])):
        where = f"stimulus.generators[{i}]"
        need = {"poisson": "rate_hz", "regular": "period", "uniform": "events_per_address"}[g["kind"]]
        if need not in g:
            errs.append(f"{where}.{need}: required for kind {g['kind']!r}")
        if g["kind"] == "poisson" and g.get("rate_hz", 0) * cfg.doc["tick_seconds"] > 1:
            errs.append(f"{where}.rate_hz: {g['rate_hz']} Hz exceeds one event per tick "
                        f"at tick_seconds={cfg.doc['tick_seconds']}")
        if g["kind"] != "uniform" and "duration" not in g and cfg.doc["ticks"] is None:
            errs.append(f"{where}.duration: required when the run length 'ticks' is not set")
        if isinstance(g["addresses"], list) and limit is not None:
            for j, a in enumerate(g["addresses"]):
                if a >= limit:
                    errs.append(f"{where}.addresses[{j}]: address {a} outside 0..{limit - 1}")
        if g.get("inhibitory") and cfg.engine != "ifat":
            errs.append(f"{where}.inhibitory: only the ifat engine accepts inhibitory input events")
    if "file" in st:
        p = Path(cfg.base_dir) / st["file"]
        if not p.is_file():
            errs.append(f"stimulus.file: no such file {p}")
    if cfg.engine == "crossbar" and (st.get("events") or st.get("generators") or "file" in st):
        errs.append("stimulus: the crossbar engine takes its inputs from crossbar.inputs/reads")
    return errs
