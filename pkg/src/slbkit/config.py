"""Run-configuration loading, schema validation and object construction."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import yaml

from .model import BUILTINS, Alphabet, DistortionSpec, DomainError, make_iwf, table_function

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_INTS = {"type": "array", "items": _INT, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


ALPHABET = {"oneOf": [
    _obj({"kind": {"const": "modular"}, "r": {"type": "integer", "minimum": 2}}, ["kind", "r"]),
    _obj({"kind": {"const": "discrete"}, "symbols": _NUMS}, ["kind", "symbols"]),
    _obj({"kind": {"const": "interval"}, "lower": _NUM, "upper": _NUM,
          "nodes": {"type": "integer", "minimum": 16}, "rule": {"enum": ["simpson", "gauss"]}},
         ["kind", "lower", "upper"]),
    _obj({"kind": {"const": "real_line"}, "nodes": {"type": "integer", "minimum": 17}}, ["kind"]),
]}

FUNCTION = _obj({
    "fn": {"enum": ["abs", "square", "hamming", "negcorr", "iwf", "table"]},
    "A": {"type": "number", "exclusiveMinimum": 0},
    "values": {"type": "array"},
    "label": {"type": "string"},
}, ["fn"])

DISTORTION = {"type": "array", "items": FUNCTION, "minItems": 1}
LEVELS = {"type": "array", "minItems": 1, "items": {"oneOf": [_NUM, _NUMS]}}
PROBLEM = {"alphabet": ALPHABET, "distortion": DISTORTION, "D": LEVELS}

QUANTIZER = _obj({"m": {"type": "integer", "minimum": 1}, "codebook": {"type": "array"},
                  "assignment": _INTS}, ["m", "codebook", "assignment"])

SCHEMAS = {
    "phi": _obj({**PROBLEM, "seed": _INT}, ["alphabet", "distortion", "D"]),
    "volume": _obj({**PROBLEM, "n": _INTS, "seed": _INT,
                    "methods": {"type": "array", "items": {"enum": ["saddlepoint", "chernoff", "exact",
                                                                      "monte-carlo"]}},
                    "samples": {"type": "integer", "minimum": 1}},
                   ["alphabet", "distortion", "D", "n"]),
    "kraft": _obj({
        "seed": _INT,
        "campaigns": {"type": "array", "items": _obj({
            "lemma": {"enum": ["ud", "one-to-one", "semifaithful", "fixed-rate", "fs-encoder"]},
            "trials": {"type": "integer", "minimum": 1},
            "r": {"type": "integer", "minimum": 2},
            "max_n": {"type": "integer", "minimum": 1, "maximum": 20}}, ["lemma", "trials"])},
        "codes": {"type": "array", "items": _obj({
            "build": {"enum": ["explicit", "shannon-lengths", "one-to-one-enumerative", "fixed-rate",
                               "d-semifaithful-cover"]},
            "class": {"enum": ["ud", "one-to-one", "fixed-rate"]},
            "lemma": {"enum": ["ud", "one-to-one", "semifaithful", "fixed-rate"]},
            "n": {"type": "integer", "minimum": 1}, "r": {"type": "integer", "minimum": 2},
            "codebook": {"type": "array"}, "lengths": _INTS, "probabilities": _NUMS,
            "assignment": _INTS, "rate": _NUM, "D": _NUM,
            "alpha": _NUMS, "beta": _NUMS}, ["build", "n", "alpha"])},
        "encoders": {"type": "array", "items": _obj({
            "output": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
            "next_state": {"type": "array", "items": _INTS},
            "initial": _INT, "r": {"type": "integer", "minimum": 2},
            "quantizer": QUANTIZER, "ell": {"type": "integer", "minimum": 1},
            "alpha": _NUMS, "beta": _NUMS}, ["output", "next_state", "ell", "alpha"])},
    }),
    "slb": _obj({
        "source": _obj({"type": {"enum": ["gaussian", "uniform", "bernoulli", "custom"]},
                        "sigma2": {"type": "number", "exclusiveMinimum": 0}, "lower": _NUM, "upper": _NUM,
                        "p": {"type": "number", "minimum": 0, "maximum": 1}, "h_rate": _NUM,
                        "alphabet": ALPHABET, "distortion": DISTORTION}, ["type"]),
        "D": LEVELS, "n": _INTS, "seed": _INT}, ["source", "D", "n"]),
    "sliding": _obj({
        **PROBLEM, "h_rate": _NUM, "seed": _INT,
        "gaussian_example": _obj({"D": {"type": "number", "exclusiveMinimum": 0},
                                  "theta": _NUMS, "nodes": {"type": "integer", "minimum": 17},
                                  "half_width": {"type": "number", "exclusiveMinimum": 0}}, ["theta"]),
    }),
    "indiv": _obj({
        "seed": _INT,
        "sequences": {"type": "array", "items": _obj({
            "text": {"type": "string"}, "file": {"type": "string"},
            "alphabet": {"type": "array", "items": {"type": "string"}, "minItems": 2},
            "reproduction": {"oneOf": [{"enum": ["identity", "pair-quantizer"]},
                                       _obj({"text": {"type": "string"}, "file": {"type": "string"}})]},
            "ell": {"type": "integer", "minimum": 1}, "states": {"type": "integer", "minimum": 1},
            "l_max": {"type": "number", "minimum": 0}, "zeta": {"type": "number", "exclusiveMinimum": 0},
            "delta": _NUM})},
        "harness": _obj({"trials": {"type": "integer", "minimum": 1}, "n": {"type": "integer", "minimum": 2},
                         "ell": {"type": "integer", "minimum": 1}}),
    }),
}


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> dict:
    """Read YAML or JSON (YAML is a superset, so one parser serves both)."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return {} if data is None else data


def validate(command: str, config: dict) -> None:
    try:
        jsonschema.validate(config, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {command} config at {where}: {exc.message}") from None


def build_alphabet(block: dict) -> Alphabet:
    kind = block["kind"]
    if kind == "modular":
        return Alphabet.modular(block["r"])
    if kind == "discrete":
        return Alphabet.discrete(block["symbols"])
    if kind == "interval":
        return Alphabet.interval(block["lower"], block["upper"], block.get("nodes", 2001),
                                 block.get("rule", "simpson"))
    return Alphabet("interval", lower=-1.0, upper=1.0, node_count=block.get("nodes", 4001), real_line=True)


def build_spec(items: list, alphabet: Alphabet | None) -> DistortionSpec:
    fns = []
    for item in items:
        fn = item["fn"]
        if fn == "iwf":
            if "A" not in item:
                raise ConfigError("iwf needs a width A")
            fns.append(make_iwf(item["A"]))
        elif fn == "table":
            if "values" not in item or alphabet is None:
                raise ConfigError("table distortion needs values and a finite alphabet")
            fns.append(table_function(alphabet, item["values"], item.get("label", "table")))
        else:
            fns.append(BUILTINS[fn]())
    return DistortionSpec(tuple(fns))


def level_grid(levels: list, k: int) -> list[tuple[float, ...]]:
    out = []
    for lv in levels:
        vec = (float(lv),) if isinstance(lv, (int, float)) else tuple(float(x) for x in lv)
        if len(vec) != k:
            raise ConfigError(f"level {lv} has {len(vec)} entries, expected {k}")
        out.append(vec)
    return out


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True)


__all__ = ["ConfigError", "SCHEMAS", "load_config", "validate", "build_alphabet", "build_spec",
           "level_grid", "DomainError"]
