"""Experiment configuration: loading with includes, overrides and schema
validation. Unknown keys are rejected at every level."""
from __future__ import annotations

import copy
import json
import os
import re
from typing import Any, Dict, List, Optional, Sequence

import jsonschema
import yaml

from .errors import ConfigError

EXPERIMENTS = ("lyapunov", "birkhoff", "walk", "windtree", "roth", "correlation", "tracking")
SURFACE_FREE = ("windtree", "tracking")
MAX_INCLUDE_DEPTH = 8

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_thetas = {"type": "array", "items": _num, "minItems": 1}
_seeds = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_phi = {
    "type": "object",
    "properties": {
        "name": {"enum": ["systole_indicator", "constant"]},
        "eps": _pos, "kappa": _pos, "value": _num,
    },
    "required": ["name"],
    "additionalProperties": False,
}
_measure = {
    "type": "object",
    "properties": {
        "knots": {"type": "array", "items": _num, "minItems": 2},
        "values": {"type": "array", "items": _num, "minItems": 2},
    },
    "required": ["knots", "values"],
    "additionalProperties": False,
}


def _params(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


PARAM_SCHEMAS = {
    "lyapunov": _params({
        "thetas": _thetas, "n_theta": _posint, "T": _pos, "dt": _pos,
        "backends": {"type": "array", "items": {"enum": ["delaunay", "rauzy"]}, "minItems": 1, "uniqueItems": True},
        "n_windows": {"type": "integer", "minimum": 10},
    }),
    "birkhoff": _params({
        "thetas": _thetas, "n_theta": {"type": "integer", "minimum": 10},
        "Ts": {"type": "array", "items": _pos, "minItems": 1}, "dt": _pos, "phi": _phi,
    }),
    "walk": _params({
        "seeds": _seeds, "n_seeds": _posint, "n_steps": {"type": "integer", "minimum": 100},
        "n_mc": _posint, "checkpoints": {"type": "array", "items": _posint, "minItems": 1},
        "phi": _phi, "measure": _measure,
    }),
    "tracking": _params({
        "seeds": _seeds, "n_seeds": _posint, "n_steps": {"type": "integer", "minimum": 100},
        "checkpoints": {"type": "array", "items": _posint, "minItems": 1}, "measure": _measure,
    }),
    "windtree": _params({
        "a": _pos, "b": _pos, "thetas": _thetas, "n_theta": _posint,
        "t_min": _pos, "t_max": _pos, "per_decade": _posint, "fit_from": _pos,
        "start": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
    }),
    "roth": _params({
        "thetas": _thetas, "n_theta": _posint, "i_max": _posint, "dt": _pos, "horizon": _pos,
    }),
    "correlation": _params({
        "alpha": _num, "ts": {"type": "array", "items": _num, "minItems": 2},
        "n_theta": {"type": "integer", "minimum": 512}, "phi": _phi,
        "min_gap": _pos, "max_gap": _pos, "dt": _pos,
    }),
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "surface": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string", "minLength": 1},
        "workers": _posint,
        "checkpoint_every": _posint,
        "include": {"type": "array", "items": {"type": "string"}},
        "params": {"type": "object"},
    },
    "required": ["experiment"],
    "additionalProperties": False,
}

DEFAULTS = {
    "seed": 0,
    "out_dir": "results",
    "checkpoint_every": 10,
}

PARAM_DEFAULTS = {
    "lyapunov": {"T": 10000.0, "dt": 0.5, "backends": ["delaunay"], "n_windows": 10, "n_theta": 8},
    "birkhoff": {"Ts": [1000.0, 2000.0, 4000.0], "dt": 0.5, "n_theta": 20,
                 "phi": {"name": "systole_indicator", "eps": 0.3, "kappa": 0.2}},
    "walk": {"n_seeds": 10, "n_steps": 4000, "n_mc": 8, "checkpoints": [500, 1000, 2000, 4000],
             "phi": {"name": "systole_indicator", "eps": 0.3, "kappa": 0.2}},
    "tracking": {"n_seeds": 20, "n_steps": 5000, "checkpoints": [200, 500, 1000, 2000, 5000]},
    "windtree": {"a": 0.5, "b": 0.5, "n_theta": 32, "t_min": 100.0, "t_max": 1e6, "per_decade": 8,
                 "fit_from": 1e3},
    "roth": {"n_theta": 20, "i_max": 30, "dt": 0.5, "horizon": 15.0},
    "correlation": {"alpha": 0.5, "ts": [1.0, 1.5, 2.0, 3.0, 4.0, 6.0], "n_theta": 512,
                    "phi": {"name": "systole_indicator", "eps": 0.3, "kappa": 0.2},
                    "min_gap": 0.5, "max_gap": 5.0, "dt": 0.5},
}


def deep_merge(base: dict, over: dict) -> dict:
    """``over`` wins; nested dicts merge, everything else is replaced."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e4`` and ``1.0e4`` as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def parse_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def _read(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text) if path.endswith(".json") else parse_yaml(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(path: str, _depth: int = 0) -> dict:
    """Read a YAML or JSON file and resolve ``include`` lists; included
    files are merged first, in order, and the including file wins."""
    if _depth > MAX_INCLUDE_DEPTH:
        raise ConfigError(f"include nesting deeper than {MAX_INCLUDE_DEPTH} at {path}")
    data = _read(path)
    includes = data.pop("include", []) or []
    if not isinstance(includes, list):
        raise ConfigError(f"{path}: include must be a list")
    merged: dict = {}
    here = os.path.dirname(os.path.abspath(path))
    for inc in includes:
        inc_path = inc if os.path.isabs(inc) else os.path.join(here, inc)
        merged = deep_merge(merged, load_config(inc_path, _depth + 1))
    return deep_merge(merged, data)


def parse_override(text: str) -> dict:
    """``a.b.c=value`` into a nested dict; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = parse_yaml(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
    out: Dict[str, Any] = {}
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return out


def _where(exc, prefix: str = "") -> str:
    parts = ([prefix] if prefix else []) + [str(p) for p in exc.absolute_path]
    return "/".join(parts) or "<root>"


def validate(config: dict) -> dict:
    """Check the schema and fill defaults; returns a new dict."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config at {_where(exc)}: {exc.message}") from None
    kind = config["experiment"]
    try:
        jsonschema.validate(config.get("params", {}), PARAM_SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config at {_where(exc, 'params')}: {exc.message}") from None
    if kind not in SURFACE_FREE and "surface" not in config:
        raise ConfigError(f"experiment {kind!r} needs a surface")
    out = deep_merge(DEFAULTS, config)
    params = deep_merge(PARAM_DEFAULTS[kind], config.get("params", {}))
    if "thetas" in params:
        params.pop("n_theta", None)
    if "seeds" in params:
        params.pop("n_seeds", None)
    _check_semantics(kind, params)
    out["params"] = params
    return out


def _check_semantics(kind: str, p: dict) -> None:
    if kind == "windtree":
        if not (p["a"] < 1 and p["b"] < 1):
            raise ConfigError("scatterer sides a and b must be below 1")
        if p["t_max"] <= p["t_min"]:
            raise ConfigError("t_max must exceed t_min")
    if kind in ("walk", "tracking"):
        if max(p["checkpoints"]) > p["n_steps"]:
            raise ConfigError("checkpoints exceed n_steps")
    if kind == "correlation" and p["max_gap"] <= p["min_gap"]:
        raise ConfigError("max_gap must exceed min_gap")


def build_config(path: Optional[str], overrides: Sequence[str] = (), flags: Optional[dict] = None) -> dict:
    """File, then ``--set`` overrides, then explicit flags; validated."""
    config = load_config(path) if path else {}
    for o in overrides:
        config = deep_merge(config, parse_override(o))
    for k, v in (flags or {}).items():
        if v is not None:
            config[k] = v
    return validate(config)


def dump_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, indent=1)


def example_config(kind: str) -> dict:
    base: Dict[str, Any] = {"experiment": kind}
    if kind not in SURFACE_FREE:
        base["surface"] = "L3"
    base["params"] = copy.deepcopy(PARAM_DEFAULTS[kind])
    return base


__all__: List[str] = ["EXPERIMENTS", "CONFIG_SCHEMA", "PARAM_SCHEMAS", "load_config", "validate",
                      "build_config", "parse_override", "deep_merge", "dump_config", "example_config"]
