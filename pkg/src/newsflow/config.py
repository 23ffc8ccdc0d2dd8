"""JSON configuration: defaults, validation and path resolution.

A config file is one JSON object. Only ``chunk_store_path`` and
``index_path`` are required; every other key has a default. Unknown keys,
type mismatches and out-of-range values raise :class:`ConfigError` naming
the offending key (dotted for section keys, e.g. ``dedup.quant_rate``).
Relative paths are resolved against the directory holding the config file,
so a loaded config holds absolute paths and dumps back to an equivalent file.
"""
import copy
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

from .events import CATEGORIES
from .linking import DEFAULT_CUE_WORDS, DEFAULT_LAMBDA, DEFAULT_LEGAL_SUFFIXES, MAX_NGRAM


class ConfigError(ValueError):
    pass


_REQUIRED = object()


@dataclass(frozen=True)
class Field:
    kind: str  # int, float, bool, str, path, str_list, lambda, thresholds
    default: Any = None
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""


def _positive(x):
    return x > 0


def _unit(x):
    return 0 <= x <= 1


TOP = {
    "poll_interval_ms": Field("int", 60000, _positive, "must be > 0"),
    "visibility_timeout_ms": Field("int", 300000, _positive, "must be > 0"),
    "worker_concurrency": Field("int", 4, lambda x: x >= 1, "must be >= 1"),
    "chunk_store_path": Field("path", _REQUIRED),
    "index_path": Field("path", _REQUIRED),
    # queue, watermark, coordinator lock and default register live here
    "state_path": Field("path", None),
    "max_chunk_items": Field("int", 1000, lambda x: x >= 1, "must be >= 1"),
}

SECTIONS = {
    "cleanse": {
        "min_length": Field("int", 350, lambda x: x >= 0, "must be >= 0"),
        "min_density": Field("float", 0.25, _unit, "must be in [0, 1]"),
        "require_title": Field("bool", True),
        "block_density": Field("float", 0.25, _unit, "must be in [0, 1]"),
    },
    "dedup": {
        "quant_rate": Field("float", 0.01, lambda x: 0 < x <= 1, "must be in (0, 1]"),
        "min_quant": Field("int", 2, lambda x: x >= 1, "must be >= 1"),
        "min_profile_terms": Field("int", 4, lambda x: x >= 0, "must be >= 0"),
        "register_path": Field("path", None),
    },
    "entity_linking": {
        "gazetteer_path": Field("path", None),
        "threshold": Field("float", 0.0, _unit, "must be in [0, 1]"),
        "lambda": Field("lambda", list(DEFAULT_LAMBDA)),
        "cue_words": Field("str_list", list(DEFAULT_CUE_WORDS)),
        "legal_suffixes": Field("str_list", list(DEFAULT_LEGAL_SUFFIXES)),
        "include_generic": Field("bool", False),
        "max_ngram": Field("int", MAX_NGRAM, lambda x: x >= 1, "must be >= 1"),
    },
    "events": {
        "models_path": Field("path", None),
        # directory of <category>.jsonl labeled files used by train and cv
        "labels_path": Field("path", None),
        "thresholds": Field("thresholds", {}),
        "l2": Field("float", 1e-4, lambda x: x >= 0, "must be >= 0"),
        "epochs": Field("int", 200, lambda x: x >= 1, "must be >= 1"),
        "learning_rate": Field("float", 0.5, _positive, "must be > 0"),
        "stopwords": Field("str_list", None),
    },
    "serve": {
        "host": Field("str", "127.0.0.1"),
        "port": Field("int", 8080, lambda x: 0 <= x <= 65535, "must be in [0, 65535]"),
    },
}


def _coerce(name: str, f: Field, value, base_dir: str):
    if value is None:
        if f.default is None:
            return None
        raise ConfigError(f"{name}: must not be null")
    kind = f.kind
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {type(value).__name__}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {type(value).__name__}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{name}: must be finite")
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true or false, got {type(value).__name__}")
    elif kind in ("str", "path"):
        if not isinstance(value, str) or not value:
            raise ConfigError(f"{name}: expected a non-empty string")
        if kind == "path":
            value = os.path.normpath(os.path.join(base_dir, os.path.expanduser(value)))
    elif kind == "str_list":
        if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
            raise ConfigError(f"{name}: expected a list of non-empty strings")
        value = list(value)
    elif kind == "lambda":
        if (not isinstance(value, list) or len(value) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
            raise ConfigError(f"{name}: expected three numbers")
        value = [float(v) for v in value]
        if any(v < 0 for v in value) or abs(sum(value) - 1) > 1e-9:
            raise ConfigError(f"{name}: weights must be >= 0 and sum to 1")
    elif kind == "thresholds":
        if not isinstance(value, dict):
            raise ConfigError(f"{name}: expected an object mapping category to threshold")
        out = {}
        for cat, tau in value.items():
            if cat not in CATEGORIES:
                raise ConfigError(f"{name}.{cat}: unknown event category")
            if isinstance(tau, bool) or not isinstance(tau, (int, float)) or not 0 <= tau <= 1:
                raise ConfigError(f"{name}.{cat}: expected a number in [0, 1]")
            out[cat] = float(tau)
        value = dict(sorted(out.items()))
    if f.check is not None and not f.check(value):
        raise ConfigError(f"{name}: {f.rule} (got {value!r})")
    return value


def _fill(fields: Dict[str, Field], given: dict, prefix: str, base_dir: str) -> dict:
    unknown = sorted(set(given) - set(fields))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}: unknown key")
    out = {}
    for key, f in fields.items():
        name = prefix + key
        if key in given:
            out[key] = _coerce(name, f, given[key], base_dir)
        elif f.default is _REQUIRED:
            raise ConfigError(f"{name}: missing required key")
        else:
            out[key] = copy.deepcopy(f.default)
    return out


def validate_config(raw: dict, base_dir: str = ".") -> dict:
    """Defaulted, validated copy of ``raw`` with absolute paths."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    base_dir = os.path.abspath(base_dir)
    top_given = {k: v for k, v in raw.items() if k not in SECTIONS}
    cfg = _fill(TOP, top_given, "", base_dir)
    for section, fields in SECTIONS.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{section}: expected an object")
        cfg[section] = _fill(fields, given, section + ".", base_dir)
    if cfg["state_path"] is None:
        cfg["state_path"] = os.path.join(os.path.dirname(cfg["index_path"]), "state")
    if cfg["dedup"]["register_path"] is None:
        cfg["dedup"]["register_path"] = os.path.join(cfg["state_path"], "register.db")
    return cfg


def load_config(path) -> dict:
    """Parse, default and validate the config file at ``path``."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    return validate_config(raw, os.path.dirname(os.path.abspath(path)))


def dump_config(cfg: dict, path=None) -> str:
    """Serialize an effective config; loading the result yields ``cfg`` again."""
    text = json.dumps(cfg, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def default_config(chunk_store_path: str, index_path: str) -> dict:
    return validate_config({"chunk_store_path": chunk_store_path, "index_path": index_path})
