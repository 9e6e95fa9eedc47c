"""Run configuration: a JSON file plus dotted-key command-line overrides.

Every setting has a dotted name (`svm.C`, `bof.k`, ...) and a typed
schema entry. The JSON file may nest objects or use dotted keys
directly; command-line overrides arrive as strings and are coerced by
the schema. RunConfig records which keys get read, so each CLI
subcommand can be checked against the keys its help text documents.
"""

from __future__ import annotations

import json
import os

from .errors import ConfigError

# kind -> how override strings and JSON values are coerced
_KINDS = ("str", "path", "int", "float", "optional_float", "bool", "str_list", "float_list")

SCHEMA = {
    "bundle": ("path", None),
    "manifest": ("path", None),
    "out": ("path", "."),
    "classes": ("str_list", ["hookah", "nonhookah"]),
    "mean": ("float_list", [123.68, 116.78, 103.94]),
    "seed": ("int", 0),
    "threads": ("int", 0),
    "skip_bad": ("bool", False),
    "svm.C": ("float", 1.0),
    "svm.kernel": ("str", "linear"),
    "svm.gamma": ("optional_float", None),
    "svm.tol": ("float", 1e-3),
    "svm.max_passes": ("int", 50),
    "tuner.budget": ("int", 30),
    "tuner.folds": ("int", 3),
    "tuner.seed": ("int", 0),
    "bof.k": ("int", 32),
    "bof.patch": ("int", 16),
    "bof.stride": ("int", 8),
    "bof.kmeans_iters": ("int", 40),
    "bof.descriptor_cap": ("int", 20000),
    "softmax.lr": ("float", 0.1),
    "softmax.epochs": ("int", 200),
    "curve.fractions": ("float_list", [round(0.1 * k, 1) for k in range(1, 11)]),
    "curve.methods": ("str_list", ["cnn_svm", "raw_svm", "bof", "softmax"]),
}

THREADS_ENV = "FEATPIPE_THREADS"


def _coerce(key: str, value, *, from_string: bool):
    kind, _ = SCHEMA[key]
    try:
        if kind in ("str", "path"):
            if value is None:
                return None
            if not isinstance(value, str):
                raise ConfigError(f"config key {key!r} expects a string")
            return value
        if kind == "int":
            if from_string:
                return int(value, 10)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {key!r} expects an integer")
            return value
        if kind == "float":
            if from_string:
                return float(value)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key!r} expects a number")
            return float(value)
        if kind == "optional_float":
            if value is None or value == "":
                return None
            return _coerce_number(key, value, from_string)
        if kind == "bool":
            if from_string:
                lowered = str(value).lower()
                if lowered in ("true", "1", "yes"):
                    return True
                if lowered in ("false", "0", "no"):
                    return False
                raise ConfigError(f"config key {key!r} expects true or false")
            if not isinstance(value, bool):
                raise ConfigError(f"config key {key!r} expects a boolean")
            return value
        if kind == "str_list":
            if from_string:
                return [part for part in str(value).split(",") if part]
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ConfigError(f"config key {key!r} expects a list of strings")
            return list(value)
        if kind == "float_list":
            if from_string:
                return [float(part) for part in str(value).split(",") if part]
            if not isinstance(value, list):
                raise ConfigError(f"config key {key!r} expects a list of numbers")
            return [float(v) for v in value]
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r} ({exc})") from exc
    raise ConfigError(f"config key {key!r} has an unhandled kind {kind!r}")


def _coerce_number(key, value, from_string):
    if from_string:
        return float(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key {key!r} expects a number")
    return float(value)


def _flatten(obj: dict, prefix: str = "") -> dict:
    flat = {}
    for name, value in obj.items():
        dotted = f"{prefix}{name}"
        if isinstance(value, dict) and dotted not in SCHEMA:
            flat.update(_flatten(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


class RunConfig:
    """Schema-checked settings with read tracking."""

    def __init__(self, values: dict = None):
        self._values = {key: default for key, (_, default) in SCHEMA.items()}
        self._read = set()
        for key, value in (values or {}).items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            self._values[key] = _coerce(key, value, from_string=False)

    @classmethod
    def load(cls, path: str = None) -> "RunConfig":
        """Parse a JSON config file; no path means pure defaults."""
        if path is None:
            return cls()
        try:
            with open(path, "r", encoding="utf-8") as handle:
                raw = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path!r} must hold a JSON object")
        return cls(_flatten(raw))

    def override(self, key: str, value: str) -> None:
        """Apply one command-line override (string form)."""
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self._values[key] = _coerce(key, value, from_string=True)

    def get(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self._read.add(key)
        return self._values[key]

    def read_keys(self) -> frozenset:
        """Dotted names of every key read so far."""
        return frozenset(self._read)

    def require_path(self, key: str) -> str:
        """Read a path key that must be set and must exist."""
        value = self.get(key)
        if not value:
            raise ConfigError(f"config key {key!r} is required but not set")
        if not os.path.exists(value):
            raise ConfigError(f"config key {key!r} points to a missing path: {value!r}")
        return value

    def positive_int(self, key: str) -> int:
        value = self.get(key)
        if value < 1:
            raise ConfigError(f"config key {key!r} must be positive, got {value}")
        return value

    def threads(self) -> int:
        """Thread count: config value, else the environment, else one."""
        value = self.get("threads")
        if value > 0:
            return value
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                parsed = int(env, 10)
            except ValueError as exc:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
            if parsed < 1:
                raise ConfigError(f"{THREADS_ENV} must be positive, got {parsed}")
            return parsed
        return 1
