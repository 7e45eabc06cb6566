import json
import os
from pathlib import Path

from dotenv import load_dotenv

from config.settings import PIPELINE_DEFAULTS, PIPELINE_SCHEMA
from config.taxonomy import EDGE_CLASSES
from utils.exceptions import ConfigError

load_dotenv()


class PipelineConfig:
    """Validated flat configuration: defaults < config file < CLI overrides"""

    def __init__(self, values=None, workdir="."):
        self.workdir = Path(workdir)
        merged = dict(PIPELINE_DEFAULTS)
        explicit_seed = False
        for key, value in (values or {}).items():
            if key not in PIPELINE_SCHEMA:
                raise ConfigError(key, "unknown key")
            merged[key] = value
            explicit_seed = explicit_seed or key == "seed"

        if not explicit_seed and os.getenv("CGB_SEED"):
            merged["seed"] = os.getenv("CGB_SEED")

        self._values = {key: self._validate(key, value) for key, value in merged.items()}
        self._validate_relations()

    @classmethod
    def load(cls, path=None, overrides=None, workdir="."):
        values = {}
        if path:
            config_path = Path(workdir) / path
            try:
                values = json.loads(config_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError(str(path), f"not valid JSON ({e.msg})")
            if not isinstance(values, dict):
                raise ConfigError(str(path), "config file must hold a JSON object")
        values.update(overrides or {})
        return cls(values, workdir=workdir)

    @staticmethod
    def parse_override(text: str):
        """Turn a `key=value` CLI override into (key, value) with JSON-ish typing"""
        if "=" not in text:
            raise ConfigError(text, "override must look like key=value")
        key, raw = text.split("=", 1)
        key = key.strip()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        return key, value

    def _validate(self, key, value):
        rule = PIPELINE_SCHEMA[key]

        if rule == "edge_classes":
            parts = [part.strip() for part in str(value).split(",") if part.strip()]
            if not parts or any(part not in EDGE_CLASSES for part in parts):
                raise ConfigError(key, f"expected a comma list of {sorted(EDGE_CLASSES)}")
            return ",".join(part for part in EDGE_CLASSES if part in parts)

        if isinstance(rule[0], str):
            if value not in rule:
                raise ConfigError(key, f"expected one of {list(rule)}")
            return value

        kind, lower, upper = rule
        if kind is bool:
            if not isinstance(value, bool):
                raise ConfigError(key, "expected a boolean")
            return value
        if kind is str:
            if not isinstance(value, str):
                raise ConfigError(key, "expected a string")
            return value
        if kind is int:
            if isinstance(value, bool):
                raise ConfigError(key, "expected an integer")
            try:
                number = int(value)
            except (TypeError, ValueError):
                raise ConfigError(key, "expected an integer")
            if isinstance(value, float) and number != value:
                raise ConfigError(key, "expected an integer")
        else:
            if isinstance(value, bool):
                raise ConfigError(key, "expected a number")
            try:
                number = float(value)
            except (TypeError, ValueError):
                raise ConfigError(key, "expected a number")

        if not lower <= number <= upper:
            raise ConfigError(key, f"{number} outside [{lower}, {upper}]")
        return number

    def _validate_relations(self):
        v = self._values
        if v["cge.in_dim"] != v["features.dim"]:
            raise ConfigError("cge.in_dim", "must equal features.dim")
        if v["cge.hidden"] % v["cge.heads"]:
            raise ConfigError("cge.hidden", "must be divisible by cge.heads")
        if v["cge.out_dim"] % v["cge.heads"]:
            raise ConfigError("cge.out_dim", "must be divisible by cge.heads")
        if v["bridge.d_model"] % v["bridge.heads"]:
            raise ConfigError("bridge.d_model", "must be divisible by bridge.heads")
        if v["decoder.d_llm"] % v["decoder.heads"]:
            raise ConfigError("decoder.d_llm", "must be divisible by decoder.heads")

    def __getitem__(self, key):
        if key not in self._values:
            raise ConfigError(key, "unknown key")
        return self._values[key]

    def get(self, key, default=None):
        return self._values.get(key, default)

    def section(self, prefix: str) -> dict:
        """Keys under `prefix.` with the prefix stripped"""
        cut = len(prefix) + 1
        return {key[cut:]: value for key, value in self._values.items() if key.startswith(prefix + ".")}

    def replace(self, changes: dict):
        values = dict(self._values)
        values.update(changes)
        return PipelineConfig(values, workdir=self.workdir)

    def resolve(self, path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.workdir / path

    def to_dict(self) -> dict:
        return dict(sorted(self._values.items()))

    @property
    def seed(self) -> int:
        return self._values["seed"]
