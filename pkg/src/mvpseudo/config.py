"""Run configuration: JSON schema, loading, overrides and digests."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .classifier import FUSION_MODES, HyperParams
from .engine import STRATEGIES, EngineConfig
from .errors import ValidationError
from .gaussian import DEFAULT_RIDGE

__all__ = ["RUN_CONFIG_SCHEMA", "ConfigError", "RunConfig", "load_run_config", "default_threshold"]


class ConfigError(ValidationError):
    pass


_PATH = {"type": "string", "minLength": 1}

RUN_CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mvpseudo run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["classes", "encoders", "paths"],
    "properties": {
        "classes": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 2, "uniqueItems": True},
        "encoders": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1, "uniqueItems": True},
        "audio_view": {"type": "string", "minLength": 1},
        "text_view": {"type": "string", "minLength": 1},
        "fusion": {"enum": list(FUSION_MODES)},
        "strategy": {"enum": list(STRATEGIES)},
        "label_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "hyperparams": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "weight_decay": {"type": "number", "minimum": 0},
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
            },
        },
        "max_iterations": {"type": "integer", "minimum": 1},
        "patience": {"type": "integer", "minimum": 1},
        "removal_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "ridge": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "required": ["embeddings", "labels", "predictions", "splits"],
            "properties": {
                "embeddings": {"type": "object", "additionalProperties": _PATH, "minProperties": 1},
                "labels": _PATH,
                "predictions": _PATH,
                "splits": _PATH,
            },
        },
    },
}


def default_threshold(n_classes: int) -> float:
    # 0.7 for binary tasks, 0.5 otherwise
    return 0.7 if n_classes == 2 else 0.5


@dataclass(frozen=True)
class RunConfig:
    raw: Mapping[str, Any]
    base_dir: Path

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self.raw["classes"])

    @property
    def encoders(self) -> tuple[str, ...]:
        return tuple(self.raw["encoders"])

    @property
    def audio_view(self) -> str:
        return self.raw.get("audio_view", self.encoders[0])

    @property
    def text_view(self) -> str:
        return self.raw.get("text_view", self.encoders[-1])

    @property
    def fusion(self) -> str:
        return self.raw.get("fusion", "early")

    @property
    def strategy(self) -> str:
        return self.raw.get("strategy", "proposed")

    @property
    def label_rate(self) -> float:
        return float(self.raw.get("label_rate", 1.0))

    @property
    def ridge(self) -> float:
        return float(self.raw.get("ridge", DEFAULT_RIDGE))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def path(self, key: str, encoder: str | None = None) -> Path:
        p = self.raw["paths"][key] if encoder is None else self.raw["paths"]["embeddings"][encoder]
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def engine_config(self) -> EngineConfig:
        hp = HyperParams(**self.raw.get("hyperparams", {}))
        return EngineConfig(
            classes=self.classes,
            hyperparams=hp,
            max_iterations=int(self.raw.get("max_iterations", 40)),
            patience=int(self.raw.get("patience", 2)),
            removal_fraction=float(self.raw.get("removal_fraction", 0.2)),
            threshold=float(self.raw.get("threshold", default_threshold(len(self.classes)))),
            seed=self.seed,
        )

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **overrides) -> "RunConfig":
        raw = copy.deepcopy(dict(self.raw))
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return validate_run_config(raw, self.base_dir)


def validate_run_config(raw: Mapping[str, Any], base_dir: Path | str = ".") -> RunConfig:
    try:
        jsonschema.validate(raw, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    encoders = raw["encoders"]
    emb_paths = raw["paths"]["embeddings"]
    views = [raw.get("audio_view", encoders[0]), raw.get("text_view", encoders[-1])]
    missing = [e for e in [*encoders, *views] if e not in emb_paths]
    if missing:
        raise ConfigError(f"no embedding file configured for {sorted(set(missing))}")
    return RunConfig(copy.deepcopy(dict(raw)), Path(base_dir))


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return validate_run_config(raw, path.parent)
