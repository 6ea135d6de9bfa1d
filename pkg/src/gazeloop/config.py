"""Run configuration: YAML file plus environment-variable overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .session import ConfigError, SessionConfig

ENV_PREFIX = "GAZELOOP_"


@dataclass
class Endpoints:
    tools: Optional[str] = None  # base URL for search/read/ground/crop/upload
    model: Optional[str] = None
    judge: Optional[str] = None
    summarizer: Optional[str] = None


@dataclass
class RunConfig:
    endpoints: Endpoints = field(default_factory=Endpoints)
    image_search_limit: int = 3
    text_search_limit: int = 3
    max_rounds: int = 5
    max_crop_rounds: int = 5
    forced_answer: bool = False
    lambda_fmt: float = 0.1
    group_size: int = 5
    tool_parallelism: int = 4
    batch_parallelism: int = 4
    mock: bool = True
    seed: int = 0
    fault_rate: float = 0.0
    retry_attempts: int = 3
    retry_backoff: float = 0.05
    iou_threshold: float = 0.7
    filter_attempts: int = 4
    level_band: tuple = (0.25, 0.75)
    corpus_path: Optional[str] = None
    output_dir: str = "runs"

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            image_search_limit=self.image_search_limit,
            text_search_limit=self.text_search_limit,
            max_rounds=self.max_rounds,
            max_crop_rounds=self.max_crop_rounds,
            forced_answer=self.forced_answer,
        )

    def validate(self) -> None:
        self.session_config().validate()
        if not (0.0 <= self.lambda_fmt <= 1.0):
            raise ConfigError(f"lambda_fmt must be in [0, 1], got {self.lambda_fmt}")
        if self.group_size < 2:
            raise ConfigError("group_size must be >= 2")
        if not (0.0 <= self.fault_rate < 1.0):
            raise ConfigError("fault_rate must be in [0, 1)")
        if not self.mock and not self.endpoints.tools:
            raise ConfigError("live mode requires a tools endpoint")

    @classmethod
    def load(cls, path=None, env: Optional[dict] = None) -> "RunConfig":
        """Build from an optional YAML file, then apply env overrides."""
        data: dict = {}
        if path is not None:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"config file {path} must hold a mapping")
            data = loaded
        endpoints = Endpoints(**data.pop("endpoints", {}))
        known = {f.name for f in fields(cls)} - {"endpoints"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "level_band" in data:
            data["level_band"] = tuple(data["level_band"])
        config = cls(endpoints=endpoints, **data)
        config._apply_env(env if env is not None else os.environ)
        config.validate()
        return config

    def _apply_env(self, env: dict) -> None:
        for name in ("tools", "model", "judge", "summarizer"):
            value = env.get(f"{ENV_PREFIX}{name.upper()}_ENDPOINT")
            if value:
                setattr(self.endpoints, name, value)
        seed = env.get(f"{ENV_PREFIX}SEED")
        if seed:
            self.seed = int(seed)
