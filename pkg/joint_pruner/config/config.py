import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Type, Union, get_args, get_origin

from pydantic import ValidationError

from ..child.training import ChildConfig
from ..controller.params import ControllerConfig
from ..errors import ConfigError
from ..rl.reward import RewardConfig
from ..rl.search import SearchConfig
from ..utils.enum import EvaluatorKind, RatioMode, SearchMode
from .variables.base import BaseConfig
from .variables.default import DEFAULT_CONFIG

ENV_PREFIX = "PRUNER_"


class ExperimentPaths(NamedTuple):
    spec_path: Path | None
    dataset_path: Path | None
    output_dir: Path


class Config:
    """Experiment configuration: defaults, then a JSON file or preset, then PRUNER_* environment variables."""

    CONFIG_DIR = os.path.join(os.path.dirname(__file__), "variables")

    def __init__(self, config_path: str | None = None, overrides: Dict[str, Any] | None = None):
        self.config_path = config_path
        config_to_use = self.load_config(config_path)
        self._set_attributes(config_to_use)
        for key, value in (overrides or {}).items():
            if key not in BaseConfig.__annotations__:
                raise ConfigError(f"Unknown configuration key {key!r}")
            setattr(self, key.lower(), value)
        self._validate()

    def _set_attributes(self, config: Dict[str, Any]) -> None:
        for key, value in config.items():
            env_value = os.getenv(ENV_PREFIX + key)
            if env_value is not None:
                try:
                    value = self.convert_env_value(key, env_value, BaseConfig.__annotations__[key])
                except (ValueError, json.JSONDecodeError) as e:
                    raise ConfigError(f"{ENV_PREFIX}{key}: {e}") from e
            setattr(self, key.lower(), value)

    def _validate(self) -> None:
        try:
            self.controller = ControllerConfig(
                h_dim=self.h_dim,
                e_dim=self.e_dim,
                ratio_mode=RatioMode(self.ratio_mode),
                search_mode=SearchMode(self.search_mode),
                init_range=self.init_range,
            )
            self.reward = RewardConfig(lambda_=self.lambda_, flops_unit=self.flops_unit)
            self.search = SearchConfig(
                controller=self.controller,
                reward=self.reward,
                episodes=self.episodes,
                lr=self.controller_lr,
                baseline_decay=self.baseline_decay,
                checkpoint_every=self.checkpoint_every,
                seed=self.seed,
            )
            self.child = ChildConfig(
                epochs=self.child_epochs,
                batch_size=self.child_batch_size,
                lr=self.child_lr,
                fine_tune_lr=self.fine_tune_lr,
            )
            self.evaluator_kind = EvaluatorKind(self.evaluator)
        except (ValidationError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        if self.evaluator_kind == EvaluatorKind.External and not self.evaluator_command:
            raise ConfigError("EVALUATOR 'external' needs EVALUATOR_COMMAND")
        if self.log_level not in logging.getLevelNamesMapping():
            raise ConfigError(f"Unknown LOG_LEVEL {self.log_level!r}")
        if min(self.train_samples, self.test_samples) < 1 or self.image_size < 8:
            raise ConfigError("TRAIN_SAMPLES and TEST_SAMPLES must be >= 1 and IMAGE_SIZE >= 8")

    @property
    def paths(self) -> ExperimentPaths:
        return ExperimentPaths(
            Path(self.spec_path) if self.spec_path else None,
            Path(self.dataset_path) if self.dataset_path else None,
            Path(self.output_dir),
        )

    # "lambda" is a keyword, so the attribute set from LAMBDA is read through this alias
    @property
    def lambda_(self) -> float:
        return getattr(self, "lambda")

    @classmethod
    def resolve_path(cls, config_path: str) -> str:
        """A path on disk, or the name of a preset under CONFIG_DIR."""
        if os.path.exists(config_path):
            return config_path
        name = config_path if config_path.endswith(".json") else f"{config_path}.json"
        preset = os.path.join(cls.CONFIG_DIR, name)
        if os.path.exists(preset):
            return preset
        raise FileNotFoundError(
            f"Configuration not found at '{config_path}'. Presets: {', '.join(cls.list_available_configs())}"
        )

    @classmethod
    def load_config(cls, config_path: str | None) -> Dict[str, Any]:
        """Load a configuration by path or preset name, merged over the defaults."""
        if config_path is None or config_path == "default":
            return DEFAULT_CONFIG.copy()

        path = cls.resolve_path(config_path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                custom_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(custom_config, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        unknown = sorted(set(custom_config) - set(BaseConfig.__annotations__))
        if unknown:
            raise ConfigError(f"Unknown configuration keys in {path}: {', '.join(unknown)}")

        merged_config = DEFAULT_CONFIG.copy()
        merged_config.update(custom_config)
        return merged_config

    @classmethod
    def list_available_configs(cls) -> List[str]:
        """List all available configuration names."""
        configs = ["default"]
        for file in sorted(os.listdir(cls.CONFIG_DIR)):
            if file.endswith(".json"):
                configs.append(file[:-5])
        return configs

    def to_dict(self) -> Dict[str, Any]:
        """The effective configuration, keyed like BaseConfig."""
        return {key: getattr(self, key.lower()) for key in BaseConfig.__annotations__}

    @staticmethod
    def convert_env_value(key: str, env_value: str, type_hint: Type) -> Any:
        """Convert environment variable to the appropriate type based on the type hint."""
        origin = get_origin(type_hint)
        args = get_args(type_hint)

        if origin is Union:
            if type(None) in args and env_value.lower() in ("none", "null", ""):
                return None
            for arg in args:
                if arg is type(None):
                    continue
                try:
                    return Config.convert_env_value(key, env_value, arg)
                except ValueError:
                    continue
            raise ValueError(f"Cannot convert {env_value} to any of {args}")

        if type_hint is bool:
            return env_value.lower() in ("true", "1", "yes", "on")
        elif type_hint is int:
            return int(env_value)
        elif type_hint is float:
            return float(env_value)
        elif type_hint in (str, Any):
            return env_value
        elif origin is list or origin is List:
            return json.loads(env_value)
        else:
            raise ValueError(f"Unsupported type {type_hint} for key {key}")
