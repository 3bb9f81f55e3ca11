from .config import Config, ExperimentPaths
from .variables.base import BaseConfig
from .variables.default import DEFAULT_CONFIG as DefaultConfig

__all__ = ["Config", "ExperimentPaths", "BaseConfig", "DefaultConfig"]
