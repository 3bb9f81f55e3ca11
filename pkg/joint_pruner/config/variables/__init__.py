from .base import BaseConfig
from .default import DEFAULT_CONFIG

__all__ = ["BaseConfig", "DEFAULT_CONFIG"]
