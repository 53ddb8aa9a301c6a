"""
Application configuration settings
"""

import os
from typing import Any, Dict, Optional
from pathlib import Path


class AppSettings:
    """Application settings and configuration"""

    # Workspace
    DEFAULT_WORKSPACE = "workspace"
    DEFAULT_ENCODING = "utf-8"
    SUPPORTED_FILE_EXTENSIONS = {
        ".csv": "TABULAR",
        ".las": "POINT_CLOUD",
        ".geojson": "VECTOR",
        ".json": "VECTOR",
    }

    # Identifiers
    SHORT_ID_LENGTH = 12
    MIN_ID_PREFIX = 12

    # Toolkit
    DEFAULT_CELL_SIZE = 1.0  # meters
    FK_THRESHOLD = 0.5  # Jaccard overlap

    # Planner / LLM backend
    MAX_STEPS = 16
    LLM_TEMPERATURE = 0
    LLM_RETRIES = 2  # retries after the first attempt
    LLM_TIMEOUT = 60  # seconds
    LLM_API_KEY_ENV = "PARKLENS_API_KEY"

    # Evaluation
    EVAL_WORKERS = 1
    DEFAULT_BACKEND = "scripted:data/plans"

    LOG_LEVEL = "INFO"
    LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # env var -> (attribute, converter)
    ENV_OVERRIDES = {
        "PARKLENS_WORKSPACE": ("DEFAULT_WORKSPACE", str),
        "PARKLENS_CELL_SIZE": ("DEFAULT_CELL_SIZE", float),
        "PARKLENS_MAX_STEPS": ("MAX_STEPS", int),
        "PARKLENS_BACKEND": ("DEFAULT_BACKEND", str),
        "PARKLENS_LOG_LEVEL": ("LOG_LEVEL", str),
    }

    @classmethod
    def from_env(cls, environ: Optional[Dict[str, str]] = None) -> "AppSettings":
        """Build a settings instance with environment overrides applied"""
        environ = os.environ if environ is None else environ
        settings = cls()
        for env_name, (attribute, convert) in cls.ENV_OVERRIDES.items():
            raw = environ.get(env_name)
            if raw is None or raw == "":
                continue
            try:
                setattr(settings, attribute, convert(raw))
            except ValueError:
                raise ValueError(f"{env_name}={raw!r} is not a valid {convert.__name__}")
        return settings

    def override(self, **values: Any) -> "AppSettings":
        """Return a copy with the given non-None attributes replaced"""
        clone = type(self)()
        clone.__dict__.update(self.__dict__)
        for key, value in values.items():
            if value is None:
                continue
            if not hasattr(type(self), key):
                raise AttributeError(f"unknown setting {key}")
            setattr(clone, key, value)
        return clone

    def modality_for_path(self, path: Path) -> Optional[str]:
        """Guess a modality from a file extension"""
        return self.SUPPORTED_FILE_EXTENSIONS.get(Path(path).suffix.lower())


# Global settings instance
app_settings = AppSettings.from_env()
