import copy
import os
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values, load_dotenv

from exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class Config:
    """Configuration management for the firn solver."""

    DEFAULT_CONFIG = {
        "logging": {
            "level": "INFO",
            "format": "%(levelname)s - %(message)s",
            "file": "firn.log",
        },
        "output": {
            "directory": "firn_reports",
        },
        "tables": {
            "workers": 1,
        },
    }

    def __init__(self):
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self._load_environment_variables()
        self.validate_config()

    def _load_environment_variables(self):
        """Load configuration overrides from the environment (and a .env file if present)."""
        load_dotenv()
        self.config["logging"]["level"] = os.getenv("FIRN_LOG_LEVEL", self.config["logging"]["level"])
        self.config["logging"]["file"] = os.getenv("FIRN_LOG_FILE", self.config["logging"]["file"])
        self.config["output"]["directory"] = os.getenv(
            "FIRN_OUTPUT_DIR", self.config["output"]["directory"]
        )
        workers = os.getenv("FIRN_WORKERS")
        if workers is not None:
            try:
                self.config["tables"]["workers"] = int(workers)
            except ValueError:
                raise ConfigurationError(f"FIRN_WORKERS must be an integer, got '{workers}'")

    def validate_config(self):
        """Validate the configuration."""
        level = str(self.config["logging"]["level"]).upper()
        if not isinstance(getattr(logging, level, None), int):
            raise ConfigurationError(f"Unknown log level '{self.config['logging']['level']}'")

        if self.config["tables"]["workers"] < 1:
            raise ConfigurationError("FIRN_WORKERS must be at least 1")

    def setup_logging(self):
        """Set up logging based on configuration."""
        log_level = getattr(logging, self.config["logging"]["level"].upper())
        log_format = self.config["logging"]["format"]
        log_file = self.config["logging"]["file"]

        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        logging.basicConfig(
            level=log_level,
            format=log_format,
            handlers=[
                logging.FileHandler(log_file, encoding="utf-8"),
                logging.StreamHandler(),
            ],
            force=True,
        )

        logger.info(f"Logging configured: level={log_level}, file={log_file}")


def normalize_key(key: str) -> str:
    """Map `--c1-mode`, `c1-mode` and `c1_mode` to the same settings key."""
    return key.strip().lstrip("-").replace("-", "_").lower()


def load_run_file(path: Optional[Path]) -> Dict[str, Any]:
    """Read a plain key=value run file; keys are the CLI flag names."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")

    settings = {}
    for key, value in dotenv_values(path).items():
        if value is None or value == "":
            logger.warning(f"Ignoring key without value in {path}: {key}")
            continue
        settings[normalize_key(key)] = value

    logger.info(f"Loaded {len(settings)} settings from {path}")
    return settings


def get_config() -> Config:
    """Get a configured Config instance."""
    return Config()
