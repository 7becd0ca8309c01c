"""
Configuration management for dissipath.

This module handles the process-level configuration:
- Environment variables (optionally loaded from a .env file)
- Logging configuration
- CLI defaults (output directory, Monte-Carlo trials, batch jobs)

Numerical settings of a run (seed, dt, steps, trials) live in the scenario
file; nothing configured here changes numerical results.
"""

import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from constants import DEFAULT_TRIALS

# Get module logger
logger = logging.getLogger(__name__)

LOG_LEVELS = {
    "error": logging.ERROR,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class Config:
    """
    Process configuration class.

    Loads settings from environment variables with sensible defaults and
    sets up logging for the CLI.
    """

    # Load environment variables from .env file only once per process
    _env_loaded = False

    def __init__(self, env_file: Optional[Path] = None) -> None:
        """
        Initialize configuration.

        Args:
            env_file: Optional path to .env file. If not provided, looks for .env next to
                this module, then in the current directory.
        """
        if not Config._env_loaded:
            if env_file is None:
                env_file = Path(__file__).parent / ".env"

            if env_file.exists():
                load_dotenv(env_file)
                logger.debug("Loaded environment variables from %s", env_file)
            else:
                load_dotenv()

            Config._env_loaded = True

        # Logging settings
        self.LOG_LEVEL_NAME = os.environ.get("DISSIPATH_LOG", "info").strip().lower()
        self.LOG_TO_FILE = os.environ.get("DISSIPATH_LOG_TO_FILE", "False").lower() == "true"
        self.LOG_FILE_PATH = os.environ.get("DISSIPATH_LOG_FILE", "logs/dissipath.log")
        self.LOG_FORMAT = os.environ.get(
            "DISSIPATH_LOG_FORMAT",
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        )
        self.LOG_DATE_FORMAT = os.environ.get("DISSIPATH_LOG_DATE_FORMAT", "%Y-%m-%d %H:%M:%S")

        # CLI defaults
        self.OUTPUT_DIR = Path(os.environ.get("DISSIPATH_OUTPUT_DIR", "out"))
        self.TRIALS = self._get_int("DISSIPATH_TRIALS", DEFAULT_TRIALS)
        self.JOBS = max(1, self._get_int("DISSIPATH_JOBS", 1))

    @staticmethod
    def _get_int(name: str, default: int) -> int:
        """Read an integer environment variable, falling back to the default."""
        raw = os.environ.get(name)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            logger.warning("Ignoring %s=%r (not an integer), using %d", name, raw, default)
            return default

    @property
    def log_level(self) -> int:
        """Numeric logging level for DISSIPATH_LOG."""
        return LOG_LEVELS.get(self.LOG_LEVEL_NAME, logging.INFO)

    def setup_logging(self) -> None:
        """
        Configure logging.

        Sets up console logging and optional file logging with the configured format.
        Creates the log directory if it doesn't exist.
        """
        formatter = logging.Formatter(
            fmt=self.LOG_FORMAT,
            datefmt=self.LOG_DATE_FORMAT,
        )
        log_level = self.log_level

        root_logger = logging.getLogger()
        root_logger.setLevel(log_level)

        # Remove existing handlers to avoid duplicates
        root_logger.handlers.clear()

        console_handler = logging.StreamHandler()
        console_handler.setLevel(log_level)
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)

        if self.LOG_TO_FILE:
            log_file = Path(self.LOG_FILE_PATH)
            log_file.parent.mkdir(parents=True, exist_ok=True)

            file_handler = logging.FileHandler(log_file, encoding="utf-8")
            file_handler.setLevel(log_level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)

            logger.info("Logging to file: %s", log_file)

        if self.LOG_LEVEL_NAME not in LOG_LEVELS:
            logger.warning("Unknown DISSIPATH_LOG=%r, using info", self.LOG_LEVEL_NAME)

        logger.debug("Logging configured (level: %s)", logging.getLevelName(log_level))

    def __repr__(self) -> str:
        return (
            f"Config("
            f"LOG_LEVEL={self.LOG_LEVEL_NAME}, "
            f"OUTPUT_DIR={self.OUTPUT_DIR}, "
            f"TRIALS={self.TRIALS}, "
            f"JOBS={self.JOBS}"
            f")"
        )
