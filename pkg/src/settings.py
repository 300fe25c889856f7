"""Settings: environment-driven configuration for SOMF."""

import logging
import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


class Settings:
    """
    Process-level settings read from the environment (or a .env file).

    Values:
    - SOMF_THREADS: cap on worker threads (parallel sweeps, code solves)
    - SOMF_LOG_LEVEL: log level used by the command-line entry point
    - SOMF_OUTPUT_DIR: output directory when a run config omits one
    """

    DEFAULT_LOG_LEVEL = "INFO"
    DEFAULT_OUTPUT_DIR = "results"

    def __init__(
        self,
        threads: Optional[int] = None,
        log_level: Optional[str] = None,
        output_dir: Optional[str] = None
    ):
        """
        Initialize settings, falling back to environment variables.

        Args:
            threads: Worker-thread cap (defaults to SOMF_THREADS or cpu count)
            log_level: Log level name (defaults to SOMF_LOG_LEVEL or INFO)
            output_dir: Output directory (defaults to SOMF_OUTPUT_DIR or results)
        """
        self.threads = threads if threads is not None else self._threads_from_env()
        self.log_level = (log_level or os.getenv("SOMF_LOG_LEVEL", self.DEFAULT_LOG_LEVEL)).upper()
        self.output_dir = output_dir or os.getenv("SOMF_OUTPUT_DIR", self.DEFAULT_OUTPUT_DIR)

    @staticmethod
    def _threads_from_env() -> int:
        raw = os.getenv("SOMF_THREADS")
        default = os.cpu_count() or 1
        if raw is None or raw.strip() == "":
            return default
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"Ignoring invalid SOMF_THREADS={raw!r}, using {default}")
            return default
        if value < 1:
            logger.warning(f"SOMF_THREADS must be >= 1 (got {value}), using 1")
            return 1
        return value


def get_settings() -> Settings:
    """Build settings from the current environment."""
    return Settings()
