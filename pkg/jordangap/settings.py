import os
import logging
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger("jordangap.settings")


class Settings:
    """Process-wide defaults read from the environment (.env supported)."""

    _instance = None

    def __init__(self):
        self.log_level = os.getenv("JORDANGAP_LOG_LEVEL", "INFO").upper()
        self.out_dir = os.getenv("JORDANGAP_OUT_DIR", "out")
        self.workers = self._int("JORDANGAP_WORKERS", 4)
        self.tol_scale = self._float("JORDANGAP_TOL_SCALE", 1.0)
        self.seed = self._int("JORDANGAP_SEED", 0)

    @staticmethod
    def _int(name: str, default: int) -> int:
        raw = os.getenv(name)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            logger.warning(f"Ignoring {name}={raw!r}: not an integer, using {default}")
            return default

    @staticmethod
    def _float(name: str, default: float) -> float:
        raw = os.getenv(name)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            logger.warning(f"Ignoring {name}={raw!r}: not a number, using {default}")
            return default

    @property
    def numeric_log_level(self) -> int:
        return getattr(logging, self.log_level, logging.INFO)

    @classmethod
    def get_instance(cls) -> "Settings":
        if cls._instance is None:
            cls._instance = Settings()
        return cls._instance

    @classmethod
    def reset(cls, instance: Optional["Settings"] = None):
        """Drop the cached instance (tests re-read the environment)."""
        cls._instance = instance
