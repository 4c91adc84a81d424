"""Process configuration and logging setup."""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Self

from anchor_scene.domain.errors import ConfigError


def _get_default_home() -> Path:
    """Default directory for checkpoints and corpora."""
    return Path.home() / ".cache" / "anchor-scene"


def _get_default_threads() -> int:
    return os.cpu_count() or 1


@dataclass
class AppConfig:
    """Environment-level configuration (everything else lives in the run config)."""

    threads: int = field(default_factory=_get_default_threads)
    log_level: str = "INFO"
    home: Path = field(default_factory=_get_default_home)

    @classmethod
    def from_env(cls) -> Self:
        """Load configuration from environment variables."""
        raw_threads = os.getenv("RD_THREADS")
        try:
            threads = int(raw_threads) if raw_threads else _get_default_threads()
        except ValueError as e:
            raise ConfigError(f"RD_THREADS must be an integer, got {raw_threads!r}") from e
        if threads < 1:
            raise ConfigError(f"RD_THREADS must be positive, got {threads}")
        return cls(
            threads=threads,
            log_level=os.getenv("RD_LOG_LEVEL", "INFO"),
            home=Path(os.getenv("RD_HOME", str(_get_default_home()))),
        )

    def apply_thread_limit(self) -> None:
        """Cap BLAS worker threads; only effective before numpy loads its backend."""
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(self.threads))


_config: AppConfig | None = None


def get_config() -> AppConfig:
    """Get application configuration."""
    global _config
    if _config is None:
        _config = AppConfig.from_env()
    return _config


def reset_config() -> None:
    global _config
    _config = None


def setup_logging(level: str = "INFO") -> None:
    """Setup application logging."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
