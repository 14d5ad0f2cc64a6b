# config.py
"""
Central config for ReproMC.
Read settings from environment. Use .env locally for convenience.
"""
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from errors import ConfigError

# optionally load .env in local dev
try:
    from dotenv import load_dotenv
    load_dotenv()  # no-op on environments without .env
except ImportError:
    pass

PROJECT_ROOT = Path(__file__).parent.resolve()

DEFAULT_SEED = 20231117
DEFAULT_BLOCK_SIZE = 2 ** 14
MAX_DEFAULT_WORKERS = 8
SEED_LIMIT = 2 ** 64


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, MAX_DEFAULT_WORKERS))


def _env_int(name: str, default: int, minimum: int = 0) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw.strip(), 10)
    except ValueError as exc:
        raise ConfigError(f"{name} must be a decimal integer, got {raw!r}") from exc
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def validate_seed(seed: int) -> int:
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {seed}")
    return int(seed)


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1
    output_dir: Path = PROJECT_ROOT / "output"
    records_path: Optional[Path] = None
    log_level: str = "INFO"
    log_file: Optional[Path] = None


def load_settings() -> Settings:
    """Read REPROMC_* variables at call time, so tests can monkeypatch the environment."""
    records = os.getenv("REPROMC_RECORDS_PATH")
    log_file = os.getenv("REPROMC_LOG_FILE")
    log_level = os.getenv("LOG_LEVEL", "INFO").upper()  # DEBUG, INFO, WARNING, ERROR
    if log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigError(f"LOG_LEVEL not recognised: {log_level}")
    return Settings(
        seed=validate_seed(_env_int("REPROMC_SEED", DEFAULT_SEED)),
        block_size=_env_int("REPROMC_BLOCK_SIZE", DEFAULT_BLOCK_SIZE, minimum=1),
        workers=_env_int("REPROMC_WORKERS", default_workers(), minimum=1),
        output_dir=Path(os.getenv("REPROMC_OUTPUT_DIR", str(PROJECT_ROOT / "output"))),
        records_path=Path(records) if records else None,
        log_level=log_level,
        log_file=Path(log_file) if log_file else None,
    )
