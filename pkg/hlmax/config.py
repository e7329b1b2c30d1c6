"""
hlmax Configuration
Centralized numerical and runtime settings
"""
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import psutil

from hlmax.errors import ConfigurationError


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Numerical-control parameters shared by every operator

    Tolerances drive the deterministic quadrature, sample counts and the
    master seed drive the Monte Carlo paths. Instances are immutable; use
    ``with_changes`` to derive variants.
    """
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_depth: int = 40
    mc_samples: int = 100_000
    master_seed: int = 42
    tail_tol: float = 1e-10
    field_samples: int = 1024
    radial_panels: int = 8
    region_panels: int = 4
    region_angles: int = 8
    threads: int = 1

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ConfigurationError("; ".join(errors))

    def validate(self) -> List[str]:
        """
        Check every invariant

        Returns:
            List of error messages (empty when valid)
        """
        errors = []

        for name in ("rel_tol", "abs_tol", "tail_tol"):
            value = getattr(self, name)
            if not value > 0:
                errors.append(f"{name} must be > 0, got {value}")

        if self.mc_samples < 1000:
            errors.append(f"mc_samples must be >= 1000, got {self.mc_samples}")
        if self.max_depth < 10:
            errors.append(f"max_depth must be >= 10, got {self.max_depth}")
        if not 0 <= self.master_seed < 2**64:
            errors.append(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.field_samples < 64:
            errors.append(f"field_samples must be >= 64, got {self.field_samples}")
        if self.radial_panels < 2 or self.region_panels < 1 or self.region_angles < 1:
            errors.append("panel and angle counts must be positive (radial_panels >= 2)")
        if self.threads < 1:
            errors.append(f"threads must be >= 1, got {self.threads}")

        return errors

    def with_changes(self, **changes: Any) -> "QuadratureConfig":
        """Return a copy with the given fields replaced"""
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        """
        Stable digest of the numeric settings

        ``threads`` is excluded: results never depend on the worker count.
        """
        payload = {k: v for k, v in dataclasses.asdict(self).items() if k != "threads"}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _default_threads() -> int:
    cores = psutil.cpu_count(logical=False) or os.cpu_count() or 1
    return max(1, int(cores))


class Config:
    """Application configuration"""

    def __init__(self):
        # Parallelism
        threads_env = os.getenv("HLMAX_THREADS")
        self.THREADS = int(threads_env) if threads_env else _default_threads()

        # Numerical defaults
        self.SEED = int(os.getenv("HLMAX_SEED", "42"))
        self.MC_SAMPLES = int(os.getenv("HLMAX_MC_SAMPLES", "100000"))
        self.FIELD_SAMPLES = int(os.getenv("HLMAX_FIELD_SAMPLES", "1024"))

        # Logging
        self.LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
        log_file = os.getenv("HLMAX_LOG_FILE")
        self.LOG_FILE: Optional[Path] = Path(log_file) if log_file else None

    def quadrature(self, **overrides: Any) -> QuadratureConfig:
        """
        Build the numerical configuration

        Args:
            **overrides: Field values taking precedence over the environment

        Returns:
            Validated QuadratureConfig
        """
        values: Dict[str, Any] = {
            "mc_samples": self.MC_SAMPLES,
            "master_seed": self.SEED,
            "field_samples": self.FIELD_SAMPLES,
            "threads": self.THREADS,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return QuadratureConfig(**values)

    def validate(self) -> List[str]:
        """Validate configuration, returning every problem found"""
        errors = []

        if self.THREADS < 1:
            errors.append(f"HLMAX_THREADS must be >= 1, got {self.THREADS}")
        if self.MC_SAMPLES < 1000:
            errors.append(f"HLMAX_MC_SAMPLES must be >= 1000, got {self.MC_SAMPLES}")
        if self.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"Invalid LOG_LEVEL: {self.LOG_LEVEL}")

        return errors

    def __repr__(self) -> str:
        return (
            f"HlmaxConfig(\n"
            f"  Threads: {self.THREADS}\n"
            f"  Seed: {self.SEED}\n"
            f"  MC samples: {self.MC_SAMPLES} (fields: {self.FIELD_SAMPLES})\n"
            f"  Log level: {self.LOG_LEVEL}\n"
            f")"
        )


def load_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a structured run configuration

    Key names mirror CLI flag names; dashes are normalized to underscores.

    Args:
        path: JSON file path

    Returns:
        Dictionary of settings
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must contain a JSON object")

    return {str(k).replace("-", "_"): v for k, v in data.items()}


# Singleton instance
_config_instance: Optional[Config] = None


def get_config() -> Config:
    """Get singleton config instance"""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance
