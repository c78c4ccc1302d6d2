"""
Runtime settings read from the environment.

Values come from the process environment, populated from `.env` by
`load_dotenv()` in the entrypoint.
"""

import os
from dataclasses import dataclass


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {raw!r}")
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class Settings:
    """Solver caps, tolerances and defaults."""

    log_level: str = "INFO"
    state_cap: int = 2**24
    dense_cap: int = 4096
    power_tol: float = 1e-13
    power_max_iters: int = 10**7
    check_tol: float = 1e-10
    seed: int = 20240101

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from environment variables, falling back to defaults."""
        seed = _env_int("TASEP_SEED", cls.seed)
        if seed >= 2**64:
            raise ValueError(f"TASEP_SEED must fit in 64 bits, got {seed}")
        return cls(
            log_level=os.getenv("LOG_LEVEL", cls.log_level).upper(),
            state_cap=_env_int("TASEP_STATE_CAP", cls.state_cap),
            dense_cap=_env_int("TASEP_DENSE_CAP", cls.dense_cap),
            power_tol=_env_float("TASEP_POWER_TOL", cls.power_tol),
            power_max_iters=_env_int("TASEP_POWER_MAX_ITERS", cls.power_max_iters),
            check_tol=_env_float("TASEP_CHECK_TOL", cls.check_tol),
            seed=seed,
        )


DEFAULTS = Settings()
