"""
Experiment files: flat UTF-8 text, one `key = value` per line, `#` starts a comment.

    environment = lqr_left
    algorithm   = legendre_lsvi, monomial_lsvi
    degree      = 3, 4
    episodes    = 500
    seeds       = 0, 1, 2, 3, 4

Values are validated by the ExperimentConfig model; unknown keys are rejected.
"""
import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import (
    ACTION_GRID_SIZE,
    BONUS_SCALE,
    DELTA,
    ELEANOR_BASE,
    ELEANOR_BUDGET,
    ELEANOR_SLACK,
    REWARD_NOISE_STD,
    RIDGE,
    TRANSITION_NOISE_STD,
)
from errors import ConfigError

logger = logging.getLogger(__name__)

EnvironmentName = Literal["lqr_left", "lqr_right", "synthetic_smooth", "tabular"]
AlgorithmName = Literal["legendre_lsvi", "monomial_lsvi", "legendre_eleanor", "onehot_lsvi"]

# state-action dimension of each shipped environment (tabular points are index pairs)
ENVIRONMENT_DIMENSIONS = {"lqr_left": 3, "lqr_right": 3, "synthetic_smooth": 2, "tabular": 2}


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    environment: EnvironmentName
    algorithm: List[AlgorithmName]
    degree: Union[Literal["auto"], List[int]] = [3]
    smoothness: int = Field(1, ge=0)
    episodes: int = Field(..., ge=1)
    seeds: List[int]
    master_seed: int = 0
    horizon: Optional[int] = Field(None, ge=1)
    bonus_scale: float = Field(BONUS_SCALE, ge=0)
    ridge: float = Field(RIDGE, gt=0)
    delta: float = Field(DELTA, gt=0, lt=1)
    action_grid: int = Field(ACTION_GRID_SIZE, ge=1)
    transition_noise: float = Field(TRANSITION_NOISE_STD, ge=0)
    reward_noise: float = Field(REWARD_NOISE_STD, ge=0)
    eleanor_budget: int = Field(ELEANOR_BUDGET, ge=0)
    eleanor_base: float = Field(ELEANOR_BASE, gt=1)
    eleanor_slack: float = Field(ELEANOR_SLACK, ge=0)
    smoothing_window: int = Field(1, ge=1)
    output_dir: str = "results"
    plot: bool = False
    oracle: bool = False

    @field_validator("algorithm", "seeds", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    @field_validator("degree", mode="before")
    @classmethod
    def split_degree(cls, value):
        if isinstance(value, str) and value.strip() == "auto":
            return "auto"
        return _split_list(value)

    @field_validator("algorithm")
    @classmethod
    def distinct_algorithms(cls, value):
        if not value or len(set(value)) != len(value):
            raise ValueError("algorithm must be a non-empty list without repeats")
        return value

    @field_validator("seeds")
    @classmethod
    def distinct_seeds(cls, value):
        if not value:
            raise ValueError("seeds must not be empty")
        if len(set(value)) != len(value):
            raise ValueError(f"seeds must be distinct, got {value}")
        return value

    @field_validator("degree")
    @classmethod
    def positive_degrees(cls, value):
        if value == "auto":
            return value
        if not value or any(N < 1 for N in value) or len(set(value)) != len(value):
            raise ValueError(f"degree must be 'auto' or distinct integers >= 1, got {value}")
        return value

    @model_validator(mode="after")
    def tabular_pairing(self):
        tabular_algorithms = [a for a in self.algorithm if a == "onehot_lsvi"]
        if self.environment == "tabular" and len(tabular_algorithms) != len(self.algorithm):
            raise ValueError("the tabular environment only supports onehot_lsvi")
        if self.environment != "tabular" and tabular_algorithms:
            raise ValueError("onehot_lsvi needs the tabular environment")
        return self

    def resolved_degrees(self) -> List[int]:
        """Explicit degrees, or the single degree chosen from (K, d, nu)"""
        if self.degree != "auto":
            return list(self.degree)
        from lsvi_ucb import choose_degree
        return [choose_degree(self.episodes, ENVIRONMENT_DIMENSIONS[self.environment], self.smoothness)]

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the validated config"""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


def parse_config_text(text: str) -> Dict[str, str]:
    """
    Split experiment-file text into raw key/value strings

    Args:
        text: File contents

    Returns:
        Mapping of keys to unparsed values
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"Line {lineno}: missing key")
        if key in values:
            raise ConfigError(f"Line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(values: Dict[str, object]) -> ExperimentConfig:
    """Validate raw values, turning pydantic errors into ConfigError"""
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid experiment config: {problems}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate an experiment file

    Args:
        path: Location of the key = value file

    Returns:
        Validated ExperimentConfig
    """
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except UnicodeDecodeError as e:
        raise ConfigError(f"Config file is not valid UTF-8: {path}") from e
    config = build_config(parse_config_text(text))
    logger.info(f"Loaded config {path} (sha256 {config.config_hash()[:12]})")
    return config
