"""
Settings for the pipeline.
Defaults live in the section models; a TOML file, environment variables and CLI flags override them in that order.
"""
import hashlib
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from pianoadapt.errors import ConfigError
from pianoadapt.schemas.env import EnvConfig
from pianoadapt.schemas.hand import HandConfig
from pianoadapt.schemas.keyboard import KeyboardGeometry
from pianoadapt.schemas.learn import PPOConfig, TD3Config
from pianoadapt.schemas.refine import RefineConfig
from pianoadapt.schemas.score import DEFAULT_SPLIT_KEY

logger = logging.getLogger(__name__)


class ScoreConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    split_key: int = Field(DEFAULT_SPLIT_KEY, ge=1, le=87, description="Keys below belong to the left hand")


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rollouts: int = Field(5, ge=1, description="Seeded rollouts per evaluation")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, description="Master seed")
    threads: int = Field(1, ge=1, description="Torch intra-op threads; 1 keeps runs bit-reproducible")
    artifact_dir: str = Field("artifacts", description="Root directory of produced artifacts")
    log_level: str = Field("INFO")


class Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    score: ScoreConfig = Field(default_factory=ScoreConfig)
    keyboard: KeyboardGeometry = Field(default_factory=KeyboardGeometry)
    hand: HandConfig = Field(default_factory=HandConfig)
    env: EnvConfig = Field(default_factory=EnvConfig)
    refine: RefineConfig = Field(default_factory=RefineConfig)
    ppo: PPOConfig = Field(default_factory=PPOConfig)
    td3: TD3Config = Field(default_factory=TD3Config)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    run: RunConfig = Field(default_factory=RunConfig)


_ENV_OVERRIDES = {
    "PIANOADAPT_ARTIFACT_DIR": ("run", "artifact_dir"),
    "PIANOADAPT_SEED": ("run", "seed"),
    "PIANOADAPT_THREADS": ("run", "threads"),
    "PIANOADAPT_LOG_LEVEL": ("run", "log_level"),
}


def _merge(base: Dict[str, Any], section: str, key: str, value: Any) -> None:
    base.setdefault(section, {})[key] = value


def load_settings(
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
) -> Settings:
    """
    Resolve the settings for one command.

    Args:
        config_path: TOML file; falls back to $PIANOADAPT_CONFIG when None
        overrides: Section -> key -> value pairs taken from CLI flags

    Returns:
        Validated settings

    Raises:
        ConfigError: If the file is unreadable or a value fails validation
    """
    load_dotenv(find_dotenv(usecwd=True))
    raw: Dict[str, Any] = {}

    path = config_path or os.getenv("PIANOADAPT_CONFIG")
    if path:
        try:
            with open(path, "rb") as handle:
                raw = tomllib.load(handle)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        logger.debug(f"Loaded config file {path}")

    for variable, (section, key) in _ENV_OVERRIDES.items():
        value = os.getenv(variable)
        if value is not None:
            _merge(raw, section, key, value)

    for section, values in (overrides or {}).items():
        for key, value in values.items():
            if value is not None:
                _merge(raw, section, key, value)

    try:
        return Settings.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def config_hash(settings: Settings) -> str:
    """SHA-256 of the canonical JSON form of the settings."""
    return hashlib.sha256(settings.model_dump_json().encode("utf-8")).hexdigest()


def artifact_root(settings: Settings) -> Path:
    return Path(settings.run.artifact_dir)
