import os
from pathlib import Path

import pytest

from pianoadapt.config import Settings, artifact_root, config_hash, load_settings
from pianoadapt.errors import ConfigError
from pianoadapt.main import _overrides, build_parser
from pianoadapt.models.env import PianoEnv
from pianoadapt.schemas.score import Hand

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "config" / "default.toml"


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    for variable in ("PIANOADAPT_CONFIG", "PIANOADAPT_ARTIFACT_DIR", "PIANOADAPT_SEED", "PIANOADAPT_THREADS", "PIANOADAPT_LOG_LEVEL"):
        monkeypatch.delenv(variable, raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_defaults(clean_env):
    settings = load_settings()
    assert settings.run.seed == 0
    assert settings.score.split_key == 44
    assert settings.td3.utd_ratio == 8
    assert artifact_root(settings) == Path("artifacts")


def test_shipped_file_matches_the_defaults(clean_env):
    assert config_hash(load_settings(str(DEFAULT_CONFIG))) == config_hash(Settings())


def test_file_then_environment_then_flags(clean_env, monkeypatch):
    path = clean_env / "run.toml"
    path.write_text("[run]\nseed = 3\nthreads = 2\n\n[refine]\niterations = 4\n")
    settings = load_settings(str(path))
    assert (settings.run.seed, settings.run.threads, settings.refine.iterations) == (3, 2, 4)

    monkeypatch.setenv("PIANOADAPT_SEED", "7")
    assert load_settings(str(path)).run.seed == 7
    assert load_settings(str(path), {"run": {"seed": 9}}).run.seed == 9
    assert load_settings(str(path), {"run": {"seed": None}}).run.seed == 7


def test_config_path_from_the_environment(clean_env, monkeypatch):
    path = clean_env / "env.toml"
    path.write_text("[eval]\nrollouts = 2\n")
    monkeypatch.setenv("PIANOADAPT_CONFIG", str(path))
    assert load_settings().eval.rollouts == 2


def test_dotenv_file_is_read(clean_env):
    (clean_env / ".env").write_text("PIANOADAPT_ARTIFACT_DIR=elsewhere\n")
    try:
        assert load_settings().run.artifact_dir == "elsewhere"
    finally:
        os.environ.pop("PIANOADAPT_ARTIFACT_DIR", None)


def test_unknown_keys_are_rejected(clean_env):
    path = clean_env / "bad.toml"
    path.write_text("[td3]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        load_settings(str(path))


def test_out_of_range_values_are_rejected(clean_env):
    with pytest.raises(ConfigError):
        load_settings(overrides={"refine": {"anneal_factor": 1.5}})


def test_unreadable_file(clean_env):
    with pytest.raises(ConfigError, match="cannot read"):
        load_settings(str(clean_env / "missing.toml"))
    broken = clean_env / "broken.toml"
    broken.write_text("[run\n")
    with pytest.raises(ConfigError):
        load_settings(str(broken))


def test_config_hash_tracks_every_value(clean_env):
    base = load_settings()
    assert config_hash(base) == config_hash(load_settings())
    assert config_hash(base) != config_hash(load_settings(overrides={"td3": {"gamma": 0.9}}))
    assert len(config_hash(base)) == 64


def test_sim_training_draws_gaps_by_default(clean_env, tiny_roll, keyboard, hand_cfg):
    settings = load_settings(str(DEFAULT_CONFIG))
    assert settings.ppo.domain_randomization
    env = PianoEnv(tiny_roll, Hand.RIGHT, keyboard, hand_cfg, settings.env, randomize=settings.ppo.domain_randomization)
    env.reset(seed=1)
    first = env.gap
    assert not first.is_identity
    env.reset(seed=2)
    assert env.gap != first


def test_train_sim_flag_toggles_randomization(clean_env):
    parser = build_parser()
    off = parser.parse_args(["train-sim", "twinkle", "--no-domain-randomization"])
    assert not load_settings(overrides=_overrides(off)).ppo.domain_randomization
    unset = parser.parse_args(["train-sim", "twinkle"])
    assert load_settings(overrides=_overrides(unset)).ppo.domain_randomization
