import numpy as np
import pytest

from pianoadapt.db.artifact_store import ArtifactStore
from pianoadapt.models.hand import script_presses
from pianoadapt.models.keyboard import Keyboard
from pianoadapt.schemas.env import EnvConfig
from pianoadapt.schemas.hand import HandConfig
from pianoadapt.schemas.score import Finger, Hand, NoteEvent, PianoRoll
from pianoadapt.songs import bundled_song


@pytest.fixture
def keyboard():
    return Keyboard()


@pytest.fixture
def hand_cfg():
    return HandConfig()


@pytest.fixture
def env_cfg():
    return EnvConfig()


@pytest.fixture
def three_keys():
    return bundled_song("three_keys")


@pytest.fixture
def twinkle():
    return bundled_song("twinkle")


@pytest.fixture
def scripted(three_keys, keyboard, hand_cfg):
    return script_presses(three_keys, keyboard, hand_cfg)


@pytest.fixture
def tiny_roll():
    """Two right-hand notes on adjacent white keys, middle then ring finger."""
    return PianoRoll(
        title="tiny",
        notes=[
            NoteEvent(key_index=51, onset_step=0, duration_steps=3, hand=Hand.RIGHT, finger=Finger.MIDDLE),
            NoteEvent(key_index=53, onset_step=4, duration_steps=3, hand=Hand.RIGHT, finger=Finger.RING),
        ],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def artifact_dir(tmp_path, monkeypatch):
    """Fresh artifact directory with no config file or environment overrides leaking in."""
    for variable in ("PIANOADAPT_CONFIG", "PIANOADAPT_ARTIFACT_DIR", "PIANOADAPT_SEED", "PIANOADAPT_THREADS", "PIANOADAPT_LOG_LEVEL"):
        monkeypatch.delenv(variable, raising=False)
    monkeypatch.chdir(tmp_path)
    ArtifactStore._instance = None
    yield tmp_path / "artifacts"
    ArtifactStore._instance = None
