import logging

import pytest

from pianoadapt.config import Settings
from pianoadapt.db.artifact_store import ArtifactStore, artifact_header, check_provenance, format_header, read_header
from pianoadapt.errors import MissingArtifactError


def test_store_is_a_singleton(artifact_dir):
    first = ArtifactStore(str(artifact_dir))
    assert ArtifactStore() is first
    assert first.root == artifact_dir


def test_store_repoints_to_a_new_root(artifact_dir, tmp_path):
    store = ArtifactStore(str(artifact_dir))
    ArtifactStore(str(tmp_path / "other"))
    assert store.root == tmp_path / "other"


def test_environment_root(artifact_dir, monkeypatch, tmp_path):
    monkeypatch.setenv("PIANOADAPT_ARTIFACT_DIR", str(tmp_path / "from-env"))
    assert ArtifactStore().root == tmp_path / "from-env"


def test_paths_and_round_trip(artifact_dir):
    store = ArtifactStore(str(artifact_dir))
    path = store.path("twinkle", "matrix.tsv", "identity")
    assert path == artifact_dir / "twinkle" / "identity" / "matrix.tsv"
    store.write_text(path, "x\n")
    assert store.read_text(path, "matrix twinkle") == "x\n"


def test_missing_artifact(artifact_dir):
    store = ArtifactStore(str(artifact_dir))
    with pytest.raises(MissingArtifactError) as info:
        store.read_bytes(store.path("twinkle", "roll.mid"), "parse twinkle")
    assert info.value.command == "parse twinkle"
    assert info.value.exit_code == 1


def test_header_round_trip():
    header = artifact_header(Settings(), "refine")
    text = format_header(header) + "body\n# not a header line\n"
    assert read_header(text) == header
    assert set(header) == {"config_hash", "seed", "command", "version"}


def test_provenance_mismatch_warns(caplog, tmp_path):
    original = Settings()
    text = format_header(artifact_header(original, "train-sim"))
    changed = Settings.model_validate({"run": {"seed": 5}})
    with caplog.at_level(logging.WARNING):
        check_provenance(tmp_path / "tau_sim.traj", text, original)
        assert not caplog.records
        check_provenance(tmp_path / "tau_sim.traj", text, changed)
    assert "was produced with config" in caplog.text
