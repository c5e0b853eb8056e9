"""
Artifact store for the pipeline.
Every stage reads its inputs from and writes its outputs to one directory tree.
"""
import logging
import os
from pathlib import Path
from typing import Dict, Optional

from pianoadapt import __version__
from pianoadapt.config import Settings, config_hash
from pianoadapt.errors import MissingArtifactError

logger = logging.getLogger(__name__)

DEFAULT_ROOT = "artifacts"


class ArtifactStore:
    """Singleton artifact store for the process."""

    _instance = None

    def __new__(cls, root: Optional[str] = None):
        if cls._instance is None:
            cls._instance = super(ArtifactStore, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self, root: Optional[str] = None):
        """Point the store at root, else $PIANOADAPT_ARTIFACT_DIR, else ./artifacts."""
        if self._initialized and (root is None or Path(root) == self.root):
            return
        self.root = Path(root or os.getenv("PIANOADAPT_ARTIFACT_DIR", DEFAULT_ROOT))
        logger.info(f"Artifact store at {self.root}")
        self._initialized = True

    def song_dir(self, song: str) -> Path:
        return self.root / song

    def path(self, song: str, name: str, gap: Optional[str] = None) -> Path:
        """Location of an artifact; gap-specific artifacts live under the preset's directory."""
        directory = self.song_dir(song) if gap is None else self.song_dir(song) / gap
        return directory / name

    def require(self, path: Path, command: str) -> Path:
        """
        Raises:
            MissingArtifactError: If path does not exist, naming the command that produces it
        """
        if not path.exists():
            raise MissingArtifactError(str(path), command)
        return path

    def write_text(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        logger.info(f"Wrote {path}")
        return path

    def write_bytes(self, path: Path, data: bytes) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        logger.info(f"Wrote {path}")
        return path

    def read_text(self, path: Path, command: str) -> str:
        return self.require(path, command).read_text()

    def read_bytes(self, path: Path, command: str) -> bytes:
        return self.require(path, command).read_bytes()


def artifact_header(settings: Settings, command: str) -> Dict[str, str]:
    """Provenance recorded at the top of every artifact."""
    return {
        "config_hash": config_hash(settings),
        "seed": str(settings.run.seed),
        "command": command,
        "version": __version__,
    }


def format_header(header: Dict[str, str]) -> str:
    return "".join(f"# {key}: {value}\n" for key, value in header.items())


def read_header(text: str) -> Dict[str, str]:
    """Leading `# key: value` lines of a text artifact."""
    header: Dict[str, str] = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].strip().partition(": ")
        if sep:
            header[key] = value
    return header


def check_provenance(path: Path, text: str, settings: Settings) -> None:
    """Warn when a text artifact was produced under different settings."""
    recorded = read_header(text).get("config_hash")
    if recorded is not None and recorded != config_hash(settings):
        logger.warning(f"{path} was produced with config {recorded[:12]}, current config is {config_hash(settings)[:12]}")
