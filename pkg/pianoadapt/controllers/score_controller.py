import logging
from pathlib import Path
from typing import Optional

from pianoadapt.controllers.base import FINGERING_FILE, ROLL_FILE, StageController
from pianoadapt.db.artifact_store import format_header
from pianoadapt.errors import UsageError
from pianoadapt.models.score import emit_fingering, emit_roll, load_fingering, parse_midi
from pianoadapt.schemas.score import PianoRoll
from pianoadapt.songs import bundled_song

logger = logging.getLogger(__name__)


class ScoreController(StageController):
    """
    Controller for turning a song into the fingered piano roll every later stage reads
    """

    command = "parse"

    def parse(self, song: str, midi: Optional[Path] = None, fingering: Optional[Path] = None) -> PianoRoll:
        """
        Parse a MIDI file and its fingering sidecar, or load a bundled song, and store both

        Args:
            song: Artifact name; also the bundled song name when no MIDI file is given
            midi: Standard MIDI File to parse
            fingering: Sidecar with one `step key finger [hand]` line per note onset

        Returns:
            The fingered piano roll

        Raises:
            UsageError: If a MIDI file is given without a fingering sidecar or a file is unreadable
            UnknownNameError: If no MIDI file is given and the song is not bundled
        """
        split_key = self.settings.score.split_key
        if midi is None:
            roll = bundled_song(song)
            if roll.split_key != split_key:
                logger.warning(f"Bundled song '{song}' keeps its own split key {roll.split_key}")
        else:
            if fingering is None:
                raise UsageError("a MIDI file needs a fingering sidecar (--fingering)")
            try:
                raw = midi.read_bytes()
                sidecar = fingering.read_text()
            except OSError as e:
                raise UsageError(f"cannot read input: {e}") from e
            roll = load_fingering(parse_midi(raw, split_key), sidecar)

        header = self.header(song=song, split_key=str(roll.split_key))
        self.store.write_bytes(self.store.path(song, ROLL_FILE), emit_roll(roll, header))
        self.store.write_text(self.store.path(song, FINGERING_FILE), format_header(header) + emit_fingering(roll))
        logger.info(f"Parsed '{roll.title}': {len(roll.notes)} notes over {roll.num_steps} steps")
        return roll
