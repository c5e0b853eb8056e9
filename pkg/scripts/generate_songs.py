"""
Script to write the bundled songs as Standard MIDI Files with fingering sidecars.
The output can be fed back through `python -m pianoadapt parse NAME --midi ... --fingering ...`.
"""
import logging
import os
import sys
from pathlib import Path

from pianoadapt.models.score import emit_fingering, emit_roll
from pianoadapt.songs import SONGS

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

OUTPUT_DIR = os.getenv("PIANOADAPT_SONG_DIR", "songs")


def generate_songs(output_dir: Path) -> None:
    """Write NAME.mid and NAME.fingering.txt for every bundled song."""
    output_dir.mkdir(parents=True, exist_ok=True)
    for name, build in SONGS.items():
        roll = build()
        (output_dir / f"{name}.mid").write_bytes(emit_roll(roll))
        (output_dir / f"{name}.fingering.txt").write_text(emit_fingering(roll))
        logger.info(f"Wrote {name}: {len(roll.notes)} notes, {roll.num_steps} steps")
    logger.info(f"Generated {len(SONGS)} songs in {output_dir}")


def main():
    """Main function to generate the song files."""
    output_dir = Path(sys.argv[1] if len(sys.argv) > 1 else OUTPUT_DIR)
    try:
        generate_songs(output_dir)
    except Exception as e:
        logger.error(f"Error generating songs: {str(e)}")
        sys.exit(1)


if __name__ == "__main__":
    main()
