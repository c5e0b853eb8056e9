import argparse
from pathlib import Path

from pianoadapt.config import Settings
from pianoadapt.controllers.score_controller import ScoreController


def parse(args: argparse.Namespace, settings: Settings) -> int:
    """
    Parse a song into its stored piano roll
    """
    roll = ScoreController(settings).parse(args.song, args.midi, args.fingering)
    print(f"{args.song}: '{roll.title}', {len(roll.notes)} notes, {roll.num_steps} steps")
    return 0


def register(subparsers) -> None:
    command = subparsers.add_parser("parse", help="MIDI file and fingering sidecar, or a bundled song, to a piano roll")
    command.add_argument("song", help="Song name; a bundled song when --midi is not given")
    command.add_argument("--midi", type=Path, default=None, help="Standard MIDI File to parse")
    command.add_argument("--fingering", type=Path, default=None, help="Fingering sidecar for --midi")
    command.set_defaults(handler=parse)
