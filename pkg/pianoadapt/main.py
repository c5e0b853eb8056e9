import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import torch
from pydantic import ValidationError

from pianoadapt import __version__
from pianoadapt.cli import register_evaluation_commands, register_score_commands, register_training_commands
from pianoadapt.config import load_settings
from pianoadapt.db.artifact_store import ArtifactStore
from pianoadapt.errors import ConfigError, PianoAdaptError, UsageError, ValidationFailure

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


class CommandParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as exceptions instead of exiting."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CommandParser:
    parser = CommandParser(
        prog="pianoadapt",
        description="Sim-to-real piano playing: sim pretraining, lateral refinement and residual RL",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="TOML settings file (default $PIANOADAPT_CONFIG)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--artifact-dir", default=None)
    parser.add_argument("--threads", type=int, default=None, help="Torch threads; 1 keeps runs bit-reproducible")
    parser.add_argument("--log-level", default=None, choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    register_score_commands(subparsers)
    register_training_commands(subparsers)
    register_evaluation_commands(subparsers)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    overrides = {
        "run": {
            "seed": args.seed,
            "artifact_dir": args.artifact_dir,
            "threads": args.threads,
            "log_level": args.log_level,
        }
    }
    command_overrides = getattr(args, "overrides", None)
    if command_overrides is not None:
        overrides.update(command_overrides(args))
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and map failures to exit codes: 1 usage, 2 validation, 3 runtime.
    """
    try:
        args = build_parser().parse_args(argv)
        settings = load_settings(args.config, _overrides(args))
        level = logging.getLevelName(settings.run.log_level.upper())
        if not isinstance(level, int):
            raise ConfigError(f"unknown log level '{settings.run.log_level}'")
        logging.getLogger().setLevel(level)
        torch.set_num_threads(settings.run.threads)
        ArtifactStore(settings.run.artifact_dir)
        logger.info(f"Running {args.command}")
        return args.handler(args, settings)
    except PianoAdaptError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid data: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return ValidationFailure.exit_code
    except Exception as e:
        logger.exception(f"Command failed: {str(e)}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
