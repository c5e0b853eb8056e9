"""
Exception hierarchy for the pipeline.
Every error carries the process exit code the CLI reports for it.
"""
from typing import Optional


class PianoAdaptError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 3


class UsageError(PianoAdaptError):
    exit_code = 1


class UnknownNameError(UsageError):
    """A song, gap preset or source name that does not exist."""


class MissingArtifactError(UsageError):
    """An upstream artifact has not been produced yet."""

    def __init__(self, artifact: str, command: str):
        self.artifact = artifact
        self.command = command
        super().__init__(f"missing artifact '{artifact}'; run `python -m pianoadapt {command}` first")


class ValidationFailure(PianoAdaptError):
    exit_code = 2


class MidiParseError(ValidationFailure):
    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        where = f" at byte offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class ScoreValidationError(ValidationFailure):
    """The decoded score violates a PianoRoll invariant."""


class FingeringError(ValidationFailure):
    pass


class UnreachableNoteError(ValidationFailure):
    pass


class ConfigError(ValidationFailure):
    pass


class ContractViolation(PianoAdaptError):
    """A caller broke an operation's precondition."""


class TrainingDivergedError(PianoAdaptError):
    def __init__(self, message: str, checkpoint: Optional[str] = None):
        self.checkpoint = checkpoint
        suffix = f" (checkpoint saved to {checkpoint})" if checkpoint else ""
        super().__init__(f"{message}{suffix}")
