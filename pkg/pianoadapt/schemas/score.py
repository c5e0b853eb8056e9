from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

NUM_KEYS = 88
MIDI_NOTE_OFFSET = 21  # MIDI note number of key index 0 (A0)
DEFAULT_SPLIT_KEY = 44


class Hand(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Finger(str, Enum):
    INDEX = "index"
    MIDDLE = "middle"
    RING = "ring"


# Physical order along the keyboard, leftmost first. Joint arrays use this slot order.
FINGER_ORDER: Dict[Hand, Tuple[Finger, Finger, Finger]] = {
    Hand.LEFT: (Finger.RING, Finger.MIDDLE, Finger.INDEX),
    Hand.RIGHT: (Finger.INDEX, Finger.MIDDLE, Finger.RING),
}


def finger_slot(hand: Hand, finger: Finger) -> int:
    return FINGER_ORDER[hand].index(finger)


def hand_for_key(key_index: int, split_key: int = DEFAULT_SPLIT_KEY) -> Hand:
    return Hand.LEFT if key_index < split_key else Hand.RIGHT


class NoteEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    key_index: int = Field(..., ge=0, le=NUM_KEYS - 1, description="Semitone index over an 88-key board")
    onset_step: int = Field(..., ge=0, description="First timestep the key should sound")
    duration_steps: int = Field(..., ge=1, description="Number of timesteps the key sounds")
    hand: Hand = Field(..., description="Hand playing the note")
    finger: Optional[Finger] = Field(None, description="Assigned finger, None until fingering is loaded")

    @property
    def end_step(self) -> int:
        return self.onset_step + self.duration_steps


class Goal(BaseModel):
    model_config = ConfigDict(frozen=True)

    key_index: int
    hand: Hand
    finger: Optional[Finger] = None


class PianoRoll(BaseModel):
    """Discrete-time goal key activations with hand/finger annotations."""

    model_config = ConfigDict(frozen=True)

    title: str = Field("untitled", description="Song title")
    timestep_hz: int = Field(10, description="Grid rate; fixed at 10 Hz")
    split_key: int = Field(DEFAULT_SPLIT_KEY, ge=1, le=NUM_KEYS - 1, description="Keys below belong to the left hand")
    notes: List[NoteEvent] = Field(default_factory=list, description="Notes in canonical (onset, key) order")

    @field_validator("timestep_hz")
    @classmethod
    def _fixed_rate(cls, value: int) -> int:
        if value != 10:
            raise ValueError("timestep_hz is fixed at 10")
        return value

    @field_validator("notes")
    @classmethod
    def _canonical_order(cls, notes: List[NoteEvent]) -> List[NoteEvent]:
        return sorted(notes, key=lambda n: (n.onset_step, n.key_index, n.duration_steps))

    @model_validator(mode="after")
    def _check_regions_and_overlaps(self) -> "PianoRoll":
        last_end: Dict[int, int] = {}
        for note in self.notes:
            if note.hand != hand_for_key(note.key_index, self.split_key):
                raise ValueError(
                    f"key {note.key_index} at step {note.onset_step} lies outside the {note.hand.value} hand region"
                )
            if last_end.get(note.key_index, -1) > note.onset_step:
                raise ValueError(f"overlapping notes on key {note.key_index} at step {note.onset_step}")
            last_end[note.key_index] = note.end_step
        return self

    @property
    def num_steps(self) -> int:
        return max((n.end_step for n in self.notes), default=0)

    @property
    def is_fingered(self) -> bool:
        return all(n.finger is not None for n in self.notes)

    def notes_for(self, hand: Hand) -> List[NoteEvent]:
        return [n for n in self.notes if n.hand == hand]

    def goals(self) -> List[FrozenSet[Goal]]:
        """Per-timestep goal sets."""
        table: List[set] = [set() for _ in range(self.num_steps)]
        for note in self.notes:
            for step in range(note.onset_step, note.end_step):
                table[step].add(Goal(key_index=note.key_index, hand=note.hand, finger=note.finger))
        return [frozenset(s) for s in table]

    def goal_keys(self, hand: Optional[Hand] = None) -> List[FrozenSet[int]]:
        """Per-timestep goal key sets, optionally restricted to one hand."""
        return [frozenset(g.key_index for g in step if hand is None or g.hand == hand) for step in self.goals()]

    def fingered_goals(self, hand: Hand) -> List[List[Tuple[Finger, int]]]:
        """Per-timestep (finger, key) targets for one hand, sorted by key."""
        table: List[List[Tuple[Finger, int]]] = [[] for _ in range(self.num_steps)]
        for note in self.notes_for(hand):
            if note.finger is None:
                continue
            for step in range(note.onset_step, note.end_step):
                table[step].append((note.finger, note.key_index))
        return [sorted(step, key=lambda fk: fk[1]) for step in table]
