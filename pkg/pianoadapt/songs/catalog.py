"""
Bundled public-domain arrangements.
Each part is monophonic; fingers follow the white-key ordinal so that stepwise motion stays under one wrist position.
"""
from typing import Callable, Dict, List, Sequence, Tuple

from pianoadapt.errors import UnknownNameError
from pianoadapt.schemas.score import (
    FINGER_ORDER,
    MIDI_NOTE_OFFSET,
    NUM_KEYS,
    Hand,
    NoteEvent,
    PianoRoll,
    hand_for_key,
)

Part = Sequence[Tuple[str, int]]  # (note name, steps); "-" is a rest

_PITCH_CLASSES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_BLACK_PITCH_CLASSES = {1, 3, 6, 8, 10}


def key_index(name: str) -> int:
    """Key index of a note name such as C4, F#5 or Bb2; A0 is 0."""
    letter, rest = name[0].upper(), name[1:]
    shift = 0
    while rest and rest[0] in "#b":
        shift += 1 if rest[0] == "#" else -1
        rest = rest[1:]
    midi = 12 * (int(rest) + 1) + _PITCH_CLASSES[letter] + shift
    key = midi - MIDI_NOTE_OFFSET
    if not 0 <= key < NUM_KEYS:
        raise ValueError(f"{name} is off the 88-key board")
    return key


def white_ordinal(key: int) -> int:
    """Index of the key among white keys; black keys take their lower white neighbor's ordinal."""
    count = -1
    for k in range(key + 1):
        if (k + MIDI_NOTE_OFFSET) % 12 not in _BLACK_PITCH_CLASSES:
            count += 1
    return count


def default_finger(key: int, hand: Hand):
    return FINGER_ORDER[hand][white_ordinal(key) % 3]


def _notes(part: Part, hand: Hand, split_key: int) -> List[NoteEvent]:
    notes: List[NoteEvent] = []
    step = 0
    for name, steps in part:
        if name != "-":
            key = key_index(name)
            if hand_for_key(key, split_key) != hand:
                raise ValueError(f"{name} is outside the {hand.value} hand region")
            notes.append(
                NoteEvent(
                    key_index=key,
                    onset_step=step,
                    duration_steps=steps,
                    hand=hand,
                    finger=default_finger(key, hand),
                )
            )
        step += steps
    return notes


def _roll(title: str, right: Part, left: Part, split_key: int = 44) -> PianoRoll:
    notes = _notes(right, Hand.RIGHT, split_key) + _notes(left, Hand.LEFT, split_key)
    return PianoRoll(title=title, split_key=split_key, notes=notes)


def _each(names: str, steps: int) -> List[Tuple[str, int]]:
    return [(n, steps) for n in names.split()]


def twinkle() -> PianoRoll:
    line = _each("C5 C5 G5 G5 A5 A5", 5) + [("G5", 10)] + _each("F5 F5 E5 E5 D5 D5", 5) + [("C5", 10)]
    bass = _each("C3 C3 F3 C3 F3 C3 G3 C3", 10)
    return _roll("Twinkle Twinkle", line * 2, bass * 2)


def hot_cross_buns() -> PianoRoll:
    phrase = [("E5", 10), ("D5", 10), ("C5", 20)]
    melody = phrase + phrase + _each("C5 C5 C5 C5 D5 D5 D5 D5", 5) + phrase
    bass = _each("C3 G2 C3 G2 C3 G2 G2 C3", 20)
    return _roll("Hot Cross Buns", melody, bass)


def ode_to_joy() -> PianoRoll:
    a1 = _each("E5 E5 F5 G5 G5 F5 E5 D5 C5 C5 D5 E5 E5 D5", 5) + [("D5", 10)]
    a2 = _each("E5 E5 F5 G5 G5 F5 E5 D5 C5 C5 D5 E5 D5 C5", 5) + [("C5", 10)]
    b = _each("D5 D5 E5 C5 D5 F5 E5 C5 D5 F5 E5 D5 C5 D5", 5) + [("G4", 10)]
    final = a2[:-1] + [("C5", 20)]
    bass = _each("C3 G2 C3 G2 C3 G2 C3 C3 G2 C3 G2 G2 C3 G2 G2", 20) + [("C3", 30)]
    return _roll("Ode to Joy", a1 + a2 + b + final, bass)


def fur_elise() -> PianoRoll:
    trill = _each("E5 D#5 E5 D#5 E5 B4 D5 C5", 5)
    u1 = trill + [("A4", 15)] + _each("C5 E5 A4", 5) + [("B4", 10)]
    u2 = _each("E5 G#4 B4", 5) + [("C5", 15)] + trill + [("C5", 10)]
    u3 = [("A4", 15)] + _each("C5 E5 A4", 5) + [("B4", 15)] + _each("E5 C5 B4", 5) + [("A4", 20)]
    u4 = trill + [("A4", 40)]
    bass = _each("A2 E2 E2 A2 A2 E2 E2 A2", 40)
    return _roll("Fur Elise", u1 + u2 + u3 + u4, bass)


_PRELUDE_BARS = [
    ("G4 C5 E5", "C3"),
    ("A4 D5 F5", "C3"),
    ("G4 D5 F5", "B2"),
    ("G4 C5 E5", "C3"),
    ("A4 E5 A5", "C3"),
    ("F#4 A4 D5", "C3"),
    ("G4 D5 G5", "B2"),
    ("G4 C5 E5", "B2"),
    ("A4 C5 E5", "A2"),
    ("F#4 A4 C5", "D3"),
    ("G4 B4 D5", "G2"),
]


def prelude_in_c() -> PianoRoll:
    melody: List[Tuple[str, int]] = []
    bass: List[Tuple[str, int]] = []
    for voicing, root in _PRELUDE_BARS:
        melody += _each(voicing, 5) * 2
        bass.append((root, 30))
    return _roll("Prelude in C", melody, bass)


def three_keys() -> PianoRoll:
    """One finger walking over three adjacent white keys; a small task for smoke training."""
    melody = _each("C5 - D5 - E5 - D5 -", 5) * 2
    return PianoRoll(
        title="Three Keys",
        notes=[n.model_copy(update={"finger": FINGER_ORDER[Hand.RIGHT][1]}) for n in _notes(melody, Hand.RIGHT, 44)],
    )


SONGS: Dict[str, Callable[[], PianoRoll]] = {
    "twinkle": twinkle,
    "ode_to_joy": ode_to_joy,
    "hot_cross_buns": hot_cross_buns,
    "fur_elise": fur_elise,
    "prelude_in_c": prelude_in_c,
    "three_keys": three_keys,
}


def bundled_song(name: str) -> PianoRoll:
    """
    Build a bundled song by name.

    Raises:
        UnknownNameError: If no song has that name
    """
    if name not in SONGS:
        raise UnknownNameError(f"unknown song '{name}'; choose one of {', '.join(SONGS)}")
    return SONGS[name]()
