"""
Standard MIDI File and fingering sidecar codec for piano rolls.
Chunk framing is validated here so errors can name a byte offset; event decoding and encoding go through mido.
"""
import io
import logging
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import mido
from pydantic import ValidationError

from pianoadapt.errors import FingeringError, MidiParseError, ScoreValidationError
from pianoadapt.schemas.score import (
    DEFAULT_SPLIT_KEY,
    MIDI_NOTE_OFFSET,
    NUM_KEYS,
    Finger,
    Hand,
    NoteEvent,
    PianoRoll,
    hand_for_key,
)

logger = logging.getLogger(__name__)

DEFAULT_TEMPO = 500_000  # microseconds per beat
STEP_HZ = 10
EMIT_TICKS_PER_BEAT = 480
EMIT_TEMPO = 500_000
TICKS_PER_STEP = EMIT_TICKS_PER_BEAT * 1_000_000 // (EMIT_TEMPO * STEP_HZ)  # 96
EMIT_VELOCITY = 64

_FINGER_CODES = {
    "index": Finger.INDEX,
    "middle": Finger.MIDDLE,
    "ring": Finger.RING,
    "2": Finger.INDEX,
    "3": Finger.MIDDLE,
    "4": Finger.RING,
}
_INACTIVE_FINGERS = {"1", "5", "thumb", "pinky"}


def _scan_chunks(raw: bytes) -> Tuple[bytes, List[int]]:
    """Validate header and chunk framing; return the header chunk and the offsets of all track chunks."""
    if len(raw) < 8 or raw[0:4] != b"MThd":
        raise MidiParseError("missing MThd header chunk", 0)
    header_len = int.from_bytes(raw[4:8], "big")
    if header_len < 6:
        raise MidiParseError(f"header chunk length {header_len} is shorter than 6", 4)
    if 8 + header_len > len(raw):
        raise MidiParseError("truncated header chunk", 8)

    file_format = int.from_bytes(raw[8:10], "big")
    num_tracks = int.from_bytes(raw[10:12], "big")
    division = int.from_bytes(raw[12:14], "big")
    if file_format not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {file_format}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("ticks per beat is zero", 12)

    offset = 8 + header_len
    track_offsets: List[int] = []
    while offset < len(raw):
        if offset + 8 > len(raw):
            raise MidiParseError("truncated chunk header", offset)
        chunk_id = raw[offset:offset + 4]
        length = int.from_bytes(raw[offset + 4:offset + 8], "big")
        if not all(0x20 <= b < 0x7F for b in chunk_id):
            raise MidiParseError(f"malformed chunk id {chunk_id!r}", offset)
        if offset + 8 + length > len(raw):
            raise MidiParseError(f"chunk {chunk_id.decode('ascii')} runs past the end of the file", offset)
        if chunk_id == b"MTrk":
            track_offsets.append(offset)
        else:
            logger.warning(f"Skipping unknown chunk {chunk_id!r} at byte offset {offset}")
        offset += 8 + length

    if len(track_offsets) != num_tracks:
        raise MidiParseError(f"header declares {num_tracks} tracks but {len(track_offsets)} were found", 10)
    return raw[0:8 + header_len], track_offsets


def _decode_track(raw: bytes, header: bytes, offset: int) -> mido.MidiTrack:
    """Decode one track chunk through mido as a single-track file."""
    length = int.from_bytes(raw[offset + 4:offset + 8], "big")
    single = bytearray(header)
    single[8:10] = (0).to_bytes(2, "big")
    single[10:12] = (1).to_bytes(2, "big")
    single += raw[offset:offset + 8 + length]
    try:
        return mido.MidiFile(file=io.BytesIO(bytes(single))).tracks[0]
    except (OSError, EOFError, ValueError, KeyError, IndexError) as e:
        raise MidiParseError(f"malformed track chunk ({e})", offset) from e


def _seconds_converter(tempo_changes: List[Tuple[int, int]], ticks_per_beat: int):
    changes = sorted(tempo_changes)
    if not changes or changes[0][0] != 0:
        changes.insert(0, (0, DEFAULT_TEMPO))
    prev_tick, prev_tempo = changes[0]
    elapsed = Fraction(0)
    segments: List[Tuple[int, int, Fraction]] = [(prev_tick, prev_tempo, elapsed)]
    for tick, tempo in changes[1:]:
        elapsed += Fraction((tick - prev_tick) * prev_tempo, ticks_per_beat * 1_000_000)
        segments.append((tick, tempo, elapsed))
        prev_tick, prev_tempo = tick, tempo

    def convert(tick: int) -> Fraction:
        start_tick, tempo, start_seconds = segments[0]
        for seg in segments:
            if seg[0] <= tick:
                start_tick, tempo, start_seconds = seg
            else:
                break
        return start_seconds + Fraction((tick - start_tick) * tempo, ticks_per_beat * 1_000_000)

    return convert


def quantize(seconds: Fraction) -> int:
    """Nearest 10 Hz step; exact ties round down."""
    scaled = Fraction(seconds) * STEP_HZ
    step = scaled.numerator // scaled.denominator
    if scaled - step > Fraction(1, 2):
        step += 1
    return step


def parse_midi(raw: bytes, split_key: int = DEFAULT_SPLIT_KEY) -> PianoRoll:
    """
    Decode a type-0 or type-1 Standard MIDI File into an unfingered piano roll.

    Args:
        raw: File contents
        split_key: Keys below this index belong to the left hand

    Returns:
        Piano roll on the 10 Hz grid, hands inferred from the split point

    Raises:
        MidiParseError: On malformed framing or event data, with the byte offset of the chunk
        ScoreValidationError: On overlapping identical notes or keys off the 88-key board
    """
    header, track_offsets = _scan_chunks(raw)
    ticks_per_beat = int.from_bytes(raw[12:14], "big")

    title: Optional[str] = None
    tempo_changes: List[Tuple[int, int]] = []
    events: List[Tuple[int, int, int, int]] = []  # (tick, on/off order, track, note)
    for track_number, offset in enumerate(track_offsets):
        tick = 0
        for msg in _decode_track(raw, header, offset):
            tick += msg.time
            if msg.type == "set_tempo":
                tempo_changes.append((tick, msg.tempo))
            elif msg.type == "track_name" and title is None and msg.name:
                title = msg.name
            elif msg.type == "note_on" and msg.velocity > 0:
                events.append((tick, 1, track_number, msg.note))
            elif msg.type in ("note_off", "note_on"):
                events.append((tick, 0, track_number, msg.note))

    to_seconds = _seconds_converter(tempo_changes, ticks_per_beat)
    open_notes: Dict[int, int] = {}
    notes: List[NoteEvent] = []
    for tick, is_on, _, midi_note in sorted(events):
        key = midi_note - MIDI_NOTE_OFFSET
        step = quantize(to_seconds(tick))
        if not 0 <= key < NUM_KEYS:
            raise ScoreValidationError(f"MIDI note {midi_note} at step {step} is outside the 88-key board")
        if is_on:
            if key in open_notes:
                raise ScoreValidationError(f"overlapping notes on key {key} at step {step}")
            open_notes[key] = step
            continue
        if key not in open_notes:
            logger.warning(f"Ignoring note-off without note-on for key {key} at step {step}")
            continue
        onset = open_notes.pop(key)
        notes.append(
            NoteEvent(
                key_index=key,
                onset_step=onset,
                duration_steps=max(1, step - onset),
                hand=hand_for_key(key, split_key),
            )
        )
    if open_notes:
        key, onset = sorted(open_notes.items())[0]
        raise ScoreValidationError(f"note on key {key} at step {onset} is never released")

    try:
        return PianoRoll(title=title or "untitled", split_key=split_key, notes=notes)
    except ValidationError as e:
        raise ScoreValidationError(str(e)) from e


def _parse_finger(token: str, line_number: int) -> Finger:
    code = token.strip().lower()
    if code in _INACTIVE_FINGERS:
        raise FingeringError(
            f"line {line_number}: finger '{token}' is not playable; only index, middle and ring are active"
        )
    if code not in _FINGER_CODES:
        raise FingeringError(f"line {line_number}: unknown finger code '{token}'")
    return _FINGER_CODES[code]


def load_fingering(roll: PianoRoll, sidecar: str) -> PianoRoll:
    """
    Attach fingers to every note from a `step key finger [hand]` sidecar, one line per note onset.

    Raises:
        FingeringError: On unknown or inactive finger codes, wrong-hand or duplicate entries and unannotated notes
    """
    assignments: Dict[Tuple[int, int], Finger] = {}
    onsets = {(n.onset_step, n.key_index): n for n in roll.notes}
    for line_number, line in enumerate(sidecar.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        if len(tokens) not in (3, 4):
            raise FingeringError(f"line {line_number}: expected 'step key finger hand', got '{body}'")
        try:
            step, key = int(tokens[0]), int(tokens[1])
        except ValueError as e:
            raise FingeringError(f"line {line_number}: step and key must be integers") from e
        finger = _parse_finger(tokens[2], line_number)
        expected_hand = hand_for_key(key, roll.split_key)
        if len(tokens) == 4:
            try:
                hand = Hand(tokens[3].lower())
            except ValueError as e:
                raise FingeringError(f"line {line_number}: unknown hand '{tokens[3]}'") from e
            if hand != expected_hand:
                raise FingeringError(
                    f"line {line_number}: {hand.value} finger assigned to key {key} in the {expected_hand.value} hand region"
                )
        if (step, key) in assignments:
            raise FingeringError(f"line {line_number}: duplicate assignment for key {key} at step {step}")
        if (step, key) not in onsets:
            raise FingeringError(f"line {line_number}: no note starts on key {key} at step {step}")
        assignments[(step, key)] = finger

    fingered: List[NoteEvent] = []
    for note in roll.notes:
        finger = assignments.get((note.onset_step, note.key_index))
        if finger is None:
            raise FingeringError(f"unannotated note at step {note.onset_step} (key {note.key_index})")
        fingered.append(note.model_copy(update={"finger": finger}))
    return PianoRoll(title=roll.title, split_key=roll.split_key, notes=fingered)


def emit_roll(roll: PianoRoll, header: Optional[Dict[str, str]] = None) -> bytes:
    """
    Encode a roll as a type-1 file: tempo/title track plus one note track, 96 ticks per step.
    Header entries become text meta events, which parsing ignores.
    """
    midi = mido.MidiFile(type=1, ticks_per_beat=EMIT_TICKS_PER_BEAT)

    meta = mido.MidiTrack()
    meta.append(mido.MetaMessage("track_name", name=roll.title, time=0))
    meta.append(mido.MetaMessage("set_tempo", tempo=EMIT_TEMPO, time=0))
    for key, value in (header or {}).items():
        meta.append(mido.MetaMessage("text", text=f"{key}: {value}", time=0))
    meta.append(mido.MetaMessage("end_of_track", time=0))
    midi.tracks.append(meta)

    timeline: List[Tuple[int, int, int]] = []
    for note in roll.notes:
        midi_note = note.key_index + MIDI_NOTE_OFFSET
        timeline.append((note.onset_step * TICKS_PER_STEP, 1, midi_note))
        timeline.append((note.end_step * TICKS_PER_STEP, 0, midi_note))

    notes = mido.MidiTrack()
    last_tick = 0
    for tick, is_on, midi_note in sorted(timeline):
        kind = "note_on" if is_on else "note_off"
        velocity = EMIT_VELOCITY if is_on else 0
        notes.append(mido.Message(kind, note=midi_note, velocity=velocity, time=tick - last_tick))
        last_tick = tick
    notes.append(mido.MetaMessage("end_of_track", time=0))
    midi.tracks.append(notes)

    buffer = io.BytesIO()
    midi.save(file=buffer)
    return buffer.getvalue()


def emit_fingering(roll: PianoRoll) -> str:
    """Write the sidecar that load_fingering reads back."""
    lines = ["# step key finger hand"]
    for note in roll.notes:
        if note.finger is None:
            raise FingeringError(f"unannotated note at step {note.onset_step} (key {note.key_index})")
        lines.append(f"{note.onset_step} {note.key_index} {note.finger.value} {note.hand.value}")
    return "\n".join(lines) + "\n"
