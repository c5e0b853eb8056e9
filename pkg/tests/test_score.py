from fractions import Fraction

import pytest

from pianoadapt.errors import FingeringError, MidiParseError, ScoreValidationError, UnknownNameError
from pianoadapt.models.score import emit_fingering, emit_roll, load_fingering, parse_midi, quantize
from pianoadapt.schemas.score import Finger, Hand, NoteEvent, PianoRoll
from pianoadapt.songs import SONGS, bundled_song, key_index

# One format-1 track: middle C on at tick 0, off at tick 384 (0.4 s at the default tempo).
MIDDLE_C = bytes.fromhex(
    "4d546864" "00000006" "0001" "0001" "01e0"
    "4d54726b" "0000000d" "00903c40" "8300803c00" "00ff2f00"
)


def _track(events_hex: str) -> bytes:
    body = bytes.fromhex(events_hex)
    return b"MTrk" + len(body).to_bytes(4, "big") + body


def _file(*tracks: bytes, fmt: int = 1) -> bytes:
    header = b"MThd" + (6).to_bytes(4, "big") + fmt.to_bytes(2, "big") + len(tracks).to_bytes(2, "big") + (480).to_bytes(2, "big")
    return header + b"".join(tracks)


def test_parse_hand_encoded_middle_c():
    roll = parse_midi(MIDDLE_C)
    assert roll.num_steps == 4
    assert [n.key_index for n in roll.notes] == [39]
    assert roll.notes[0].hand == Hand.LEFT
    assert roll.goal_keys() == [frozenset({39})] * 4


def test_octave_pair_goes_to_both_hands():
    raw = _file(_track("00903c40" "00904840" "8300803c00" "00804800" "00ff2f00"))
    roll = parse_midi(raw)
    hands = {n.key_index: n.hand for n in roll.notes}
    assert hands == {39: Hand.LEFT, 51: Hand.RIGHT}
    assert roll.goal_keys()[0] == frozenset({39, 51})


def test_note_on_velocity_zero_releases():
    raw = _file(_track("00903c40" "8300903c00" "00ff2f00"))
    assert parse_midi(raw).notes[0].duration_steps == 4


def test_short_note_is_stretched_to_one_step():
    raw = _file(_track("00903c40" "0a803c00" "00ff2f00"))
    assert parse_midi(raw).notes[0].duration_steps == 1


def test_quantize_rounds_ties_down():
    assert quantize(Fraction(5, 100)) == 0
    assert quantize(Fraction(6, 100)) == 1
    assert quantize(Fraction(15, 100)) == 1
    assert quantize(Fraction(149, 1000)) == 1


def test_tempo_change_is_honored():
    # 250000 us per beat halves every duration.
    raw = _file(_track("00ff510303d090" "00903c40" "8300803c00" "00ff2f00"))
    assert parse_midi(raw).notes[0].duration_steps == 2


def test_missing_header_reports_offset_zero():
    with pytest.raises(MidiParseError) as info:
        parse_midi(b"RIFF" + MIDDLE_C[4:])
    assert info.value.offset == 0


def test_truncated_track_reports_chunk_offset():
    with pytest.raises(MidiParseError) as info:
        parse_midi(MIDDLE_C[:-3])
    assert info.value.offset == 14


def test_track_count_mismatch():
    raw = bytearray(MIDDLE_C)
    raw[10:12] = (2).to_bytes(2, "big")
    with pytest.raises(MidiParseError):
        parse_midi(bytes(raw))


def test_overlapping_notes_on_one_key_are_rejected():
    raw = _file(_track("00903c40" "10903c40" "10803c00" "10803c00" "00ff2f00"))
    with pytest.raises(ScoreValidationError):
        parse_midi(raw)


def test_unreleased_note_is_rejected():
    raw = _file(_track("00903c40" "00ff2f00"))
    with pytest.raises(ScoreValidationError, match="never released"):
        parse_midi(raw)


def test_unknown_chunks_are_skipped():
    extra = b"XFIH" + (2).to_bytes(4, "big") + b"\x00\x00"
    raw = MIDDLE_C[:14] + extra + MIDDLE_C[14:]
    assert parse_midi(raw).notes[0].key_index == 39


def test_load_fingering_accepts_names_and_numbers():
    roll = parse_midi(_file(_track("00904840" "8300804800" "00904a40" "8300804a00" "00ff2f00")))
    fingered = load_fingering(roll, "# comment\n0 51 index right\n4 53 3\n")
    assert [n.finger for n in fingered.notes] == [Finger.INDEX, Finger.MIDDLE]
    assert fingered.is_fingered


@pytest.mark.parametrize(
    "sidecar, message",
    [
        ("0 39 thumb\n", "not playable"),
        ("0 39 5\n", "not playable"),
        ("0 39 index right\n", "hand region"),
        ("0 39 index\n0 39 ring\n", "duplicate"),
        ("1 39 index\n", "no note starts"),
        ("", "unannotated note at step 0"),
        ("0 39 knuckle\n", "unknown finger"),
    ],
)
def test_load_fingering_errors(sidecar, message):
    with pytest.raises(FingeringError, match=message):
        load_fingering(parse_midi(MIDDLE_C), sidecar)


@pytest.mark.parametrize("name", sorted(SONGS))
def test_bundled_songs_round_trip(name):
    roll = bundled_song(name)
    restored = load_fingering(parse_midi(emit_roll(roll), roll.split_key), emit_fingering(roll))
    assert restored == roll


def test_header_meta_events_do_not_change_the_roll(twinkle):
    raw = emit_roll(twinkle, {"config_hash": "abc", "seed": "3"})
    assert load_fingering(parse_midi(raw), emit_fingering(twinkle)) == twinkle


@pytest.mark.parametrize(
    "name, steps",
    [("twinkle", 160), ("hot_cross_buns", 160), ("ode_to_joy", 330), ("fur_elise", 320), ("prelude_in_c", 330)],
)
def test_bundled_song_lengths(name, steps):
    assert bundled_song(name).num_steps == steps


def test_bundled_songs_are_monophonic_per_hand():
    for name in SONGS:
        roll = bundled_song(name)
        for hand in Hand:
            assert all(len(keys) <= 1 for keys in roll.goal_keys(hand)), name


def test_unknown_song():
    with pytest.raises(UnknownNameError, match="twinkle"):
        bundled_song("wonderwall")


def test_key_names():
    assert key_index("A0") == 0
    assert key_index("C4") == 39
    assert key_index("C#4") == 40
    assert key_index("Bb3") == 37
    assert key_index("C8") == 87


def test_roll_rejects_notes_outside_their_hand_region():
    with pytest.raises(ValueError):
        PianoRoll(notes=[NoteEvent(key_index=60, onset_step=0, duration_steps=1, hand=Hand.LEFT)])
