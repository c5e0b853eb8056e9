import numpy as np
import pytest

from pianoadapt.errors import FingeringError, UnreachableNoteError, ValidationFailure
from pianoadapt.models.hand import (
    clamp_joints,
    forward_kinematics,
    hover_height,
    key_width_angle,
    press_pose,
    relative_wrist,
    rest_trajectory,
    script_presses,
    script_wrist,
    trajectory_from_text,
    trajectory_to_text,
)
from pianoadapt.schemas.hand import HandConfig, HandTrack, JointTrajectory
from pianoadapt.schemas.keyboard import KeyColor
from pianoadapt.schemas.score import Finger, Hand, NoteEvent, PianoRoll, finger_slot


def _rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1.0]])


def _rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1.0]])


def _translate(x, y, z):
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return m


def _oracle_tip(cfg, q_finger, base, wrist):
    """Homogeneous-transform chain: base, lateral about z, proximal link, then flex-and-extend per link."""
    links = cfg.link_lengths
    m = _translate(*(wrist + base)) @ _rot_z(q_finger[0]) @ _translate(links[0], 0, 0)
    for angle, length in zip(q_finger[1:], links[1:]):
        m = m @ _rot_y(angle) @ _translate(length, 0, 0)
    return m[:3, 3]


def _roll(*notes):
    return PianoRoll(title="test", notes=list(notes))


def _note(key, step, finger, duration=1):
    return NoteEvent(key_index=key, onset_step=step, duration_steps=duration, hand=Hand.RIGHT, finger=finger)


def test_forward_kinematics_matches_transform_oracle(hand_cfg, rng):
    q = rng.uniform(-1.5, 1.5, size=(1000, 3, 4))
    wrist = rng.uniform(-0.5, 0.5, size=(1000, 3))
    tips = forward_kinematics(hand_cfg, q, wrist)
    bases = hand_cfg.finger_base_offsets()
    for i in range(1000):
        for slot in range(3):
            expected = _oracle_tip(hand_cfg, q[i, slot], bases[slot], wrist[i])
            np.testing.assert_allclose(tips[i, slot], expected, rtol=0, atol=1e-12)


def test_zero_pose_extends_straight_ahead(hand_cfg):
    tips = forward_kinematics(hand_cfg, np.zeros((3, 4)), np.zeros(3))
    expected = hand_cfg.finger_base_offsets() + [sum(hand_cfg.link_lengths), 0.0, 0.0]
    np.testing.assert_allclose(tips, expected, atol=1e-15)


def test_lateral_rotation_moves_tip_along_the_keyboard(hand_cfg):
    q = np.zeros((3, 4))
    q[:, 0] = 0.3
    tips = forward_kinematics(hand_cfg, q, np.zeros(3))
    chain = sum(hand_cfg.link_lengths)
    offsets = hand_cfg.finger_base_offsets()
    np.testing.assert_allclose(tips[:, 0] - offsets[:, 0], chain * np.cos(0.3))
    np.testing.assert_allclose(tips[:, 1] - offsets[:, 1], chain * np.sin(0.3))


def test_right_angle_flexions_with_unit_links_fold_back_to_the_base():
    cfg = HandConfig(link_lengths=[1.0, 1.0, 1.0, 1.0], finger_spacing=1.0)
    q = np.zeros((3, 4))
    q[:, 1:] = np.pi / 2
    tips = forward_kinematics(cfg, q, np.zeros(3))
    np.testing.assert_allclose(tips, cfg.finger_base_offsets(), atol=1e-12)


def test_clamping_is_idempotent(hand_cfg, rng):
    q = rng.uniform(-3, 3, size=(50, 3, 4))
    once = clamp_joints(hand_cfg, q)
    np.testing.assert_array_equal(clamp_joints(hand_cfg, once), once)
    limits = hand_cfg.limits_array()
    assert np.all(once >= limits[:, 0]) and np.all(once <= limits[:, 1])


@pytest.mark.parametrize("color", list(KeyColor))
def test_press_pose_reaches_the_requested_depth(hand_cfg, keyboard, color):
    flexion, reach = press_pose(hand_cfg, keyboard, color)
    q = np.tile(np.concatenate([[0.0], flexion]), (3, 1))
    tips = forward_kinematics(hand_cfg, q, np.array([0.0, 0.0, hover_height(hand_cfg, keyboard)]))
    top = keyboard.geometry.black_height if color == KeyColor.BLACK else 0.0
    np.testing.assert_allclose(tips[:, 2], top - hand_cfg.press_depth * keyboard.geometry.travel, atol=1e-12)
    np.testing.assert_allclose(tips[:, 0] - hand_cfg.base_x, reach, atol=1e-12)
    assert flexion[2] == hand_cfg.fixed_last_joint


def test_rest_pose_hovers_above_the_keys(hand_cfg, keyboard):
    q = np.tile(hand_cfg.rest_pose, (3, 1))
    tips = forward_kinematics(hand_cfg, q, np.array([0.0, 0.0, hover_height(hand_cfg, keyboard)]))
    np.testing.assert_allclose(tips[:, 2], hand_cfg.hover_clearance, atol=1e-12)


def test_key_width_angle(hand_cfg, keyboard):
    _, reach = press_pose(hand_cfg, keyboard, KeyColor.WHITE)
    assert key_width_angle(hand_cfg, keyboard) == pytest.approx(keyboard.geometry.white_width / reach)


def test_repeated_note_gives_constant_wrist(hand_cfg, keyboard):
    roll = _roll(_note(51, 0, Finger.MIDDLE, 3), _note(51, 5, Finger.MIDDLE, 3))
    track = script_wrist(roll, keyboard, hand_cfg)[Hand.RIGHT]
    assert np.all(track == track[0])


def test_simultaneous_notes_average_y(hand_cfg, keyboard):
    roll = _roll(_note(51, 0, Finger.INDEX), _note(55, 0, Finger.RING))
    track = script_wrist(roll, keyboard, hand_cfg)[Hand.RIGHT]
    assert track[1, 1] == pytest.approx(keyboard[53].center_y)


def test_anchors_are_joined_linearly(hand_cfg, keyboard):
    roll = _roll(_note(51, 0, Finger.MIDDLE), _note(55, 10, Finger.MIDDLE))
    track = script_wrist(roll, keyboard, hand_cfg)[Hand.RIGHT]
    assert track[1, 1] == pytest.approx(keyboard[51].center_y)
    assert track[11, 1] == pytest.approx(keyboard[55].center_y)
    assert track[6, 1] == pytest.approx(keyboard[53].center_y)
    assert track[0, 1] == track[1, 1]
    assert np.all(track[:, 2] == hover_height(hand_cfg, keyboard))


def test_black_keys_pull_the_wrist_back(hand_cfg, keyboard):
    white = script_wrist(_roll(_note(51, 0, Finger.MIDDLE)), keyboard, hand_cfg)[Hand.RIGHT]
    black = script_wrist(_roll(_note(52, 0, Finger.MIDDLE)), keyboard, hand_cfg)[Hand.RIGHT]
    assert black[1, 0] != white[1, 0]


def test_unreachable_note_names_step_and_key(hand_cfg, keyboard):
    roll = _roll(_note(51, 2, Finger.INDEX), _note(63, 2, Finger.RING))
    with pytest.raises(UnreachableNoteError, match="step 2"):
        script_wrist(roll, keyboard, hand_cfg)


def test_unfingered_roll_is_rejected(hand_cfg, keyboard):
    roll = PianoRoll(notes=[NoteEvent(key_index=51, onset_step=0, duration_steps=1, hand=Hand.RIGHT)])
    with pytest.raises(FingeringError):
        script_wrist(roll, keyboard, hand_cfg)


def test_relative_wrist_starts_at_zero(hand_cfg, keyboard, twinkle):
    track = script_wrist(twinkle, keyboard, hand_cfg)[Hand.LEFT]
    rel = relative_wrist(track)
    np.testing.assert_array_equal(rel[0], np.zeros(3))
    np.testing.assert_allclose(rel + track[0], track)
    np.testing.assert_array_equal(relative_wrist(track[5], track[5]), np.zeros(3))
    np.testing.assert_allclose(relative_wrist(track, track[5])[5:6], np.zeros((1, 3)))


def test_scripted_presses_put_the_finger_on_the_contact_point(hand_cfg, keyboard, tiny_roll):
    traj = script_presses(tiny_roll, keyboard, hand_cfg)
    track = traj.track(Hand.RIGHT)
    assert len(track) == tiny_roll.num_steps + 1
    for step, key, finger in ((0, 51, Finger.MIDDLE), (4, 53, Finger.RING)):
        tips = forward_kinematics(hand_cfg, track.q[step + 1], track.wrist[step + 1])
        tip = tips[finger_slot(Hand.RIGHT, finger)]
        assert tip[0] == pytest.approx(keyboard[key].contact_x, abs=1e-9)
        assert tip[1] == pytest.approx(keyboard[key].center_y, abs=1e-9)
        assert tip[2] < 0


def test_rest_trajectory_keeps_fingers_at_rest(hand_cfg, keyboard, tiny_roll):
    traj = rest_trajectory(tiny_roll, keyboard, hand_cfg)
    assert np.all(traj.right.q == np.asarray(hand_cfg.rest_pose))
    assert traj.num_steps == tiny_roll.num_steps


def test_trajectory_text_round_trip_is_exact(scripted):
    text = trajectory_to_text(scripted, {"seed": "0"})
    restored = trajectory_from_text(text)
    assert restored.title == scripted.title
    for hand in Hand:
        np.testing.assert_array_equal(restored.track(hand).q, scripted.track(hand).q)
        np.testing.assert_array_equal(restored.track(hand).wrist, scripted.track(hand).wrist)


def test_malformed_trajectory_text(scripted):
    text = trajectory_to_text(scripted)
    lines = text.splitlines()
    lines[-1] = " ".join(lines[-1].split()[:-1])
    with pytest.raises(ValidationFailure):
        trajectory_from_text("\n".join(lines))


def test_tracks_must_match_in_length():
    short = HandTrack(q=np.zeros((3, 3, 4)), wrist=np.zeros((3, 3)))
    long = HandTrack(q=np.zeros((4, 3, 4)), wrist=np.zeros((4, 3)))
    with pytest.raises(ValueError):
        JointTrajectory(title="x", left=short, right=long)
