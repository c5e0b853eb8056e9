import numpy as np
import pytest

from pianoadapt.errors import ContractViolation
from pianoadapt.models.env import build_envs, preset_gap
from pianoadapt.models.hand import script_presses
from pianoadapt.models.refine import (
    assign_fingers,
    chunk_correction,
    closest_key,
    refine,
    refine_iteration,
    signed_error,
    step_errors,
)
from pianoadapt.schemas.refine import PressLog, PressRecord, RefineConfig
from pianoadapt.schemas.score import Finger, Hand, NoteEvent, PianoRoll


@pytest.fixture
def held_note():
    """Middle finger holding D5 for ten steps."""
    return PianoRoll(
        title="held",
        notes=[NoteEvent(key_index=53, onset_step=0, duration_steps=10, hand=Hand.RIGHT, finger=Finger.MIDDLE)],
    )


def _log(active, steps=10, target=53):
    return PressLog(
        hand=Hand.RIGHT,
        records=[PressRecord(step=t, targets=[(Finger.MIDDLE, target)], active=list(active)) for t in range(steps)],
    )


def test_assign_fingers_one_key_each():
    assignment = assign_fingers([64, 60], [(Finger.INDEX, 60), (Finger.RING, 64)])
    assert assignment == {Finger.INDEX: [60], Finger.RING: [64]}


def test_assign_fingers_nothing_pressed():
    assert assign_fingers([], [(Finger.INDEX, 60)]) == {}


def test_assign_fingers_extra_key_goes_to_the_nearer_finger():
    assignment = assign_fingers([60, 61, 64], [(Finger.INDEX, 60), (Finger.RING, 64)])
    assert assignment == {Finger.INDEX: [60, 61], Finger.RING: [64]}


def test_assign_fingers_tie_keeps_left_block_small():
    assignment = assign_fingers([62], [(Finger.INDEX, 60), (Finger.RING, 64)])
    assert assignment == {Finger.RING: [62]}


def test_closest_key_prefers_the_lower_key_on_ties():
    assert closest_key([60, 64], 62) == 60
    assert closest_key([], 62) is None


@pytest.mark.parametrize(
    "pressed, target, expected",
    [(60, 62, 0.02), (64, 62, -0.02), (62, 62, 0.0), (None, 62, 0.0)],
)
def test_signed_error(pressed, target, expected):
    assert signed_error(pressed, target, 0.02) == expected


def test_chunk_correction():
    assert chunk_correction([0.1, 0.1, 0.0, 0.0], K=2, L=1) == pytest.approx(0.2 / 3)
    assert chunk_correction([0.0] * 4, K=2, L=1) == 0.0
    assert chunk_correction([0.02, 0.02], K=1, L=0) == pytest.approx(0.04)
    with pytest.raises(ContractViolation):
        chunk_correction([0.1, 0.1], K=2, L=1)


def test_step_errors_mark_the_finger_slot():
    errors = step_errors(_log([51], steps=3), 0.01)
    np.testing.assert_array_equal(errors, np.tile([0.0, 0.01, 0.0], (3, 1)))
    np.testing.assert_array_equal(step_errors(_log([], steps=3), 0.01), np.zeros((3, 3)))


def test_perfect_log_leaves_the_trajectory_alone(held_note, keyboard, hand_cfg):
    traj = script_presses(held_note, keyboard, hand_cfg)
    refined = refine_iteration(traj, {Hand.RIGHT: _log([53])}, 0.05, RefineConfig(), hand_cfg)
    np.testing.assert_array_equal(refined.right.q, traj.right.q)


def test_chunked_lateral_shift(held_note, keyboard, hand_cfg):
    traj = script_presses(held_note, keyboard, hand_cfg)
    cfg = RefineConfig(chunk_K=2, lookahead_L=1)
    delta = 0.01
    refined = refine_iteration(traj, {Hand.RIGHT: _log([51])}, delta, cfg, hand_cfg)

    shift = np.zeros(11)
    shift[1:9] = 4 * delta / 3
    shift[9:11] = 2 * delta / 3
    expected = np.stack([0.3 * shift, shift, 0.3 * shift], axis=1)
    np.testing.assert_allclose(refined.right.q[:, :, 0] - traj.right.q[:, :, 0], expected, atol=1e-15)
    np.testing.assert_array_equal(refined.right.q[:, :, 1:], traj.right.q[:, :, 1:])
    np.testing.assert_array_equal(refined.right.wrist, traj.right.wrist)
    np.testing.assert_array_equal(refined.left.q, traj.left.q)


def test_corrections_clamp_at_the_joint_limit(held_note, keyboard, hand_cfg):
    traj = script_presses(held_note, keyboard, hand_cfg)
    refined = refine_iteration(traj, {Hand.RIGHT: _log([51])}, 5.0, RefineConfig(), hand_cfg)
    assert refined.right.q[1:, 1, 0].max() == hand_cfg.joint_limits[0][1]


def test_log_length_must_match(held_note, keyboard, hand_cfg):
    traj = script_presses(held_note, keyboard, hand_cfg)
    with pytest.raises(ContractViolation):
        refine_iteration(traj, {Hand.RIGHT: _log([53], steps=4)}, 0.05, RefineConfig(), hand_cfg)


def test_identity_gap_keeps_the_input(three_keys, scripted, keyboard, hand_cfg, env_cfg):
    envs = build_envs(three_keys, keyboard, hand_cfg, env_cfg)
    best, history, iterates = refine(envs, scripted, three_keys, RefineConfig(iterations=3), hand_cfg, keyboard)
    assert best is scripted
    assert [step.f1 for step in history] == [1.0] * 4
    assert len(iterates) == 4
    for iterate in iterates[1:]:
        np.testing.assert_array_equal(iterate.right.q, scripted.right.q)


def test_zero_iterations_return_the_input(three_keys, scripted, keyboard, hand_cfg, env_cfg):
    envs = build_envs(three_keys, keyboard, hand_cfg, env_cfg)
    best, history, iterates = refine(envs, scripted, three_keys, RefineConfig(iterations=0), hand_cfg, keyboard)
    assert best is scripted
    assert len(history) == 1 and iterates == [scripted]


def test_step_size_anneals(three_keys, scripted, keyboard, hand_cfg, env_cfg):
    envs = build_envs(three_keys, keyboard, hand_cfg, env_cfg)
    cfg = RefineConfig(iterations=3, delta_init=0.1, anneal_factor=0.5)
    _, history, _ = refine(envs, scripted, three_keys, cfg, hand_cfg, keyboard)
    assert [step.delta for step in history] == pytest.approx([0.1, 0.05, 0.025, 0.0125])


def test_refinement_never_returns_a_worse_trajectory(twinkle, keyboard, hand_cfg, env_cfg):
    traj = script_presses(twinkle, keyboard, hand_cfg)
    gaps = {hand: preset_gap("bias-only", 0, hand, keyboard, hand_cfg) for hand in Hand}
    envs = build_envs(twinkle, keyboard, hand_cfg, env_cfg, gaps=gaps)
    best, history, _ = refine(envs, traj, twinkle, RefineConfig(iterations=4), hand_cfg, keyboard)
    assert max(step.f1 for step in history) >= history[0].f1
    only_lateral = [np.array_equal(best.track(h).q[:, :, 1:], traj.track(h).q[:, :, 1:]) for h in Hand]
    assert all(only_lateral)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bias_only_refinement_across_seeds(seed, twinkle, keyboard, hand_cfg, env_cfg):
    traj = script_presses(twinkle, keyboard, hand_cfg)
    gaps = {hand: preset_gap("bias-only", seed, hand, keyboard, hand_cfg) for hand in Hand}
    envs = build_envs(twinkle, keyboard, hand_cfg, env_cfg, gaps=gaps)
    best, history, iterates = refine(envs, traj, twinkle, RefineConfig(), hand_cfg, keyboard, seed=seed)
    assert len(iterates) == RefineConfig().iterations + 1
    assert max(step.f1 for step in history) >= history[0].f1
    nominal_envs = build_envs(twinkle, keyboard, hand_cfg, env_cfg)
    _, nominal, _ = refine(nominal_envs, traj, twinkle, RefineConfig(iterations=0), hand_cfg, keyboard, seed=seed)
    assert max(step.f1 for step in history[:9]) >= 0.9 * nominal[0].f1
    for hand in Hand:
        np.testing.assert_array_equal(best.track(hand).wrist, traj.track(hand).wrist)
