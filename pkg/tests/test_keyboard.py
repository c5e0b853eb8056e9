import numpy as np
import pytest

from pianoadapt.errors import ContractViolation
from pianoadapt.models.keyboard import (
    Keyboard,
    KeyState,
    build_keyboard,
    depth_clamp,
    format_press_events,
    pressed_by_finger,
    step_keys,
)
from pianoadapt.schemas.keyboard import KeyColor

C4 = 39


def test_layout_counts_and_colors():
    specs = build_keyboard()
    assert len(specs) == 88
    assert sum(s.color == KeyColor.WHITE for s in specs) == 52
    assert specs[0].color == KeyColor.WHITE
    assert specs[1].color == KeyColor.BLACK
    assert specs[C4].color == KeyColor.WHITE
    assert specs[C4 + 1].color == KeyColor.BLACK


def test_white_keys_tile_without_gaps():
    whites = [s for s in build_keyboard() if s.color == KeyColor.WHITE]
    for left, right in zip(whites, whites[1:]):
        assert right.center_y - right.half_width == pytest.approx(left.center_y + left.half_width)


def test_black_key_sits_on_the_white_boundary():
    specs = build_keyboard()
    black = specs[C4 + 1]
    assert black.center_y == pytest.approx(specs[C4].center_y + specs[C4].half_width)
    assert black.top_z > specs[C4].top_z
    assert black.x_min > specs[C4].x_min


@pytest.mark.parametrize("num_keys", [11, 89])
def test_key_count_bounds(num_keys):
    with pytest.raises(ContractViolation):
        build_keyboard(num_keys)


def test_half_depression_reaches_threshold(keyboard):
    spec = keyboard[C4]
    tips = [(0, spec.contact_x, spec.center_y, -0.5 * keyboard.geometry.travel)]
    state, events = step_keys(keyboard, tips, KeyState.released())
    assert state.depression[C4] == pytest.approx(0.5)
    assert state.active_keys() == [C4]
    assert [(e.finger_id, e.key_index, e.on) for e in events] == [(0, C4, True)]


def test_hover_presses_nothing(keyboard):
    spec = keyboard[C4]
    state, events = step_keys(keyboard, [(0, spec.contact_x, spec.center_y, 0.001)], KeyState.released())
    assert not state.active.any()
    assert events == []


def test_release_reports_the_pressing_finger(keyboard):
    spec = keyboard[C4]
    pressed, _ = step_keys(keyboard, [(2, spec.contact_x, spec.center_y, -0.01)], KeyState.released())
    released, events = step_keys(keyboard, [(2, spec.contact_x, spec.center_y, 0.01)], pressed)
    assert [(e.finger_id, e.key_index, e.on) for e in events] == [(2, C4, False)]
    assert released.owner[C4] == -1


def test_deepest_fingertip_owns_a_shared_key(keyboard):
    spec = keyboard[C4]
    tips = [(0, spec.contact_x, spec.center_y, -0.006), (1, spec.contact_x, spec.center_y, -0.009)]
    state, events = step_keys(keyboard, tips, KeyState.released())
    assert events[0].finger_id == 1
    assert state.depression[C4] == pytest.approx(0.9)


def test_raised_threshold_silences_a_light_press(keyboard):
    spec = keyboard[C4]
    tips = [(0, spec.contact_x, spec.center_y, -0.005)]
    state, _ = step_keys(keyboard, tips, KeyState.released(), threshold=0.6)
    assert not state.active.any()


def test_black_key_needs_depth_from_its_raised_top(keyboard):
    black = keyboard[C4 + 1]
    state, _ = step_keys(keyboard, [(0, black.contact_x, black.center_y, 0.006)], KeyState.released())
    assert state.active_keys() == [C4 + 1]


def test_pressed_by_finger(keyboard):
    spec = keyboard[C4 + 2]
    tips = [(0, spec.contact_x, spec.center_y, -0.008), (1, 0.03, keyboard[C4].center_y, 0.01)]
    assert pressed_by_finger(keyboard, tips) == {0: [C4 + 2], 1: []}


def test_depth_clamp(keyboard):
    floor = -keyboard.geometry.travel - keyboard.geometry.clamp_margin
    np.testing.assert_allclose(depth_clamp(np.array([-1.0, 0.0]), keyboard), [floor, 0.0])
    assert depth_clamp(-0.001, keyboard) == -0.001


def test_depth_clamp_uses_the_floor_of_the_key_below(keyboard):
    white, black = keyboard[C4], keyboard[C4 + 1]
    margin = keyboard.geometry.travel + keyboard.geometry.clamp_margin
    x = np.array([white.contact_x, black.contact_x, -0.05])
    y = np.array([white.center_y, black.center_y, white.center_y])
    clamped = depth_clamp(np.full(3, -1.0), keyboard, x, y)
    np.testing.assert_allclose(clamped, [white.top_z - margin, black.top_z - margin, keyboard.floor_z], atol=1e-12)
    assert depth_clamp(-1.0, keyboard, black.contact_x, black.center_y) == pytest.approx(black.top_z - margin)
    state, _ = step_keys(keyboard, [(0, black.contact_x, black.center_y, clamped[1])], KeyState.released())
    assert state.depression[C4 + 1] == 1.0
    assert state.active_keys() == [C4 + 1]


def test_press_event_lines(keyboard):
    spec = keyboard[C4]
    _, events = step_keys(keyboard, [(1, spec.contact_x, spec.center_y, -0.01)], KeyState.released())
    assert format_press_events(7, events) == [f"7 1 {C4} on"]


def test_keyboard_arrays_match_specs():
    board = Keyboard()
    assert len(board) == 88
    assert board.is_black.sum() == 36
    assert board.center_y[C4] == board[C4].center_y
