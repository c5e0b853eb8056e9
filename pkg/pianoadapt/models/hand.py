"""
Kinematics of the three-finger hands and score-driven scripting of wrist and press trajectories.
"""
import io
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from pianoadapt.errors import ConfigError, FingeringError, UnreachableNoteError, ValidationFailure
from pianoadapt.models.keyboard import Keyboard
from pianoadapt.schemas.hand import FINGERS_PER_HAND, JOINTS_PER_FINGER, HandConfig, HandTrack, JointTrajectory
from pianoadapt.schemas.keyboard import KeyColor
from pianoadapt.schemas.score import Hand, PianoRoll, finger_slot

logger = logging.getLogger(__name__)


def forward_kinematics(cfg: HandConfig, q: np.ndarray, wrist: np.ndarray) -> np.ndarray:
    """
    Fingertip positions of one hand.

    Each finger is a lateral rotation about z at its base followed by three flexions
    about the lateral axis; positive flexion bends the fingertip down.

    Args:
        cfg: Hand kinematics
        q: (..., 3, 4) joint angles
        wrist: (..., 3) wrist positions

    Returns:
        (..., 3, 3) fingertip positions in keyboard frame
    """
    q = np.asarray(q, dtype=np.float64)
    links = np.asarray(cfg.link_lengths, dtype=np.float64)
    phi = np.cumsum(q[..., 1:], axis=-1)
    reach = links[0] + np.sum(links[1:] * np.cos(phi), axis=-1)
    drop = -np.sum(links[1:] * np.sin(phi), axis=-1)
    theta = q[..., 0]
    local = np.stack([reach * np.cos(theta), reach * np.sin(theta), drop], axis=-1)
    return local + cfg.finger_base_offsets() + np.asarray(wrist, dtype=np.float64)[..., None, :]


def clamp_joints(cfg: HandConfig, q: np.ndarray) -> np.ndarray:
    limits = cfg.limits_array()
    return np.clip(q, limits[:, 0], limits[:, 1])


def _chain_phasor(cfg: HandConfig, flex2: float, flex3: float) -> complex:
    links = cfg.link_lengths
    return links[1] + links[2] * np.exp(1j * flex2) + links[3] * np.exp(1j * (flex2 + flex3))


def hover_height(cfg: HandConfig, keyboard: Keyboard) -> float:
    """Wrist z that leaves rest-pose fingertips hover_clearance above the white key tops."""
    rest = np.asarray(cfg.rest_pose)
    rest_drop = float(np.sum(np.asarray(cfg.link_lengths[1:]) * np.sin(np.cumsum(rest[1:]))))
    return cfg.hover_clearance + rest_drop - cfg.base_z


def press_pose(cfg: HandConfig, keyboard: Keyboard, color: KeyColor) -> Tuple[np.ndarray, float]:
    """
    Flexion angles that put a finger's tip press_depth of the travel into a key of the given color.

    The second flexion stays at rest and the last at its fixed value; the first is solved in
    closed form from the phasor sum of the chain.

    Returns:
        (3,) flexion angles and the horizontal reach of the tip from the finger base
    """
    geometry = keyboard.geometry
    top = geometry.black_height if color == KeyColor.BLACK else 0.0
    target_z = top - cfg.press_depth * geometry.travel
    flex2, flex3 = cfg.rest_pose[2], cfg.fixed_last_joint
    chain = _chain_phasor(cfg, flex2, flex3)
    radius, offset = abs(chain), float(np.angle(chain))
    height = hover_height(cfg, keyboard) + cfg.base_z - target_z
    if abs(height) > radius:
        raise ConfigError(f"a {color.value} key top is out of reach of the finger chain at the hover height")
    flex1 = float(np.arcsin(height / radius)) - offset
    lo, hi = cfg.joint_limits[1]
    if not lo <= flex1 <= hi:
        raise ConfigError(f"pressing a {color.value} key needs flexion {flex1:.3f} outside [{lo}, {hi}]")
    reach = cfg.link_lengths[0] + radius * float(np.cos(flex1 + offset))
    return np.array([flex1, flex2, flex3]), reach


def key_width_angle(cfg: HandConfig, keyboard: Keyboard) -> float:
    """Lateral angle subtended by one white key at the pressing fingertip radius."""
    _, reach = press_pose(cfg, keyboard, KeyColor.WHITE)
    return keyboard.geometry.white_width / reach


def _default_wrist(cfg: HandConfig, keyboard: Keyboard, hand: Hand, split_key: int) -> np.ndarray:
    lo, hi = (0, split_key) if hand == Hand.LEFT else (split_key, len(keyboard))
    _, reach = press_pose(cfg, keyboard, KeyColor.WHITE)
    middle = keyboard.center_y[lo:hi].mean()
    return np.array(
        [keyboard.geometry.white_contact_x - cfg.base_x - reach, middle, hover_height(cfg, keyboard)]
    )


def _require_fingered(roll: PianoRoll) -> None:
    if not roll.is_fingered:
        raise FingeringError(f"roll '{roll.title}' has unannotated notes")


def script_wrist(roll: PianoRoll, keyboard: Keyboard, cfg: HandConfig) -> Dict[Hand, np.ndarray]:
    """
    Wrist track per hand, (T+1, 3), index t+1 serving roll step t.

    Each note anchors the wrist so its finger sits over the key; simultaneous notes
    average y and take the minimum x. Anchors are joined linearly and held at the ends.

    Raises:
        UnreachableNoteError: If a key cannot be reached laterally from the averaged anchor
    """
    _require_fingered(roll)
    bases = cfg.finger_base_offsets()
    reach = {color: press_pose(cfg, keyboard, color)[1] for color in KeyColor}
    max_lateral = reach[KeyColor.WHITE] * np.sin(cfg.joint_limits[cfg.lateral_joint_index][1])
    z = hover_height(cfg, keyboard)
    length = roll.num_steps + 1

    tracks: Dict[Hand, np.ndarray] = {}
    for hand in Hand:
        anchor_index: List[int] = []
        anchor_xy: List[Tuple[float, float]] = []
        for step, targets in enumerate(roll.fingered_goals(hand)):
            if not targets:
                continue
            ys, xs = [], []
            for finger, key in targets:
                spec = keyboard[key]
                base = bases[finger_slot(hand, finger)]
                ys.append(spec.center_y - base[1])
                xs.append(spec.contact_x - base[0] - reach[spec.color])
            y = float(np.mean(ys))
            for (finger, key), y_key in zip(targets, ys):
                if abs(y_key - y) > max_lateral:
                    raise UnreachableNoteError(
                        f"{hand.value} {finger.value} finger cannot reach key {key} at step {step}"
                    )
            anchor_index.append(step + 1)
            anchor_xy.append((min(xs), y))

        track = np.empty((length, 3))
        if anchor_index:
            points = np.asarray(anchor_xy)
            indices = np.arange(length)
            track[:, 0] = np.interp(indices, anchor_index, points[:, 0])
            track[:, 1] = np.interp(indices, anchor_index, points[:, 1])
        else:
            track[:, :2] = _default_wrist(cfg, keyboard, hand, roll.split_key)[:2]
        track[:, 2] = z
        tracks[hand] = track
    return tracks


def relative_wrist(track: np.ndarray, origin: Optional[np.ndarray] = None) -> np.ndarray:
    """Wrist positions expressed relative to origin, by default the first pose of the track."""
    track = np.asarray(track, dtype=np.float64)
    return track - (track[0] if origin is None else origin)


def _rest_track(cfg: HandConfig, wrist: np.ndarray) -> HandTrack:
    q = np.broadcast_to(np.asarray(cfg.rest_pose, dtype=np.float64), (len(wrist), FINGERS_PER_HAND, JOINTS_PER_FINGER))
    return HandTrack(q=q.copy(), wrist=wrist)


def rest_trajectory(roll: PianoRoll, keyboard: Keyboard, cfg: HandConfig) -> JointTrajectory:
    """Scripted wrist with every finger hovering at rest."""
    wrists = script_wrist(roll, keyboard, cfg)
    return JointTrajectory(
        title=roll.title,
        left=_rest_track(cfg, wrists[Hand.LEFT]),
        right=_rest_track(cfg, wrists[Hand.RIGHT]),
    )


def script_presses(roll: PianoRoll, keyboard: Keyboard, cfg: HandConfig) -> JointTrajectory:
    """
    Kinematic reference: scripted wrist, each goal finger aimed laterally at its key in the
    press pose for the key's color, idle fingers at rest.
    """
    traj = rest_trajectory(roll, keyboard, cfg)
    bases = cfg.finger_base_offsets()
    poses = {color: press_pose(cfg, keyboard, color) for color in KeyColor}
    lateral = cfg.lateral_joint_index
    for hand in Hand:
        track = traj.track(hand)
        for step, targets in enumerate(roll.fingered_goals(hand)):
            for finger, key in targets:
                slot = finger_slot(hand, finger)
                spec = keyboard[key]
                flexion, reach = poses[spec.color]
                dy = spec.center_y - (track.wrist[step + 1, 1] + bases[slot, 1])
                track.q[step + 1, slot, 1:] = flexion
                track.q[step + 1, slot, lateral] = np.arcsin(np.clip(dy / reach, -1.0, 1.0))
        track.q[:] = clamp_joints(cfg, track.q)
    return traj


_COLUMNS_PER_HAND = 3 + FINGERS_PER_HAND * JOINTS_PER_FINGER


def _column_names() -> List[str]:
    names = ["index"]
    for hand in (Hand.LEFT, Hand.RIGHT):
        names += [f"{hand.value}_wrist_{axis}" for axis in "xyz"]
        names += [f"{hand.value}_q{f}{j}" for f in range(FINGERS_PER_HAND) for j in range(JOINTS_PER_FINGER)]
    return names


def trajectory_to_text(traj: JointTrajectory, header: Optional[Dict[str, str]] = None) -> str:
    """Columnar text, one row per trajectory index, floats written with 17 significant digits."""
    lines = [f"title: {traj.title}"] + [f"{k}: {v}" for k, v in (header or {}).items()]
    lines.append(" ".join(_column_names()))
    rows = [np.arange(len(traj.left), dtype=np.float64)[:, None]]
    for track in (traj.left, traj.right):
        rows += [track.wrist, track.q.reshape(len(track), -1)]
    buffer = io.StringIO()
    np.savetxt(buffer, np.hstack(rows), fmt="%.17g", header="\n".join(lines))
    return buffer.getvalue()


def trajectory_from_text(text: str) -> JointTrajectory:
    title = "untitled"
    for line in text.splitlines():
        if line.startswith("# title: "):
            title = line[len("# title: "):]
            break
    try:
        data = np.loadtxt(io.StringIO(text), comments="#", ndmin=2)
    except ValueError as e:
        raise ValidationFailure(f"malformed trajectory file: {e}") from e
    if data.shape[1] != 1 + 2 * _COLUMNS_PER_HAND:
        raise ValidationFailure(f"trajectory file has {data.shape[1]} columns, expected {1 + 2 * _COLUMNS_PER_HAND}")
    tracks = []
    for start in (1, 1 + _COLUMNS_PER_HAND):
        block = data[:, start:start + _COLUMNS_PER_HAND]
        tracks.append(
            HandTrack(q=block[:, 3:].reshape(-1, FINGERS_PER_HAND, JOINTS_PER_FINGER), wrist=block[:, :3])
        )
    return JointTrajectory(title=title, left=tracks[0], right=tracks[1])
