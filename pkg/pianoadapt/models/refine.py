"""
Structured refinement of lateral joints from pseudo-real press logs.
Only lateral joints move; flexions and the wrist track pass through untouched.
"""
import logging
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from pianoadapt.errors import ContractViolation
from pianoadapt.models.env import PianoEnv
from pianoadapt.models.hand import key_width_angle
from pianoadapt.models.keyboard import Keyboard
from pianoadapt.models.metrics import score_f1
from pianoadapt.models.rollout import OpenLoopSource, rollout
from pianoadapt.schemas.hand import FINGERS_PER_HAND, HandConfig, JointTrajectory
from pianoadapt.schemas.refine import PressLog, RefineConfig, RefineStep
from pianoadapt.schemas.score import Finger, Hand, PianoRoll, finger_slot

logger = logging.getLogger(__name__)


def assign_fingers(pressed: Sequence[int], active_fingers: Sequence[Tuple[Finger, int]]) -> Dict[Finger, List[int]]:
    """
    Split sounding keys among fingers, lower keys to fingers further left.

    Blocks are contiguous in key order and chosen to minimize the total distance of each
    key to its finger's target; among equal costs the smallest leftmost blocks win.

    Args:
        pressed: Sounding keys
        active_fingers: (finger, target key) pairs ordered leftmost first

    Returns:
        Finger -> keys for fingers that received at least one key
    """
    keys = sorted(set(pressed))
    if not keys or not active_fingers:
        return {}
    targets = [target for _, target in active_fingers]
    best_cuts: Optional[Tuple[int, ...]] = None
    best_cost = np.inf
    for cuts in combinations_with_replacement(range(len(keys) + 1), len(targets) - 1):
        bounds = (0, *cuts, len(keys))
        cost = sum(
            abs(k - target) for target, lo, hi in zip(targets, bounds, bounds[1:]) for k in keys[lo:hi]
        )
        if cost < best_cost:
            best_cost, best_cuts = cost, cuts
    bounds = (0, *best_cuts, len(keys))
    return {
        finger: keys[lo:hi] for (finger, _), lo, hi in zip(active_fingers, bounds, bounds[1:]) if hi > lo
    }


def closest_key(keys: Sequence[int], target: int) -> Optional[int]:
    """Pressed key nearest the target; ties go to the lower key."""
    if not keys:
        return None
    return min(keys, key=lambda k: (abs(k - target), k))


def signed_error(pressed_closest: Optional[int], target: int, delta: float) -> float:
    """+delta when the finger landed below its target, -delta above, 0 on target or on a miss."""
    if pressed_closest is None or pressed_closest == target:
        return 0.0
    return delta if pressed_closest < target else -delta


def chunk_correction(deltas: Sequence[float], K: int, L: int) -> float:
    """Sum of the K+L+1 supplied errors divided by K+L."""
    if len(deltas) != K + L + 1:
        raise ContractViolation(f"expected {K + L + 1} error values, got {len(deltas)}")
    return float(np.sum(deltas)) / (K + L)


def step_errors(log: PressLog, delta: float) -> np.ndarray:
    """(T, 3) signed lateral error per step and finger slot."""
    errors = np.zeros((len(log), FINGERS_PER_HAND))
    for t, record in enumerate(log.records):
        seen = set()
        fingers = []
        for finger, target in sorted(record.targets, key=lambda ft: finger_slot(log.hand, ft[0])):
            if finger not in seen:
                seen.add(finger)
                fingers.append((finger, target))
        assignment = assign_fingers(record.active, fingers)
        for finger, target in fingers:
            nearest = closest_key(assignment.get(finger, []), target)
            errors[t, finger_slot(log.hand, finger)] = signed_error(nearest, target, delta)
    return errors


def refine_iteration(
    traj: JointTrajectory,
    logs: Dict[Hand, PressLog],
    delta: float,
    cfg: RefineConfig,
    hand_cfg: HandConfig,
) -> JointTrajectory:
    """
    Shift each finger's lateral joint over every chunk [t, t+K) of states by its chunk
    correction, and its neighbors by neighbor_coef of it, then clamp to the joint limits.

    Raises:
        ContractViolation: If a log does not cover every step of the trajectory
    """
    result = traj.copy()
    lateral = hand_cfg.lateral_joint_index
    lo, hi = hand_cfg.joint_limits[lateral]
    K, L = cfg.chunk_K, cfg.lookahead_L
    T = traj.num_steps
    for hand, log in logs.items():
        if len(log) != T:
            raise ContractViolation(f"{hand.value} press log has {len(log)} steps, trajectory has {T}")
        errors = np.vstack([step_errors(log, delta), np.zeros((K + L + 1, FINGERS_PER_HAND))])
        track = result.track(hand)
        for start in range(0, T, K):
            correction = np.zeros(FINGERS_PER_HAND)
            for slot in range(FINGERS_PER_HAND):
                own = chunk_correction(errors[start:start + K + L + 1, slot], K, L)
                correction[slot] += own
                for neighbor in (slot - 1, slot + 1):
                    if 0 <= neighbor < FINGERS_PER_HAND:
                        correction[neighbor] += cfg.neighbor_coef * own
            track.q[start + 1:min(start + K, T) + 1, :, lateral] += correction
        track.q[:, :, lateral] = np.clip(track.q[:, :, lateral], lo, hi)
    return result


def refine(
    envs: Dict[Hand, PianoEnv],
    traj0: JointTrajectory,
    roll: PianoRoll,
    cfg: RefineConfig,
    hand_cfg: HandConfig,
    keyboard: Keyboard,
    seed: int = 0,
) -> Tuple[JointTrajectory, List[RefineStep], List[JointTrajectory]]:
    """
    Alternate open-loop rollouts on the pseudo-real envs with lateral updates, annealing the
    step size after each update.

    Returns:
        The best-scoring trajectory (traj0 included), the score of every iteration and every iterate
    """
    delta_init = cfg.delta_init or key_width_angle(hand_cfg, keyboard) / 2.0
    iterates = [traj0]
    history: List[RefineStep] = []
    best, best_f1 = traj0, -1.0
    current = traj0
    for i in range(cfg.iterations + 1):
        result = rollout(envs, OpenLoopSource(current), seed=seed)
        report = score_f1(result.activations, roll)
        delta = delta_init * cfg.anneal_factor ** i
        history.append(
            RefineStep(iteration=i, delta=delta, f1=report.f1, precision=report.precision, recall=report.recall)
        )
        logger.info(f"Refinement iteration {i}: F1 {report.f1 * 100:.1f}")
        if report.f1 > best_f1:
            best, best_f1 = current, report.f1
        if i == cfg.iterations:
            break
        current = refine_iteration(current, result.press_logs, delta, cfg, hand_cfg)
        iterates.append(current)
    return best, history, iterates
