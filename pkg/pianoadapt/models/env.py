"""
Per-hand piano MDP shared by the nominal and the gap-injected simulator.
An identity GapModel makes both bit-identical.
"""
import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pianoadapt.errors import ConfigError, ContractViolation, UnknownNameError
from pianoadapt.models.hand import clamp_joints, forward_kinematics, key_width_angle, relative_wrist, script_wrist
from pianoadapt.models.keyboard import Keyboard, KeyState, PressEvent, depth_clamp, pressed_by_finger, step_keys
from pianoadapt.schemas.env import GAP_PRESETS, EnvConfig, GapModel, GapRanges, RewardBreakdown
from pianoadapt.schemas.hand import FINGERS_PER_HAND, HandConfig, JointState
from pianoadapt.schemas.learn import TD3Config
from pianoadapt.schemas.score import FINGER_ORDER, Finger, Hand, PianoRoll, finger_slot

logger = logging.getLogger(__name__)

PROPRIO_DIM = FINGERS_PER_HAND * 4 + 1  # joint angles + wrist y
ACTIVE_JOINTS = 3  # lateral, flex1, flex2 per finger


def kernel(distance, margin: float = 0.05):
    """Gaussian tolerance: 1 at zero distance, 0.1 at the margin."""
    d = np.asarray(distance, dtype=np.float64) / margin
    return np.exp(-np.log(10.0) * d * d)


def key_press_reward(keys: KeyState, goal: Iterable[int], key_on_coef: float = 0.7, margin: float = 0.05) -> float:
    """
    key_on_coef * mean proximity of goal keys to full depression
    + (1 - key_on_coef) * (no key sounding outside the goal).
    """
    goal_keys = sorted(set(goal))
    if goal_keys:
        press = float(np.mean(kernel(np.abs(keys.depression[goal_keys] - 1.0), margin)))
    else:
        press = 1.0
    off = np.ones(len(keys.active), dtype=bool)
    off[goal_keys] = False
    false_positive = bool(keys.active[off].any())
    return key_on_coef * press + (1.0 - key_on_coef) * (0.0 if false_positive else 1.0)


def fingering_reward(
    fingertips: np.ndarray,
    targets: Sequence[Tuple[Finger, int]],
    keyboard: Keyboard,
    hand: Hand,
    margin: float = 0.05,
) -> float:
    """Mean kernel of the horizontal distance from each assigned fingertip to its key's contact point."""
    if not targets:
        return 1.0
    distances = []
    for finger, key in targets:
        tip = fingertips[finger_slot(hand, finger)]
        spec = keyboard[key]
        distances.append(np.hypot(tip[0] - spec.contact_x, tip[1] - spec.center_y))
    return float(np.mean(kernel(distances, margin)))


def key_on_coef_at(grad_step: int, cfg: TD3Config) -> float:
    return cfg.key_on_initial if grad_step < cfg.key_on_switch_step else cfg.key_on_final


def make_real_reward(keys: KeyState, goal: Iterable[int], schedule_step: int, cfg: Optional[TD3Config] = None) -> float:
    """Key press reward alone, with the key-on coefficient annealed on gradient steps."""
    cfg = cfg or TD3Config()
    return key_press_reward(keys, goal, key_on_coef_at(schedule_step, cfg))


def sample_gap(ranges: GapRanges, rng: np.random.Generator, width_angle: float, seed: int = 0) -> GapModel:
    """Draw gap parameters uniformly from the given ranges."""
    magnitude = rng.uniform(*ranges.lateral_bias_key_widths, size=FINGERS_PER_HAND) * width_angle
    signs = rng.choice([-1.0, 1.0], size=FINGERS_PER_HAND)
    return GapModel(
        lateral_bias=(magnitude * signs).tolist(),
        wrist_y_offset=float(rng.uniform(-ranges.wrist_y_offset, ranges.wrist_y_offset)),
        lag_alpha=float(rng.uniform(*ranges.lag_alpha)),
        actuation_noise_sd=ranges.actuation_noise_sd,
        threshold_shift=float(rng.uniform(*ranges.threshold_shift)),
        seed=seed,
    )


def preset_gap(name: str, seed: int, hand: Hand, keyboard: Keyboard, hand_cfg: HandConfig) -> GapModel:
    """
    Draw the gap of one hand from a named preset.

    Raises:
        UnknownNameError: If the preset does not exist
    """
    if name not in GAP_PRESETS:
        raise UnknownNameError(f"unknown gap preset '{name}'; choose one of {', '.join(GAP_PRESETS)}")
    if name == "identity":
        return GapModel(seed=seed)
    rng = np.random.default_rng([seed, 0 if hand == Hand.LEFT else 1])
    return sample_gap(GAP_PRESETS[name], rng, key_width_angle(hand_cfg, keyboard), seed)


class Observation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    proprioception: np.ndarray = Field(..., description="12 joint angles then wrist y relative to the reset pose")
    activation: np.ndarray = Field(..., description="Depression of the hand's region keys")
    goal_window: np.ndarray = Field(..., description="(H, region) goal activations from step t")
    active_fingers: np.ndarray = Field(..., description="(H, 3) fingers with a target, slot order")
    phase: float

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [self.proprioception, self.activation, self.goal_window.ravel(), self.active_fingers.ravel(), [self.phase]]
        )

    def with_proprioception(self, proprioception: np.ndarray) -> "Observation":
        return self.model_copy(update={"proprioception": proprioception.copy()})


class StepResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    observation: Observation
    reward: RewardBreakdown
    pressed: Dict[Finger, List[int]]
    active: List[int]
    events: List[PressEvent]
    actual: JointState
    done: bool


class PianoEnv:
    """
    One hand playing its part of a song.

    Each 10 Hz step interpolates the commanded joints over the substeps and tracks them
    through the gap model; keys are read at the step boundary.
    """

    def __init__(
        self,
        roll: PianoRoll,
        hand: Hand,
        keyboard: Keyboard,
        hand_cfg: HandConfig,
        env_cfg: Optional[EnvConfig] = None,
        gap: Optional[GapModel] = None,
        seed: int = 0,
        randomize: bool = False,
    ):
        self.roll = roll
        self.hand = hand
        self.keyboard = keyboard
        self.hand_cfg = hand_cfg
        self.cfg = env_cfg or EnvConfig()
        self.gap = gap or GapModel()
        self.seed = seed
        if randomize and self.cfg.randomization is None:
            raise ConfigError("domain randomization requested but env.randomization has no ranges")
        self.randomize = randomize
        self.key_on_coef = self.cfg.key_on_coef
        self.num_steps = roll.num_steps

        lo, hi = (0, roll.split_key) if hand == Hand.LEFT else (roll.split_key, len(keyboard))
        self.region = slice(lo, hi)
        self.targets = roll.fingered_goals(hand)
        self.goal_keys = roll.goal_keys(hand)
        self._goal_table = np.zeros((self.num_steps + self.cfg.lookahead, hi - lo))
        self._finger_table = np.zeros((self.num_steps + self.cfg.lookahead, FINGERS_PER_HAND))
        for step, keys in enumerate(self.goal_keys):
            self._goal_table[step, [k - lo for k in keys]] = 1.0
        for step, targets in enumerate(self.targets):
            for finger, _ in targets:
                self._finger_table[step, finger_slot(hand, finger)] = 1.0
        self._initial_wrist = (
            script_wrist(roll, keyboard, hand_cfg)[hand][0] if roll.is_fingered else None
        )
        self._width_angle = key_width_angle(hand_cfg, keyboard)
        self.reset()

    @property
    def commanded(self) -> JointState:
        """Last commanded joint state."""
        return self._command

    @property
    def observation_dim(self) -> int:
        region = self.region.stop - self.region.start
        return PROPRIO_DIM + region + self.cfg.lookahead * (region + FINGERS_PER_HAND) + 1

    def reset(self, seed: Optional[int] = None, initial: Optional[JointState] = None) -> Observation:
        """Rest pose, keys up, t = 0; the noise stream restarts from the seed."""
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng([self.seed, self.gap.seed])
        if self.randomize:
            self.gap = sample_gap(self.cfg.randomization, self.rng, self._width_angle, self.gap.seed)
        rest = np.broadcast_to(np.asarray(self.hand_cfg.rest_pose, dtype=np.float64), (FINGERS_PER_HAND, 4))
        if initial is not None:
            self._command = JointState(q=initial.q.copy(), wrist=initial.wrist.copy())
        else:
            wrist = self._initial_wrist if self._initial_wrist is not None else np.zeros(3)
            self._command = JointState(q=rest.copy(), wrist=wrist.copy())
        self.q = self._command.q.copy()
        self.wrist = self._actual_wrist(self._command.wrist)
        self._wrist_origin = self._command.wrist.copy()
        self.keys = KeyState.released(len(self.keyboard))
        self.t = 0
        return self.observe()

    def _actual_wrist(self, commanded: np.ndarray) -> np.ndarray:
        wrist = commanded.copy()
        wrist[1] += self.gap.wrist_y_offset
        return wrist

    def _actuate(self, command: np.ndarray) -> None:
        bias = np.zeros((FINGERS_PER_HAND, 4))
        bias[:, self.hand_cfg.lateral_joint_index] = self.gap.lateral_bias
        start = self._command.q
        substeps = self.cfg.substeps
        for s in range(1, substeps + 1):
            interpolated = command if s == substeps else start + (command - start) * (s / substeps)
            target = interpolated + bias
            if self.gap.lag_alpha == 1.0:
                q = target
            else:
                q = self.q + self.gap.lag_alpha * (target - self.q)
            if self.gap.actuation_noise_sd > 0:
                q = q + self.rng.normal(0.0, self.gap.actuation_noise_sd, size=q.shape)
            self.q = clamp_joints(self.hand_cfg, q)

    def fingertips(self) -> np.ndarray:
        tips = forward_kinematics(self.hand_cfg, self.q, self.wrist)
        tips[:, 2] = depth_clamp(tips[:, 2], self.keyboard, tips[:, 0], tips[:, 1])
        return tips

    def step(self, command: JointState) -> StepResult:
        """
        Apply one commanded joint state.

        Raises:
            ContractViolation: If the song is already over
        """
        if self.t >= self.num_steps:
            raise ContractViolation(f"step {self.t} requested after the last step {self.num_steps - 1}")
        t = self.t
        self._actuate(command.q)
        action_l1 = float(np.abs(command.q[:, :ACTIVE_JOINTS] - self._command.q[:, :ACTIVE_JOINTS]).sum())
        self._command = JointState(q=command.q.copy(), wrist=command.wrist.copy())
        self.wrist = self._actual_wrist(command.wrist)

        tips = self.fingertips()
        fingertips = [(slot, *tips[slot]) for slot in range(FINGERS_PER_HAND)]
        threshold = self.keyboard.geometry.activation_threshold + self.gap.threshold_shift
        self.keys, events = step_keys(self.keyboard, fingertips, self.keys, threshold)
        by_slot = pressed_by_finger(self.keyboard, fingertips, threshold)
        order = FINGER_ORDER[self.hand]
        pressed = {order[slot]: keys for slot, keys in by_slot.items()}

        key_press = key_press_reward(self.keys, self.goal_keys[t], self.key_on_coef, self.cfg.kernel_margin)
        fingering = fingering_reward(tips, self.targets[t], self.keyboard, self.hand, self.cfg.kernel_margin)
        total = (
            self.cfg.fingering_coef * fingering
            + self.cfg.key_press_coef * key_press
            - self.cfg.action_l1_coef * action_l1
        )
        reward = RewardBreakdown(key_press=key_press, fingering=fingering, action_l1=action_l1, total=total)
        self.t += 1
        return StepResult(
            observation=self.observe(),
            reward=reward,
            pressed=pressed,
            active=self.keys.active_keys(),
            events=events,
            actual=JointState(q=self.q.copy(), wrist=self.wrist.copy()),
            done=self.t >= self.num_steps,
        )

    def proprioception(self) -> np.ndarray:
        """Joint angles, then wrist y relative to the wrist pose commanded at reset."""
        return np.concatenate([self.q.ravel(), [relative_wrist(self.wrist, self._wrist_origin)[1]]])

    def observe(self) -> Observation:
        window = slice(self.t, self.t + self.cfg.lookahead)
        return Observation(
            proprioception=self.proprioception(),
            activation=self.keys.depression[self.region].copy(),
            goal_window=self._goal_table[window].copy(),
            active_fingers=self._finger_table[window].copy(),
            phase=self.t / self.num_steps if self.num_steps else 0.0,
        )


def build_envs(
    roll: PianoRoll,
    keyboard: Keyboard,
    hand_cfg: HandConfig,
    env_cfg: EnvConfig,
    gaps: Optional[Dict[Hand, GapModel]] = None,
    seed: int = 0,
    randomize: bool = False,
) -> Dict[Hand, PianoEnv]:
    """One environment per hand that has notes; the bimanual task is their union."""
    envs = {}
    for hand in Hand:
        if not roll.notes_for(hand):
            continue
        gap = (gaps or {}).get(hand)
        envs[hand] = PianoEnv(roll, hand, keyboard, hand_cfg, env_cfg, gap, seed, randomize)
    return envs


def merge_activations(per_hand: Sequence[Sequence[Iterable[int]]]) -> List[FrozenSet[int]]:
    """Union of the hands' sounding keys step by step."""
    if not per_hand:
        return []
    return [frozenset().union(*(frozenset(h[t]) for h in per_hand)) for t in range(len(per_hand[0]))]
