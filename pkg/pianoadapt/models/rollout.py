"""
One rollout loop for every way of driving the environments.
A source turns observations into commanded joint states; a companion nominal env may supply proprioception.
"""
import logging
from typing import Dict, FrozenSet, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pianoadapt.models.env import ACTIVE_JOINTS, Observation, PianoEnv, StepResult, merge_activations
from pianoadapt.schemas.env import RewardBreakdown
from pianoadapt.schemas.hand import HandTrack, JointState, JointTrajectory
from pianoadapt.schemas.refine import PressLog, PressRecord
from pianoadapt.schemas.score import Hand

logger = logging.getLogger(__name__)

LOG_COLUMNS = "step hand commanded actual pressed goal reward(key_press,fingering,action_l1,total)"


class CommandSource:
    """Base class: produce the commanded state for step t of one hand."""

    def initial(self, hand: Hand) -> Optional[JointState]:
        return None

    def begin(self, hand: Hand, observation: Observation) -> None:
        pass

    def command(self, hand: Hand, t: int, observation: Observation) -> JointState:
        raise NotImplementedError


class OpenLoopSource(CommandSource):
    """Replays a fixed trajectory and ignores observations."""

    def __init__(self, trajectory: JointTrajectory):
        self.trajectory = trajectory

    def initial(self, hand: Hand) -> JointState:
        return JointState.from_track(self.trajectory.track(hand), 0)

    def command(self, hand: Hand, t: int, observation: Observation) -> JointState:
        return JointState.from_track(self.trajectory.track(hand), t + 1)


class RolloutResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    activations: List[FrozenSet[int]] = Field(default_factory=list, description="Sounding keys per step, both hands")
    press_logs: Dict[Hand, PressLog] = Field(default_factory=dict)
    rewards: Dict[Hand, List[RewardBreakdown]] = Field(default_factory=dict)
    commands: Dict[Hand, HandTrack] = Field(default_factory=dict, description="Executed commands, index 0 initial")
    lines: List[str] = Field(default_factory=list, description="Rollout log rows")

    def mean_reward(self, hand: Hand) -> float:
        rewards = self.rewards.get(hand, [])
        return float(np.mean([r.total for r in rewards])) if rewards else 0.0


def _fmt(values: np.ndarray) -> str:
    return ",".join(f"{v:.6f}" for v in values)


def _log_line(t: int, hand: Hand, command: JointState, result: StepResult, goal: FrozenSet[int]) -> str:
    pressed = ";".join(f"{f.value}:{','.join(map(str, keys))}" for f, keys in result.pressed.items())
    r = result.reward
    return (
        f"{t} {hand.value} {_fmt(command.q[:, :ACTIVE_JOINTS].ravel())} {_fmt(result.actual.q[:, :ACTIVE_JOINTS].ravel())} "
        f"{pressed or '-'} {','.join(map(str, sorted(goal))) or '-'} "
        f"{r.key_press:.6f},{r.fingering:.6f},{r.action_l1:.6f},{r.total:.6f}"
    )


def rollout(
    envs: Dict[Hand, PianoEnv],
    source: CommandSource,
    seed: int = 0,
    companions: Optional[Dict[Hand, PianoEnv]] = None,
) -> RolloutResult:
    """
    Run every hand through its whole part.

    Args:
        envs: Environment per hand, nominal or gap-injected
        source: Command producer
        seed: Noise seed for every environment
        companions: Nominal environments stepped in lockstep whose proprioception replaces the observed one

    Returns:
        Merged activations, per-hand press logs, rewards and executed commands
    """
    result = RolloutResult()
    per_hand_active: List[List[List[int]]] = []
    for hand, env in envs.items():
        initial = source.initial(hand)
        observation = env.reset(seed=seed, initial=initial)
        companion = (companions or {}).get(hand)
        if companion is not None:
            companion.reset(seed=seed, initial=initial)
            observation = observation.with_proprioception(companion.proprioception())
        source.begin(hand, observation)

        log = PressLog(hand=hand)
        active: List[List[int]] = []
        rewards: List[RewardBreakdown] = []
        q = [env.commanded.q.copy()]
        wrist = [env.commanded.wrist.copy()]
        for t in range(env.num_steps):
            command = source.command(hand, t, observation)
            step = env.step(command)
            observation = step.observation
            if companion is not None:
                companion.step(command)
                observation = observation.with_proprioception(companion.proprioception())
            log.records.append(
                PressRecord(step=t, targets=env.targets[t], pressed=step.pressed, active=step.active)
            )
            active.append(step.active)
            rewards.append(step.reward)
            q.append(command.q.copy())
            wrist.append(command.wrist.copy())
            result.lines.append(_log_line(t, hand, command, step, env.goal_keys[t]))

        result.press_logs[hand] = log
        result.rewards[hand] = rewards
        result.commands[hand] = HandTrack(q=np.stack(q), wrist=np.stack(wrist))
        per_hand_active.append(active)

    result.activations = merge_activations(per_hand_active)
    return result
