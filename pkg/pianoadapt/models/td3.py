"""
Residual TD3 over an open-loop base trajectory, with guided and correlated exploration noise.
"""
import copy
import logging
import queue
import threading
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from pianoadapt.errors import ContractViolation, TrainingDivergedError
from pianoadapt.models.env import ACTIVE_JOINTS, Observation, PianoEnv, make_real_reward
from pianoadapt.models.metrics import eval_protocol
from pianoadapt.models.networks import DTYPE, DenseNet, as_tensor, polyak
from pianoadapt.models.noise import CorrelatedNoise, guided_noise, linear_schedule
from pianoadapt.models.refine import step_errors
from pianoadapt.models.replay import ReplayBuffer
from pianoadapt.models.rollout import CommandSource
from pianoadapt.schemas.hand import FINGERS_PER_HAND, HandConfig, JointState, JointTrajectory
from pianoadapt.schemas.learn import TD3Config, Transition
from pianoadapt.schemas.refine import PressLog, PressRecord
from pianoadapt.schemas.report import CurvePoint
from pianoadapt.schemas.score import Hand, PianoRoll

logger = logging.getLogger(__name__)

RESIDUAL_DIM = FINGERS_PER_HAND * ACTIVE_JOINTS
LATERAL_ACTION_INDICES = tuple(slot * ACTIVE_JOINTS for slot in range(FINGERS_PER_HAND))
CHECKPOINT_VERSION = 1


def full_range_bound(hand_cfg: HandConfig) -> np.ndarray:
    """Per-dimension bound reaching every joint limit from the rest pose."""
    limits = hand_cfg.limits_array()[:ACTIVE_JOINTS]
    rest = np.asarray(hand_cfg.rest_pose[:ACTIVE_JOINTS])
    per_joint = np.maximum(rest - limits[:, 0], limits[:, 1] - rest)
    return np.tile(per_joint, FINGERS_PER_HAND)


class ResidualAgent:
    """Actor, twin critics, their targets, replay and the exploration noise state."""

    def __init__(self, obs_dim: int, cfg: TD3Config, seed: int = 0, bound=None):
        self.obs_dim = obs_dim
        self.act_dim = RESIDUAL_DIM
        self.cfg = cfg
        self.seed = seed
        self.generator = torch.Generator().manual_seed(seed)
        hidden = list(cfg.hidden_dims)
        self.actor = DenseNet([obs_dim, *hidden, self.act_dim], squash=True, generator=self.generator, zero_last=True)
        self.critics = nn.ModuleList(
            DenseNet([obs_dim + self.act_dim, *hidden, 1], dropout=cfg.dropout, generator=self.generator)
            for _ in range(cfg.num_critics)
        )
        self.actor_target = copy.deepcopy(self.actor).eval()
        self.critic_targets = copy.deepcopy(self.critics).eval()
        self.actor_optimizer = torch.optim.Adam(self.actor.parameters(), lr=cfg.learning_rate)
        self.critic_optimizer = torch.optim.Adam(self.critics.parameters(), lr=cfg.learning_rate)
        self.buffer = ReplayBuffer(obs_dim, self.act_dim, cfg.replay_capacity, np.random.default_rng([seed, 1]))
        self.noise = CorrelatedNoise(self.act_dim, cfg.noise_beta, np.random.default_rng([seed, 2]))
        self.guide_rng = np.random.default_rng([seed, 3])
        self.bound = np.broadcast_to(
            np.asarray(cfg.residual_bound if bound is None else bound, dtype=np.float64), (self.act_dim,)
        ).copy()
        self.grad_steps = 0
        self.env_steps = 0
        self._held: Optional[np.ndarray] = None

    @property
    def noise_scale(self) -> float:
        return self.noise_scale_at(self.grad_steps)

    def noise_scale_at(self, grad_steps: int) -> float:
        cfg = self.cfg
        return linear_schedule(cfg.noise_scale_init, cfg.noise_scale_final, cfg.noise_schedule_steps, grad_steps)

    def begin_episode(self) -> None:
        self.noise.reset()
        self._held = None

    def policy_action(self, obs: np.ndarray, actor: Optional[DenseNet] = None) -> np.ndarray:
        """Deterministic actor output; zero during the initial exploration steps."""
        if self.env_steps < self.cfg.initial_exploration:
            return np.zeros(self.act_dim)
        with torch.no_grad():
            return (actor or self.actor)(as_tensor(obs)[None])[0].numpy()

    def act(
        self,
        obs: np.ndarray,
        explore: bool,
        lateral_signs: Optional[Mapping[int, float]] = None,
        actor: Optional[DenseNet] = None,
        schedule_step: Optional[int] = None,
    ) -> np.ndarray:
        mean = self.policy_action(obs, actor)
        if not explore:
            return mean
        eps = guided_noise(self.noise.sample(), lateral_signs, self.cfg.guided_prob, self.guide_rng)
        scale = self.noise_scale if schedule_step is None else self.noise_scale_at(schedule_step)
        clipped = np.clip(scale * eps, -self.cfg.noise_clip, self.cfg.noise_clip)
        return np.clip(mean + clipped, -1.0, 1.0)

    def state_dict(self) -> Dict:
        return {
            "actor": self.actor.state_dict(),
            "critics": self.critics.state_dict(),
            "actor_target": self.actor_target.state_dict(),
            "critic_targets": self.critic_targets.state_dict(),
            "actor_optimizer": self.actor_optimizer.state_dict(),
            "critic_optimizer": self.critic_optimizer.state_dict(),
            "grad_steps": self.grad_steps,
            "env_steps": self.env_steps,
            "noise_prev": self.noise.prev.copy(),
            "rng": {
                "replay": self.buffer.rng.bit_generator.state,
                "noise": self.noise.rng.bit_generator.state,
                "guide": self.guide_rng.bit_generator.state,
                "torch": self.generator.get_state(),
            },
        }

    def load_state_dict(self, state: Dict) -> None:
        self.actor.load_state_dict(state["actor"])
        self.critics.load_state_dict(state["critics"])
        self.actor_target.load_state_dict(state["actor_target"])
        self.critic_targets.load_state_dict(state["critic_targets"])
        self.actor_optimizer.load_state_dict(state["actor_optimizer"])
        self.critic_optimizer.load_state_dict(state["critic_optimizer"])
        self.grad_steps = state["grad_steps"]
        self.env_steps = state["env_steps"]
        self.noise.prev = np.asarray(state["noise_prev"]).copy()
        self.buffer.rng.bit_generator.state = state["rng"]["replay"]
        self.noise.rng.bit_generator.state = state["rng"]["noise"]
        self.guide_rng.bit_generator.state = state["rng"]["guide"]
        self.generator.set_state(state["rng"]["torch"])


def apply_residual(base: JointState, residual: np.ndarray) -> JointState:
    q = base.q.copy()
    q[:, :ACTIVE_JOINTS] += residual.reshape(FINGERS_PER_HAND, ACTIVE_JOINTS)
    return JointState(q=q, wrist=base.wrist.copy())


def residual_act(
    agent: ResidualAgent,
    obs: np.ndarray,
    base: JointState,
    explore: bool,
    t: int,
    lateral_signs: Optional[Mapping[int, float]] = None,
    actor: Optional[DenseNet] = None,
    schedule_step: Optional[int] = None,
) -> Tuple[JointState, np.ndarray]:
    """
    Command = base state + bound * action on the nine active joints, each action held
    for action_chunk consecutive steps.

    Returns:
        The commanded state and the normalized action that produced it
    """
    if agent._held is None or t % agent.cfg.action_chunk == 0:
        agent._held = agent.act(obs, explore, lateral_signs, actor, schedule_step)
    action = agent._held
    return apply_residual(base, agent.bound * action), action


def _critic_input(obs: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
    return torch.cat([obs, action], dim=-1)


def actor_objective(agent: ResidualAgent, obs: torch.Tensor) -> torch.Tensor:
    """Mean first-critic value of the actor's action."""
    return agent.critics[0](_critic_input(obs, agent.actor(obs)), agent.generator).mean()


def td3_update(agent: ResidualAgent, batch_size: Optional[int] = None) -> Optional[Dict[str, float]]:
    """
    One update event: utd_ratio critic steps, a delayed actor step and Polyak mixing of
    every target each policy_delay critic steps.

    Returns:
        Mean losses, or None when the buffer holds fewer transitions than a batch
    """
    cfg = agent.cfg
    batch_size = batch_size or cfg.batch_size
    if len(agent.buffer) < batch_size:
        logger.warning(f"Skipping update: {len(agent.buffer)} transitions buffered, batch needs {batch_size}")
        return None

    critic_losses: List[float] = []
    actor_losses: List[float] = []
    for _ in range(cfg.utd_ratio):
        batch = agent.buffer.sample(batch_size)
        with torch.no_grad():
            smoothing = torch.randn(batch["action"].shape, generator=agent.generator, dtype=DTYPE) * cfg.target_noise
            smoothing = smoothing.clamp(-cfg.target_noise_clip, cfg.target_noise_clip)
            next_action = (agent.actor_target(batch["next_obs"]) + smoothing).clamp(-1.0, 1.0)
            next_input = _critic_input(batch["next_obs"], next_action)
            next_q = torch.stack([c(next_input) for c in agent.critic_targets]).min(dim=0).values.squeeze(-1)
            target = batch["reward"] + cfg.gamma * (1.0 - batch["done"]) * next_q

        current_input = _critic_input(batch["obs"], batch["action"])
        critic_loss = sum(F.mse_loss(c(current_input, agent.generator).squeeze(-1), target) for c in agent.critics)
        if not torch.isfinite(critic_loss):
            raise TrainingDivergedError(f"critic loss became {critic_loss.item()} at gradient step {agent.grad_steps}")
        agent.critic_optimizer.zero_grad()
        critic_loss.backward()
        agent.critic_optimizer.step()
        agent.grad_steps += 1
        critic_losses.append(critic_loss.item())

        if agent.grad_steps % cfg.policy_delay == 0:
            actor_loss = -actor_objective(agent, batch["obs"])
            agent.actor_optimizer.zero_grad()
            actor_loss.backward()
            agent.actor_optimizer.step()
            actor_losses.append(actor_loss.item())
            polyak(agent.actor_target, agent.actor, cfg.tau)
            polyak(agent.critic_targets, agent.critics, cfg.tau)

    return {
        "critic": float(np.mean(critic_losses)),
        "actor": float(np.mean(actor_losses)) if actor_losses else float("nan"),
    }


class ResidualSource(CommandSource):
    """Base trajectory plus each hand's residual policy; hands without an agent replay the base."""

    def __init__(self, agents: Dict[Hand, ResidualAgent], base: JointTrajectory, explore: bool = False):
        self.agents = agents
        self.base = base
        self.explore = explore

    def initial(self, hand: Hand) -> JointState:
        return JointState.from_track(self.base.track(hand), 0)

    def begin(self, hand: Hand, observation: Observation) -> None:
        if hand in self.agents:
            self.agents[hand]._held = None

    def command(self, hand: Hand, t: int, observation: Observation) -> JointState:
        base = JointState.from_track(self.base.track(hand), t + 1)
        agent = self.agents.get(hand)
        if agent is None:
            return base
        command, _ = residual_act(agent, observation.as_array(), base, self.explore, t)
        return command


def guidance_signs(hand: Hand, record: PressRecord) -> Dict[int, float]:
    """Sign of each finger's lateral error at one step, keyed by lateral action index."""
    errors = step_errors(PressLog(hand=hand, records=[record]), 1.0)[0]
    return {LATERAL_ACTION_INDICES[slot]: float(np.sign(e)) for slot, e in enumerate(errors) if e != 0}


class SnapshotBoard:
    """Versioned actor weights and the learner gradient step they were taken at, read together."""

    def __init__(self, state: Dict[str, torch.Tensor], grad_steps: int = 0):
        self._lock = threading.Lock()
        self._version = 0
        self._state = {k: v.clone() for k, v in state.items()}
        self._grad_steps = grad_steps

    def publish(self, state: Dict[str, torch.Tensor], grad_steps: int) -> None:
        copied = {k: v.detach().clone() for k, v in state.items()}
        with self._lock:
            self._state = copied
            self._grad_steps = grad_steps
            self._version += 1

    def latest(self) -> Tuple[int, Dict[str, torch.Tensor], int]:
        with self._lock:
            return self._version, self._state, self._grad_steps


class ThreadedLearner:
    """Consumes transitions from a queue on its own thread and publishes actor snapshots."""

    def __init__(self, agent: ResidualAgent):
        self.agent = agent
        self.board = SnapshotBoard(agent.actor.state_dict(), agent.grad_steps)
        self.transitions: "queue.Queue[Optional[Transition]]" = queue.Queue()
        self.error: Optional[BaseException] = None
        self._received = 0
        self._thread = threading.Thread(target=self._run, name="residual-learner", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while True:
            item = self.transitions.get()
            try:
                if item is None:
                    return
                if self.error is not None:
                    continue
                self.agent.buffer.add(item)
                self._received += 1
                if self._received % self.agent.cfg.update_every == 0:
                    if td3_update(self.agent) is not None:
                        self.board.publish(self.agent.actor.state_dict(), self.agent.grad_steps)
            except BaseException as e:  # surfaced to the actor thread by drain()
                self.error = e
            finally:
                self.transitions.task_done()

    def submit(self, transition: Transition) -> None:
        self.transitions.put(transition)

    def drain(self) -> None:
        self.transitions.join()
        if self.error is not None:
            raise self.error

    def close(self) -> None:
        self.transitions.put(None)
        self._thread.join()


class ResidualResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    agents: Dict[Hand, ResidualAgent]
    curve: List[CurvePoint] = Field(default_factory=list)
    best_f1: float = Field(..., description="Best evaluation mean, F1 x 100")


def _run_episode(
    hand: Hand,
    env: PianoEnv,
    agent: ResidualAgent,
    base: JointTrajectory,
    seed: int,
    learner: Optional[ThreadedLearner],
    behavior: Optional[DenseNet],
    version: List[int],
) -> None:
    track = base.track(hand)
    observation = env.reset(seed=seed, initial=JointState.from_track(track, 0)).as_array()
    agent.begin_episode()
    signs: Dict[int, float] = {}
    for t in range(env.num_steps):
        if learner is not None:
            latest, state, schedule_step = learner.board.latest()
            if latest > version[0]:
                behavior.load_state_dict(state)
                version[0] = latest
        else:
            schedule_step = agent.grad_steps
        base_command = JointState.from_track(track, t + 1)
        command, action = residual_act(agent, observation, base_command, True, t, signs, behavior, schedule_step)
        step = env.step(command)
        reward = make_real_reward(env.keys, env.goal_keys[t], schedule_step, agent.cfg)
        next_observation = step.observation.as_array()
        transition = Transition(
            obs=observation, action=action, reward=reward, next_obs=next_observation, done=step.done
        )
        agent.env_steps += 1
        if learner is not None:
            learner.submit(transition)
        else:
            agent.buffer.add(transition)
            if agent.env_steps % agent.cfg.update_every == 0:
                td3_update(agent)
        record = PressRecord(step=t, targets=env.targets[t], pressed=step.pressed, active=step.active)
        signs = guidance_signs(hand, record)
        observation = next_observation


def train_residual(
    envs: Dict[Hand, PianoEnv],
    base: JointTrajectory,
    roll: PianoRoll,
    cfg: TD3Config,
    hand_cfg: HandConfig,
    seed: int = 0,
    full_range: Optional[bool] = None,
) -> ResidualResult:
    """
    Train one residual agent per hand on the pseudo-real envs.

    Noise-free evaluations run before training and every eval_every episodes; the agents
    come back with the weights of the best evaluation.
    """
    if base.num_steps != roll.num_steps:
        raise ContractViolation(f"base trajectory has {base.num_steps} steps, song has {roll.num_steps}")
    full_range = cfg.full_range if full_range is None else full_range
    bound = full_range_bound(hand_cfg) if full_range else None
    agents = {
        hand: ResidualAgent(env.observation_dim, cfg, seed=seed * 2 + i, bound=bound)
        for i, (hand, env) in enumerate(envs.items())
    }
    learners: Dict[Hand, ThreadedLearner] = {}
    behaviors: Dict[Hand, DenseNet] = {}
    if cfg.concurrency == "threaded":
        for hand, agent in agents.items():
            learners[hand] = ThreadedLearner(agent)
            behaviors[hand] = copy.deepcopy(agent.actor)
    versions = {hand: [0] for hand in agents}

    curve: List[CurvePoint] = []
    best_f1 = -np.inf
    best_state: Dict[Hand, Tuple[Dict, int]] = {}

    def evaluate(episode: int) -> None:
        nonlocal best_f1
        for learner in learners.values():
            learner.drain()
        summary = eval_protocol(envs, ResidualSource(agents, base), roll, cfg.eval_rollouts, base_seed=seed)
        point = CurvePoint(
            episode=episode,
            env_steps=sum(a.env_steps for a in agents.values()),
            grad_steps=sum(a.grad_steps for a in agents.values()),
            f1_mean=summary.mean,
            f1_sd=summary.sd,
        )
        curve.append(point)
        logger.info(f"Residual episode {episode}: F1 {summary.mean:.1f} +- {summary.sd:.1f}")
        if summary.mean > best_f1:
            best_f1 = summary.mean
            for hand, agent in agents.items():
                best_state[hand] = (copy.deepcopy(agent.actor.state_dict()), agent.env_steps)

    try:
        evaluate(0)
        for episode in range(1, cfg.episodes + 1):
            for hand, env in envs.items():
                _run_episode(
                    hand,
                    env,
                    agents[hand],
                    base,
                    seed * 100_000 + episode,
                    learners.get(hand),
                    behaviors.get(hand),
                    versions[hand],
                )
            if episode % cfg.eval_every == 0 or episode == cfg.episodes:
                evaluate(episode)
    finally:
        for learner in learners.values():
            learner.close()

    for hand, (weights, env_steps) in best_state.items():
        agents[hand].actor.load_state_dict(weights)
        agents[hand].env_steps = env_steps
    return ResidualResult(agents=agents, curve=curve, best_f1=float(best_f1))


def save_checkpoint(agent: ResidualAgent, path: Path, header: Optional[Dict[str, str]] = None) -> None:
    torch.save(
        {
            "format_version": CHECKPOINT_VERSION,
            "header": dict(header or {}),
            "obs_dim": agent.obs_dim,
            "seed": agent.seed,
            "bound": agent.bound.copy(),
            "config": agent.cfg.model_dump(),
            "state": agent.state_dict(),
        },
        path,
    )


def load_checkpoint(path: Path) -> ResidualAgent:
    payload = torch.load(path, weights_only=False)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ContractViolation(f"{path} has checkpoint format {payload.get('format_version')}")
    agent = ResidualAgent(payload["obs_dim"], TD3Config(**payload["config"]), payload["seed"], payload["bound"])
    agent.load_state_dict(payload["state"])
    return agent
