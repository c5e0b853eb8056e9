"""
PPO pretraining in the nominal simulator over delta-joint actions on the nine active joints.
"""
import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from pianoadapt.errors import ContractViolation, TrainingDivergedError
from pianoadapt.models.env import ACTIVE_JOINTS, Observation, PianoEnv
from pianoadapt.models.hand import clamp_joints, rest_trajectory, script_wrist
from pianoadapt.models.keyboard import Keyboard
from pianoadapt.models.metrics import score_goals
from pianoadapt.models.networks import DTYPE, DenseNet, as_tensor
from pianoadapt.models.rollout import CommandSource, rollout
from pianoadapt.schemas.env import EnvConfig
from pianoadapt.schemas.hand import FINGERS_PER_HAND, JOINTS_PER_FINGER, HandConfig, HandTrack, JointState, JointTrajectory
from pianoadapt.schemas.learn import PPOConfig
from pianoadapt.schemas.report import CurvePoint
from pianoadapt.schemas.score import Hand, PianoRoll

logger = logging.getLogger(__name__)

ACTION_DIM = FINGERS_PER_HAND * ACTIVE_JOINTS
POLICY_VERSION = 1


class GaussianPolicy(nn.Module):
    """Squashed-mean diagonal Gaussian actor with a state-independent log std, plus a value head."""

    def __init__(self, obs_dim: int, hidden_dims: List[int], init_log_std: float = -1.0, generator=None):
        super().__init__()
        self.obs_dim = obs_dim
        self.hidden_dims = list(hidden_dims)
        self.mean_net = DenseNet([obs_dim, *hidden_dims, ACTION_DIM], squash=True, generator=generator)
        self.value_net = DenseNet([obs_dim, *hidden_dims, 1], generator=generator)
        self.log_std = nn.Parameter(torch.full((ACTION_DIM,), float(init_log_std), dtype=DTYPE))

    def distribution(self, obs: torch.Tensor) -> torch.distributions.Normal:
        mean = self.mean_net(obs)
        return torch.distributions.Normal(mean, self.log_std.exp().expand_as(mean))

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.value_net(obs).squeeze(-1)

    def sample(self, obs: torch.Tensor, generator: torch.Generator) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns action, its log-probability and the state value."""
        with torch.no_grad():
            dist = self.distribution(obs)
            action = dist.mean + dist.stddev * torch.randn(dist.mean.shape, generator=generator, dtype=DTYPE)
            return action, dist.log_prob(action).sum(-1), self.value(obs)

    def evaluate(self, obs: torch.Tensor, actions: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        dist = self.distribution(obs)
        return dist.log_prob(actions).sum(-1), dist.entropy().sum(-1), self.value(obs)

    def act_deterministic(self, obs: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.mean_net(as_tensor(obs)[None])[0].numpy()


class DeltaCommander:
    """
    Turns a normalized delta action into a commanded state: active joints move by
    action_scale per unit, the last flexion joint stays fixed, the wrist follows its script.
    """

    def __init__(self, wrist_track: np.ndarray, hand_cfg: HandConfig, action_scale: float):
        self.wrist_track = wrist_track
        self.hand_cfg = hand_cfg
        self.action_scale = action_scale

    def initial(self) -> JointState:
        q = np.broadcast_to(np.asarray(self.hand_cfg.rest_pose, dtype=np.float64), (FINGERS_PER_HAND, JOINTS_PER_FINGER)).copy()
        q[:, ACTIVE_JOINTS] = self.hand_cfg.fixed_last_joint
        return JointState(q=clamp_joints(self.hand_cfg, q), wrist=self.wrist_track[0].copy())

    def command(self, previous: JointState, action: np.ndarray, t: int) -> JointState:
        q = previous.q.copy()
        delta = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0) * self.action_scale
        q[:, :ACTIVE_JOINTS] += delta.reshape(FINGERS_PER_HAND, ACTIVE_JOINTS)
        q[:, ACTIVE_JOINTS] = self.hand_cfg.fixed_last_joint
        return JointState(q=clamp_joints(self.hand_cfg, q), wrist=self.wrist_track[t + 1].copy())


class PolicySource(CommandSource):
    """Closed-loop source: each hand's policy mean drives its commander from the observation it is given."""

    def __init__(self, policies: Dict[Hand, GaussianPolicy], commanders: Dict[Hand, DeltaCommander]):
        self.policies = policies
        self.commanders = commanders
        self._previous: Dict[Hand, JointState] = {}

    def initial(self, hand: Hand) -> JointState:
        return self.commanders[hand].initial()

    def begin(self, hand: Hand, observation: Observation) -> None:
        self._previous[hand] = self.commanders[hand].initial()

    def command(self, hand: Hand, t: int, observation: Observation) -> JointState:
        action = self.policies[hand].act_deterministic(observation.as_array())
        command = self.commanders[hand].command(self._previous[hand], action, t)
        self._previous[hand] = command
        return command


def make_commanders(
    roll: PianoRoll, keyboard: Keyboard, hand_cfg: HandConfig, action_scale: float
) -> Dict[Hand, DeltaCommander]:
    wrists = script_wrist(roll, keyboard, hand_cfg)
    return {hand: DeltaCommander(wrists[hand], hand_cfg, action_scale) for hand in Hand}


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_values: np.ndarray,
    gamma: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimates over (steps, envs) arrays; a done step does not bootstrap.

    Returns:
        Advantages and value targets
    """
    steps = rewards.shape[0]
    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(steps)):
        next_values = last_values if t == steps - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * live - values[t]
        running = delta + gamma * lam * live * running
        advantages[t] = running
    return advantages, advantages + values


def normalize_advantages(advantages: torch.Tensor) -> torch.Tensor:
    return (advantages - advantages.mean()) / (advantages.std(unbiased=False) + 1e-8)


def ppo_loss(
    policy: GaussianPolicy, batch: Dict[str, torch.Tensor], cfg: PPOConfig
) -> Tuple[torch.Tensor, Dict[str, float]]:
    """Clipped surrogate plus weighted value error minus weighted entropy."""
    logp, entropy, values = policy.evaluate(batch["obs"], batch["actions"])
    ratio = (logp - batch["logp"]).exp()
    advantages = normalize_advantages(batch["advantages"])
    surrogate = torch.min(ratio * advantages, ratio.clamp(1 - cfg.clip_coef, 1 + cfg.clip_coef) * advantages)
    policy_loss = -surrogate.mean()
    value_loss = 0.5 * ((values - batch["returns"]) ** 2).mean()
    entropy_mean = entropy.mean()
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_mean
    return loss, {"policy": policy_loss.item(), "value": value_loss.item(), "entropy": entropy_mean.item()}


class EnvPool:
    """Independent nominal environments of one hand, optionally stepped on a thread pool."""

    def __init__(self, envs: List[PianoEnv], commander: DeltaCommander, seed: int, workers: int = 1):
        self.envs = envs
        self.commander = commander
        self.seed = seed
        self.executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        self._episodes = [0] * len(envs)
        self._previous: List[JointState] = [commander.initial() for _ in envs]
        self.observations = np.stack([self._reset(i) for i in range(len(envs))])

    def _reset(self, i: int) -> np.ndarray:
        seed = self.seed * 1_000_003 + self._episodes[i] * len(self.envs) + i
        self._episodes[i] += 1
        self._previous[i] = self.commander.initial()
        return self.envs[i].reset(seed=seed, initial=self._previous[i]).as_array()

    def _step_one(self, i: int, action: np.ndarray) -> Tuple[np.ndarray, float, bool]:
        env = self.envs[i]
        command = self.commander.command(self._previous[i], action, env.t)
        self._previous[i] = command
        result = env.step(command)
        if result.done:
            return self._reset(i), result.reward.total, True
        return result.observation.as_array(), result.reward.total, False

    def step(self, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        indices = range(len(self.envs))
        if self.executor is not None:
            results = list(self.executor.map(self._step_one, indices, actions))
        else:
            results = [self._step_one(i, a) for i, a in zip(indices, actions)]
        self.observations = np.stack([r[0] for r in results])
        return self.observations, np.array([r[1] for r in results]), np.array([r[2] for r in results], dtype=np.float64)

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown()


class PPOResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    policy: GaussianPolicy
    track: HandTrack = Field(..., description="Commands of the best deterministic evaluation, index 0 initial")
    best_f1: float
    curve: List[CurvePoint] = Field(default_factory=list)


def save_policy(policy: GaussianPolicy, path: Path, header: Optional[Dict[str, str]] = None, **extra) -> None:
    torch.save(
        {
            "format_version": POLICY_VERSION,
            "header": dict(header or {}),
            "obs_dim": policy.obs_dim,
            "hidden_dims": policy.hidden_dims,
            "state": policy.state_dict(),
            **extra,
        },
        path,
    )


def load_policy(path: Path) -> GaussianPolicy:
    payload = torch.load(path, weights_only=False)
    if payload.get("format_version") != POLICY_VERSION:
        raise ContractViolation(f"{path} has policy format {payload.get('format_version')}")
    policy = GaussianPolicy(payload["obs_dim"], payload["hidden_dims"])
    policy.load_state_dict(payload["state"])
    return policy


def ppo_train(
    roll: PianoRoll,
    hand: Hand,
    keyboard: Keyboard,
    hand_cfg: HandConfig,
    env_cfg: EnvConfig,
    cfg: PPOConfig,
    seed: int = 0,
    checkpoint_path: Optional[Path] = None,
) -> PPOResult:
    """
    Train one hand's policy in the nominal simulator.

    Raises:
        TrainingDivergedError: If a loss turns non-finite; the policy is checkpointed first
    """
    generator = torch.Generator().manual_seed(seed)
    rng = np.random.default_rng(seed)
    commander = make_commanders(roll, keyboard, hand_cfg, cfg.action_scale)[hand]
    envs = [
        PianoEnv(roll, hand, keyboard, hand_cfg, env_cfg, seed=seed, randomize=cfg.domain_randomization)
        for _ in range(cfg.num_envs)
    ]
    eval_env = {hand: PianoEnv(roll, hand, keyboard, hand_cfg, env_cfg, seed=seed)}
    goals = roll.goal_keys(hand)

    policy = GaussianPolicy(envs[0].observation_dim, cfg.hidden_dims, cfg.init_log_std, generator)
    optimizer = torch.optim.Adam(policy.parameters(), lr=cfg.learning_rate)
    pool = EnvPool(envs, commander, seed, cfg.workers)

    batch_size = cfg.num_steps * cfg.num_envs
    minibatch_size = max(1, batch_size // cfg.num_minibatches)
    num_updates = max(1, cfg.total_steps // batch_size)
    curve: List[CurvePoint] = []
    best = {"f1": -1.0, "track": None, "state": None}
    grad_steps = 0

    def evaluate(update: int) -> None:
        source = PolicySource({hand: policy}, {hand: commander})
        result = rollout(eval_env, source, seed=seed)
        f1 = score_goals(result.activations, goals).f1
        curve.append(
            CurvePoint(episode=update, env_steps=update * batch_size, grad_steps=grad_steps, f1_mean=f1 * 100, f1_sd=0.0)
        )
        logger.info(f"PPO {hand.value} update {update}/{num_updates}: F1 {f1 * 100:.1f}")
        if f1 > best["f1"]:
            best.update(f1=f1, track=result.commands[hand].copy(), state=copy.deepcopy(policy.state_dict()))

    try:
        for update in range(1, num_updates + 1):
            obs_buf = np.zeros((cfg.num_steps, cfg.num_envs, policy.obs_dim))
            act_buf = np.zeros((cfg.num_steps, cfg.num_envs, ACTION_DIM))
            logp_buf = np.zeros((cfg.num_steps, cfg.num_envs))
            rew_buf = np.zeros((cfg.num_steps, cfg.num_envs))
            done_buf = np.zeros((cfg.num_steps, cfg.num_envs))
            val_buf = np.zeros((cfg.num_steps, cfg.num_envs))
            for t in range(cfg.num_steps):
                obs_buf[t] = pool.observations
                actions, logp, values = policy.sample(as_tensor(pool.observations), generator)
                act_buf[t] = actions.numpy()
                logp_buf[t] = logp.numpy()
                val_buf[t] = values.numpy()
                _, rew_buf[t], done_buf[t] = pool.step(act_buf[t])
            with torch.no_grad():
                last_values = policy.value(as_tensor(pool.observations)).numpy()
            advantages, returns = compute_gae(rew_buf, val_buf, done_buf, last_values, cfg.gamma, cfg.gae_lambda)

            flat = {
                "obs": as_tensor(obs_buf.reshape(batch_size, -1)),
                "actions": as_tensor(act_buf.reshape(batch_size, -1)),
                "logp": as_tensor(logp_buf.ravel()),
                "advantages": as_tensor(advantages.ravel()),
                "returns": as_tensor(returns.ravel()),
            }
            for _ in range(cfg.update_epochs):
                order = rng.permutation(batch_size)
                for start in range(0, batch_size, minibatch_size):
                    index = torch.as_tensor(order[start:start + minibatch_size])
                    loss, _ = ppo_loss(policy, {k: v[index] for k, v in flat.items()}, cfg)
                    if not torch.isfinite(loss):
                        checkpoint = None
                        if checkpoint_path is not None:
                            save_policy(policy, checkpoint_path, {"status": "diverged"})
                            checkpoint = str(checkpoint_path)
                        raise TrainingDivergedError(
                            f"PPO loss became {loss.item()} at update {update} for the {hand.value} hand", checkpoint
                        )
                    optimizer.zero_grad()
                    loss.backward()
                    nn.utils.clip_grad_norm_(policy.parameters(), cfg.max_grad_norm)
                    optimizer.step()
                    grad_steps += 1

            if update % cfg.eval_every == 0 or update == num_updates:
                evaluate(update)
    finally:
        pool.close()

    policy.load_state_dict(best["state"])
    return PPOResult(policy=policy, track=best["track"], best_f1=best["f1"], curve=curve)


def train_sim(
    roll: PianoRoll,
    keyboard: Keyboard,
    hand_cfg: HandConfig,
    env_cfg: EnvConfig,
    cfg: PPOConfig,
    seed: int = 0,
    checkpoint_dir: Optional[Path] = None,
) -> Tuple[Dict[Hand, PPOResult], JointTrajectory]:
    """
    Train a policy per hand with notes and assemble the best evaluation commands into one
    open-loop trajectory; hands without notes keep the scripted wrist at rest.
    """
    trajectory = rest_trajectory(roll, keyboard, hand_cfg)
    results: Dict[Hand, PPOResult] = {}
    for i, hand in enumerate(Hand):
        if not roll.notes_for(hand):
            continue
        checkpoint = checkpoint_dir / f"policy_sim_{hand.value}.diverged.pt" if checkpoint_dir else None
        results[hand] = ppo_train(roll, hand, keyboard, hand_cfg, env_cfg, cfg, seed * 2 + i, checkpoint)
        trajectory = trajectory.with_track(hand, results[hand].track)
    return results, trajectory
