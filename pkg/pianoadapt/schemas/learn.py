from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class PPOConfig(BaseModel):
    """Simulation RL hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    total_steps: int = Field(200_000, ge=1, description="Environment steps per hand")
    num_envs: int = Field(8, ge=1, description="Parallel nominal environment instances")
    workers: int = Field(1, ge=1, description="Threads stepping the environment instances")
    num_steps: int = Field(32, ge=1, description="Steps collected per environment per update")
    num_minibatches: int = Field(32, ge=1)
    update_epochs: int = Field(8, ge=1)
    gamma: float = Field(0.8, gt=0, le=1)
    gae_lambda: float = Field(0.95, ge=0, le=1)
    clip_coef: float = Field(0.2, gt=0)
    value_coef: float = Field(0.5, ge=0)
    entropy_coef: float = Field(0.0, ge=0)
    learning_rate: float = Field(3e-4, gt=0)
    max_grad_norm: float = Field(0.5, gt=0)
    hidden_dims: List[int] = Field([256, 256, 256])
    init_log_std: float = Field(-1.0)
    action_scale: float = Field(0.15, gt=0, description="Joint delta (rad) per unit action")
    eval_every: int = Field(10, ge=1, description="Updates between deterministic evaluation rollouts")
    domain_randomization: bool = Field(True, description="Resample a GapModel from env.randomization on reset")


class TD3Config(BaseModel):
    """Residual RL hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    episodes: int = Field(100, ge=1)
    eval_every: int = Field(20, ge=1, description="Episodes between evaluations")
    eval_rollouts: int = Field(5, ge=1)
    num_critics: int = Field(2, ge=2)
    batch_size: int = Field(2048, ge=1)
    tau: float = Field(0.005, gt=0, le=1)
    learning_rate: float = Field(1e-3, gt=0)
    hidden_dims: List[int] = Field([256, 256, 256])
    dropout: float = Field(0.5, ge=0, lt=1, description="Critic dropout rate")
    utd_ratio: int = Field(8, ge=1, description="Critic gradient steps per update event")
    update_every: int = Field(10, ge=1, description="Environment steps between update events")
    policy_delay: int = Field(2, ge=1)
    initial_exploration: int = Field(512, ge=0, description="Environment steps with zero actor output")
    gamma: float = Field(0.8, ge=0, le=1)
    target_noise: float = Field(0.2, ge=0)
    target_noise_clip: float = Field(0.5, ge=0)
    residual_bound: float = Field(0.08, gt=0, description="Maximum residual per joint (rad)")
    action_chunk: int = Field(2, ge=1, description="Environment steps each residual action is held")
    guided_prob: float = Field(0.5, ge=0, le=1)
    noise_beta: float = Field(0.2, ge=0, lt=1, description="Correlation of consecutive exploration noise")
    noise_clip: float = Field(0.5, gt=0)
    noise_scale_init: float = Field(1.0, ge=0)
    noise_scale_final: float = Field(0.3, ge=0)
    noise_schedule_steps: int = Field(10_000, ge=1, description="Gradient steps of the linear noise schedule")
    key_on_initial: float = Field(0.7, ge=0, le=1)
    key_on_final: float = Field(0.5, ge=0, le=1)
    key_on_switch_step: int = Field(10_000, ge=0, description="Gradient step where the key-on coefficient drops")
    replay_capacity: int = Field(200_000, ge=1)
    concurrency: Literal["interleaved", "threaded"] = Field("interleaved")
    full_range: bool = Field(False, description="Widen the residual bound to the full joint range")
    seed: Optional[int] = Field(None, description="Overrides run.seed for the agent")


class Transition(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    obs: np.ndarray
    action: np.ndarray = Field(..., description="Normalized residual action in [-1, 1]")
    reward: float
    next_obs: np.ndarray
    done: bool
