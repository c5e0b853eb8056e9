"""
Uniform replay buffer over transitions.
"""
import threading
from typing import Dict

import numpy as np
import torch

from pianoadapt.models.networks import DTYPE
from pianoadapt.schemas.learn import Transition


class ReplayBuffer:
    """Ring buffer; the producer and the learner may live on different threads."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.ptr = 0
        self.size = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self.size

    def add(self, transition: Transition) -> None:
        with self._lock:
            i = self.ptr
            self.obs[i] = transition.obs
            self.actions[i] = transition.action
            self.rewards[i] = transition.reward
            self.next_obs[i] = transition.next_obs
            self.dones[i] = float(transition.done)
            self.ptr = (self.ptr + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        return self.rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int) -> Dict[str, torch.Tensor]:
        with self._lock:
            idx = self.sample_indices(batch_size)
            batch = dict(
                obs=self.obs[idx],
                action=self.actions[idx],
                reward=self.rewards[idx],
                next_obs=self.next_obs[idx],
                done=self.dones[idx],
            )
        return {k: torch.as_tensor(v, dtype=DTYPE) for k, v in batch.items()}
