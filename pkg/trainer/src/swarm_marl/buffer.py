"""Uniform-sampling ring replay buffer over flat numpy storage.

Observations are stored as float16 to keep hundreds of thousands of
image stacks in memory; everything else stays float32.
"""

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity, n_agents, h, w, seed=0):
        self.capacity = int(capacity)
        self.n_agents = n_agents
        shape = (self.capacity, n_agents, 3, h, w)
        self.obs = np.zeros(shape, dtype=np.float16)
        self.next_obs = np.zeros(shape, dtype=np.float16)
        self.vel = np.zeros((self.capacity, n_agents, 2), dtype=np.float32)
        self.next_vel = np.zeros((self.capacity, n_agents, 2), dtype=np.float32)
        self.actions = np.zeros((self.capacity, n_agents, 2), dtype=np.float32)
        self.rewards = np.zeros(self.capacity, dtype=np.float32)
        self.dones = np.zeros(self.capacity, dtype=np.float32)
        self.rng = np.random.default_rng(seed)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, obs, vel, actions, reward, next_obs, next_vel, done):
        i = self._next
        self.obs[i] = obs
        self.vel[i] = vel
        self.actions[i] = actions
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.next_vel[i] = next_vel
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size):
        idx = self.rng.integers(0, self._size, size=batch_size)
        return {
            "obs": self.obs[idx].astype(np.float32),
            "vel": self.vel[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx].astype(np.float32),
            "next_vel": self.next_vel[idx],
            "dones": self.dones[idx],
        }
