import numpy as np
import gymnasium as gym
from gymnasium import spaces


class KeyLockEnv(gym.Env):
    """3x3 grid: pick up the key, then open the lock."""

    MOVES = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}

    def __init__(self, size=3, key=(2, 0), lock=(2, 2), start=(0, 0), max_steps=20):
        super().__init__()
        self.size = size
        self.key = key
        self.lock = lock
        self.start = start
        self.max_steps = max_steps
        self.observation_space = spaces.Dict(
            {
                "x": spaces.Discrete(size),
                "y": spaces.Discrete(size),
                "has_key": spaces.Discrete(2),
            }
        )
        self.action_space = spaces.Discrete(4)

    def _obs(self):
        return {"x": int(self.pos[0]), "y": int(self.pos[1]), "has_key": int(self.has_key)}

    def reset(self, seed=None, options=None):
        super().reset(seed=seed)
        self.pos = list(self.start)
        self.has_key = False
        self.t = 0
        return self._obs(), {}

    def step(self, action):
        dx, dy = self.MOVES[int(action)]
        self.pos[0] = min(max(self.pos[0] + dx, 0), self.size - 1)
        self.pos[1] = min(max(self.pos[1] + dy, 0), self.size - 1)
        self.t += 1
        reward = -0.01
        if tuple(self.pos) == self.key:
            self.has_key = True
        terminated = self.has_key and tuple(self.pos) == self.lock
        if terminated:
            reward = 1.0
        truncated = self.t >= self.max_steps and not terminated
        return self._obs(), reward, bool(terminated), bool(truncated), {}
