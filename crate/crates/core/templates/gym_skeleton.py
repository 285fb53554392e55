import gymnasium as gym
import numpy as np
from gymnasium import spaces


class CustomEnv(gym.Env):
    metadata = {"render_modes": []}

    def __init__(self):
        super().__init__()
        self.observation_space = ...
        self.action_space = ...

    def reset(self, seed=None, options=None):
        super().reset(seed=seed)
        observation = ...
        info = {}
        return observation, info

    def step(self, action):
        observation = ...
        reward = 0.0
        terminated = False
        truncated = False
        info = {}
        return observation, reward, terminated, truncated, info
