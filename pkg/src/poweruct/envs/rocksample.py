"""RockSample(n, k).

A rover on an ``n x n`` grid knows where ``k`` rocks are but not which are
valuable.  Actions: 0 north, 1 east, 2 south, 3 west, 4 sample, ``5 + i``
check rock ``i``.  Checking reports the true quality with probability
``0.5 + 0.5 * 2 ** (-d / d0)`` at Euclidean distance ``d``.  Sampling a good
rock pays +10 and spoils it, a bad rock (or bare ground) costs 10, and
driving off the east edge pays +10 and ends the episode.  Bumping into the
other edges leaves the rover in place.

State vector: ``[x, y, good_rock_mask, t]``.  Observations: 0 none,
1 good, 2 bad.
"""

from __future__ import annotations

import math
import sys

import numpy as np
from numba import njit

from .base import KernelPOMDP

ENV_ID = 2
NORTH, EAST, SOUTH, WEST, SAMPLE = 0, 1, 2, 3, 4
OBS_NONE, OBS_GOOD, OBS_BAD = 0, 1, 2
_HEADER = 5  # pi = [n, k, horizon, start_x, start_y, rock_x..., rock_y...]
# pf = [d0, good_reward, bad_reward, exit_reward, p_good]


def canonical_layout(n: int, k: int, seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Fixed rock positions for an ``(n, k)`` instance, excluding the start cell."""
    rng = np.random.default_rng(7919 * n + k if seed is None else seed)
    start = 0 * n + n // 2  # cell index x * n + y
    cells = [c for c in range(n * n) if c != start]
    chosen = np.sort(rng.choice(cells, size=k, replace=False))
    return chosen // n, chosen % n


@njit(cache=True)
def init(pi, pf, rng, out):
    k = pi[1]
    out[0] = pi[3]
    out[1] = pi[4]
    mask = 0
    for i in range(k):
        if rng.random() < pf[4]:
            mask |= 1 << i
    out[2] = mask
    out[3] = 0


@njit(cache=True)
def terminal(pi, s):
    return s[0] >= pi[0] or s[3] >= pi[2]


@njit(cache=True)
def key(pi, s):
    n = pi[0]
    return ((s[3] * (n + 1) + s[0]) * n + s[1]) * (1 << pi[1]) + s[2]


@njit(cache=True)
def rock_at(pi, x, y):
    k = pi[1]
    for i in range(k):
        if pi[_HEADER + i] == x and pi[_HEADER + k + i] == y:
            return i
    return -1


@njit(cache=True)
def step(pi, pf, s, a, rng, out):
    n = pi[0]
    k = pi[1]
    x = s[0]
    y = s[1]
    mask = s[2]
    reward = 0.0
    obs = OBS_NONE
    exited = False
    if a == NORTH:
        y = min(y + 1, n - 1)
    elif a == SOUTH:
        y = max(y - 1, 0)
    elif a == WEST:
        x = max(x - 1, 0)
    elif a == EAST:
        if x == n - 1:
            x = n
            reward = pf[3]
            exited = True
        else:
            x += 1
    elif a == SAMPLE:
        i = rock_at(pi, x, y)
        if i >= 0 and (mask >> i) & 1 == 1:
            reward = pf[1]
            mask &= ~(1 << i)
        else:
            reward = pf[2]
    else:
        i = a - 5
        dx = x - pi[_HEADER + i]
        dy = y - pi[_HEADER + k + i]
        distance = math.sqrt(dx * dx + dy * dy)
        accuracy = 0.5 + 0.5 * 2.0 ** (-distance / pf[0])
        good = (mask >> i) & 1 == 1
        correct = rng.random() < accuracy
        obs = OBS_GOOD if good == correct else OBS_BAD
    out[0] = x
    out[1] = y
    out[2] = mask
    out[3] = s[3] + 1
    return reward, exited or out[3] >= pi[2], obs


@njit(cache=True)
def perturb(pi, pf, s, rng, out):
    out[:] = s
    i = rng.integers(0, pi[1])
    out[2] = s[2] ^ (1 << i)


class RockSample(KernelPOMDP):
    env_id = ENV_ID
    name = "rocksample"
    kernels = sys.modules[__name__]

    def __init__(self, n: int = 11, k: int = 11, horizon: int = 200, d0: float = 20.0,
                 good_reward: float = 10.0, bad_reward: float = -10.0, exit_reward: float = 10.0,
                 p_good: float = 0.5, rocks=None):
        if not 1 <= k <= 60:
            raise ValueError("k must lie in [1, 60]")
        rx, ry = canonical_layout(n, k) if rocks is None else (np.asarray(rocks[0]), np.asarray(rocks[1]))
        if len(rx) != k or len(ry) != k:
            raise ValueError("rock layout must have k entries")
        pi = np.concatenate([[n, k, horizon, 0, n // 2], rx, ry]).astype(np.int64)
        pf = np.array([d0, good_reward, bad_reward, exit_reward, p_good])
        super().__init__(pi, pf, n_actions=k + 5, state_width=4, horizon=horizon)
        self.n, self.k = n, k
        self.rocks = (np.asarray(rx, dtype=np.int64), np.asarray(ry, dtype=np.int64))
        rewards = (good_reward, bad_reward, exit_reward, 0.0)
        self.reward_bounds = (min(rewards), max(rewards))

    def sense_accuracy(self, x: int, y: int, rock: int) -> float:
        d = math.hypot(x - self.rocks[0][rock], y - self.rocks[1][rock])
        return 0.5 + 0.5 * 2.0 ** (-d / self.pf[0])
