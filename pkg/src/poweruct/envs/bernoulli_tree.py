"""Complete game tree with Bernoulli payoffs at the leaves.

Every internal node has ``branching`` actions; after ``depth`` moves the
episode ends with reward 1 drawn with the leaf's mean.  Used to measure the
bias of the root value estimate, since the optimal value is known exactly.

State vector: ``[node, level]`` where ``node`` indexes the nodes of a level
left to right.
"""

from __future__ import annotations

import sys

import numpy as np
from numba import njit

from .base import KernelMDP

ENV_ID = 4


@njit(cache=True)
def init(pi, pf, rng, out):
    out[0] = 0
    out[1] = 0


@njit(cache=True)
def terminal(pi, s):
    return s[1] >= pi[0]


@njit(cache=True)
def key(pi, s):
    return s[0]


@njit(cache=True)
def step(pi, pf, s, a, rng, out):
    out[0] = s[0] * pi[1] + a
    out[1] = s[1] + 1
    if out[1] < pi[0]:
        return 0.0, False, 0
    reward = 1.0 if rng.random() < pf[out[0]] else 0.0
    return reward, True, 0


@njit(cache=True)
def perturb(pi, pf, s, rng, out):
    out[:] = s


class BernoulliTree(KernelMDP):
    env_id = ENV_ID
    name = "bernoulli-tree"
    kernels = sys.modules[__name__]

    def __init__(self, leaf_means, depth: int = 2, branching: int = 2):
        means = np.asarray(leaf_means, dtype=np.float64).ravel()
        if depth < 1 or branching < 1:
            raise ValueError("depth and branching must be >= 1")
        if means.size != branching**depth:
            raise ValueError(f"expected {branching**depth} leaf means, got {means.size}")
        if np.any((means < 0) | (means > 1)):
            raise ValueError("leaf means must lie in [0, 1]")
        super().__init__(np.array([depth, branching], dtype=np.int64), means,
                         n_actions=branching, state_width=2, horizon=depth)
        self.depth, self.branching = depth, branching
        self.leaf_means = means

    @property
    def optimal_value(self) -> float:
        return float(self.leaf_means.max())
