"""Slippery FrozenLake on the standard 8x8 map.

The agent moves in the intended direction a third of the time and in each of
the two perpendicular directions otherwise.  Reaching the goal pays 1; holes
and the step limit end the episode with nothing.

State vector: ``[cell, t]``.  Actions: 0 left, 1 down, 2 right, 3 up.
"""

from __future__ import annotations

import sys

import numpy as np
from numba import njit

from .base import KernelMDP, load_grid

ENV_ID = 0
LEFT, DOWN, RIGHT, UP = 0, 1, 2, 3
FROZEN, HOLE, GOAL = 0, 1, 2
_HEADER = 4  # pi = [nrow, ncol, horizon, start, codes...]


def make_params(rows: list[str] | None = None, horizon: int = 200):
    rows = rows or load_grid("frozenlake_8x8.txt")
    nrow, ncol = len(rows), len(rows[0])
    codes, start = [], -1
    for i, ch in enumerate("".join(rows)):
        if ch == "S":
            start = i
        codes.append({"S": FROZEN, "F": FROZEN, "H": HOLE, "G": GOAL}[ch])
    if start < 0:
        raise ValueError("map has no start cell")
    pi = np.array([nrow, ncol, horizon, start] + codes, dtype=np.int64)
    return pi, np.zeros(1)


@njit(cache=True)
def init(pi, pf, rng, out):
    out[0] = pi[3]
    out[1] = 0


@njit(cache=True)
def terminal(pi, s):
    return pi[_HEADER + s[0]] != FROZEN or s[1] >= pi[2]


@njit(cache=True)
def key(pi, s):
    return s[1] * pi[0] * pi[1] + s[0]


@njit(cache=True)
def step(pi, pf, s, a, rng, out):
    ncol = pi[1]
    direction = (a + 3 + int(rng.random() * 3)) % 4
    row = s[0] // ncol
    col = s[0] % ncol
    if direction == LEFT:
        col = max(col - 1, 0)
    elif direction == DOWN:
        row = min(row + 1, pi[0] - 1)
    elif direction == RIGHT:
        col = min(col + 1, ncol - 1)
    else:
        row = max(row - 1, 0)
    cell = row * ncol + col
    out[0] = cell
    out[1] = s[1] + 1
    code = pi[_HEADER + cell]
    reward = 1.0 if code == GOAL else 0.0
    return reward, code != FROZEN or out[1] >= pi[2], 0


@njit(cache=True)
def perturb(pi, pf, s, rng, out):
    out[:] = s


class FrozenLake(KernelMDP):
    env_id = ENV_ID
    name = "frozenlake"
    kernels = sys.modules[__name__]

    def __init__(self, rows: list[str] | None = None, horizon: int = 200):
        pi, pf = make_params(rows, horizon)
        super().__init__(pi, pf, n_actions=4, state_width=2, horizon=horizon)
        self.nrow, self.ncol = int(pi[0]), int(pi[1])

    def cell_code(self, cell: int) -> int:
        return int(self.pi[_HEADER + cell])
