"""PocMan: partially observable Pac-Man on a 17x19 maze.

PocMan sees only a 10-bit local percept:

    bits 0-3  a ghost is in line of sight north/east/south/west
    bits 4-7  a wall is adjacent north/east/south/west
    bit  8    food within ``smell_radius`` (Manhattan)
    bit  9    the power pill is active

Rewards: -1 per step, +10 per food pellet, +25 per ghost eaten while powered,
-100 for being caught (terminal).  A power pill lets PocMan eat ghosts for 15
steps.  Ghosts wander randomly for the first ``ghost_random_steps`` steps and
then drift towards corridors holding more food; a ghost within
``chase_radius`` of PocMan chases him (or flees while he is powered) with
probability ``chase_prob``.  Food is placed in each pellet cell with
probability ``food_prob`` at the start of an episode and is unknown to the
agent.

State vector: ``[pac, timer, t, food_left, dead, ghost x4, ghost_dir x4,
food flags...]`` with cells indexed ``row * ncol + col``.
"""

from __future__ import annotations

import sys

import numpy as np
from numba import njit

from .base import KernelPOMDP, load_grid

ENV_ID = 3
NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
WALL, PELLET_CELL, OPEN, PILL_CELL = 0, 1, 2, 3
MAX_GHOSTS = 4

PAC, TIMER, T, FOOD_LEFT, DEAD, GHOST, GDIR, FOOD = 0, 1, 2, 3, 4, 5, 9, 13
# pi = [nrow, ncol, horizon, n_ghosts, pac_start, power_steps, ghost_random_steps,
#       chase_radius, smell_radius, ghost_start x4, grid codes...]
_GSTART, _GRID = 9, 13
# pf = [food_prob, chase_prob, food_seek_prob, step, food, ghost, death]
_FOOD_PROB, _CHASE, _SEEK, _R_STEP, _R_FOOD, _R_GHOST, _R_DEATH = range(7)


def make_params(rows=None, horizon=1000, n_ghosts=4, power_steps=15, ghost_random_steps=10,
                chase_radius=4, smell_radius=2, food_prob=0.5, chase_prob=0.75, food_seek_prob=0.5,
                rewards=(-1.0, 10.0, 25.0, -100.0)):
    rows = rows or load_grid("pocman_17x19.txt")
    nrow, ncol = len(rows), len(rows[0])
    codes, ghosts, pac = [], [], -1
    for i, ch in enumerate("".join(rows)):
        if ch == "#":
            codes.append(WALL)
        elif ch == ".":
            codes.append(PELLET_CELL)
        elif ch == "o":
            codes.append(PILL_CELL)
        else:
            codes.append(OPEN)
            if ch == "P":
                pac = i
            elif ch == "G":
                ghosts.append(i)
    if pac < 0:
        raise ValueError("maze has no PocMan start")
    if not 1 <= n_ghosts <= min(MAX_GHOSTS, len(ghosts)):
        raise ValueError("not enough ghost start cells")
    ghost_start = ghosts[:n_ghosts] + [-1] * (MAX_GHOSTS - n_ghosts)
    pi = np.array([nrow, ncol, horizon, n_ghosts, pac, power_steps, ghost_random_steps,
                   chase_radius, smell_radius] + ghost_start + codes, dtype=np.int64)
    pf = np.array([food_prob, chase_prob, food_seek_prob, *rewards], dtype=np.float64)
    return pi, pf


@njit(cache=True)
def neighbour(pi, cell, d):
    nrow = pi[0]
    ncol = pi[1]
    row = cell // ncol
    col = cell % ncol
    if d == NORTH:
        row -= 1
    elif d == EAST:
        col += 1
    elif d == SOUTH:
        row += 1
    else:
        col -= 1
    if row < 0 or row >= nrow or col < 0 or col >= ncol:
        return -1
    nxt = row * ncol + col
    if pi[_GRID + nxt] == WALL:
        return -1
    return nxt


@njit(cache=True)
def manhattan(pi, a, b):
    ncol = pi[1]
    return abs(a // ncol - b // ncol) + abs(a % ncol - b % ncol)


@njit(cache=True)
def init(pi, pf, rng, out):
    ncells = pi[0] * pi[1]
    out[:] = 0
    out[PAC] = pi[4]
    food = 0
    for c in range(ncells):
        code = pi[_GRID + c]
        if code == PELLET_CELL:
            if rng.random() < pf[_FOOD_PROB]:
                out[FOOD + c] = 1
                food += 1
        elif code == PILL_CELL:
            out[FOOD + c] = 2
    out[FOOD_LEFT] = food
    for g in range(MAX_GHOSTS):
        out[GHOST + g] = pi[_GSTART + g]
        out[GDIR + g] = -1


@njit(cache=True)
def terminal(pi, s):
    return s[DEAD] == 1 or s[FOOD_LEFT] == 0 or s[T] >= pi[2]


@njit(cache=True)
def key(pi, s):
    h = s[PAC]
    for j in range(1, FOOD):
        h = h * 1000003 + s[j]
    return h


@njit(cache=True)
def food_along(pi, s, cell, d):
    count = 0
    c = neighbour(pi, cell, d)
    while c >= 0:
        if s[FOOD + c] == 1:
            count += 1
        c = neighbour(pi, c, d)
    return count


@njit(cache=True)
def ghost_direction(pi, pf, s, g, u_mode, u_pick):
    """Direction for ghost ``g`` given two uniform draws."""
    cell = s[GHOST + g]
    pac = s[PAC]
    reverse = -1 if s[GDIR + g] < 0 else (s[GDIR + g] + 2) % 4
    legal = np.empty(4, dtype=np.int64)
    n_legal = 0
    for d in range(4):
        if neighbour(pi, cell, d) >= 0 and d != reverse:
            legal[n_legal] = d
            n_legal += 1
    if n_legal == 0:
        if reverse >= 0 and neighbour(pi, cell, reverse) >= 0:
            return reverse
        return -1

    # 0 random, 1 chase, 2 flee, 3 seek food
    mode = 0
    if manhattan(pi, cell, pac) <= pi[7] and u_mode < pf[_CHASE]:
        mode = 2 if s[TIMER] > 0 else 1
    elif s[T] >= pi[6] and u_mode < pf[_SEEK]:
        mode = 3
    if mode == 0:
        return legal[int(u_pick * n_legal)]

    score = np.empty(4, dtype=np.int64)
    best = -(1 << 40)
    for j in range(n_legal):
        d = legal[j]
        if mode == 1:
            score[j] = -manhattan(pi, neighbour(pi, cell, d), pac)
        elif mode == 2:
            score[j] = manhattan(pi, neighbour(pi, cell, d), pac)
        else:
            score[j] = food_along(pi, s, cell, d)
        best = max(best, score[j])
    n_best = 0
    for j in range(n_legal):
        if score[j] == best:
            legal[n_best] = legal[j]
            n_best += 1
    return legal[int(u_pick * n_best)]


@njit(cache=True)
def collide(pi, pf, out):
    """Resolve PocMan/ghost contacts in ``out``; returns (reward, died)."""
    reward = 0.0
    for g in range(pi[3]):
        if out[GHOST + g] == out[PAC]:
            if out[TIMER] > 0:
                reward += pf[_R_GHOST]
                out[GHOST + g] = pi[_GSTART + g]
                out[GDIR + g] = -1
            else:
                reward += pf[_R_DEATH]
                out[DEAD] = 1
                return reward, True
    return reward, False


@njit(cache=True)
def observe(pi, pf, s):
    pac = s[PAC]
    obs = 0
    for d in range(4):
        c = neighbour(pi, pac, d)
        if c < 0:
            obs |= 1 << (4 + d)
        while c >= 0:
            seen = False
            for g in range(pi[3]):
                if s[GHOST + g] == c:
                    seen = True
            if seen:
                obs |= 1 << d
                break
            c = neighbour(pi, c, d)
    ncol = pi[1]
    radius = pi[8]
    row = pac // ncol
    col = pac % ncol
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if abs(dr) + abs(dc) > radius or (dr == 0 and dc == 0):
                continue
            r = row + dr
            q = col + dc
            if 0 <= r < pi[0] and 0 <= q < ncol and s[FOOD + r * ncol + q] == 1:
                obs |= 1 << 8
    if s[TIMER] > 0:
        obs |= 1 << 9
    return obs


@njit(cache=True)
def step(pi, pf, s, a, rng, out):
    out[:] = s
    if out[TIMER] > 0:
        out[TIMER] -= 1
    reward = pf[_R_STEP]
    nxt = neighbour(pi, s[PAC], a)
    if nxt >= 0:
        out[PAC] = nxt
    pac = out[PAC]
    if out[FOOD + pac] == 1:
        reward += pf[_R_FOOD]
        out[FOOD + pac] = 0
        out[FOOD_LEFT] -= 1
    elif out[FOOD + pac] == 2:
        out[FOOD + pac] = 0
        out[TIMER] = pi[5]

    r, died = collide(pi, pf, out)
    reward += r
    if not died:
        for g in range(pi[3]):
            u_mode = rng.random()
            u_pick = rng.random()
            d = ghost_direction(pi, pf, out, g, u_mode, u_pick)
            if d >= 0:
                out[GHOST + g] = neighbour(pi, out[GHOST + g], d)
                out[GDIR + g] = d
        r, died = collide(pi, pf, out)
        reward += r
    out[T] = s[T] + 1
    done = died or out[FOOD_LEFT] == 0 or out[T] >= pi[2]
    return reward, done, observe(pi, pf, out)


@njit(cache=True)
def perturb(pi, pf, s, rng, out):
    out[:] = s
    g = rng.integers(0, pi[3])
    ncells = pi[0] * pi[1]
    while True:
        c = rng.integers(0, ncells)
        if pi[_GRID + c] != WALL and c != s[PAC]:
            break
    out[GHOST + g] = c
    out[GDIR + g] = -1


class PocMan(KernelPOMDP):
    env_id = ENV_ID
    name = "pocman"
    kernels = sys.modules[__name__]

    def __init__(self, rows=None, horizon: int = 1000, **kwargs):
        pi, pf = make_params(rows, horizon=horizon, **kwargs)
        ncells = int(pi[0] * pi[1])
        super().__init__(pi, pf, n_actions=4, state_width=FOOD + ncells, horizon=horizon)
        self.nrow, self.ncol = int(pi[0]), int(pi[1])
        self.reward_bounds = (float(pf[_R_DEATH]), float(pf[_R_GHOST]))

    def observation(self, state) -> int:
        return int(observe(self.pi, self.pf, state))

    def passable(self, cell: int) -> bool:
        return int(self.pi[_GRID + cell]) != WALL
