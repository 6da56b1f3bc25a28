"""Copy task: reproduce an input tape symbol by symbol.

Each action is a triple (move left/right, write or not, symbol), so there are
``4 * alphabet`` actions (144 for 36 symbols, 200 for 50).  A correct write
pays 1 and advances the output; a wrong write ends the episode.  The read
cursor is clamped to the tape and does not affect which symbol is expected.

State vector: ``[cursor, written, t, failed]``.
"""

from __future__ import annotations

import sys

import numpy as np
from numba import njit

from .base import KernelMDP

ENV_ID = 1
_HEADER = 3  # pi = [tape_len, alphabet, horizon, tape...]


def encode_action(move_right: bool, write: bool, symbol: int, alphabet: int) -> int:
    return (int(move_right) * 2 + int(write)) * alphabet + symbol


def decode_action(action: int, alphabet: int) -> tuple[bool, bool, int]:
    group, symbol = divmod(action, alphabet)
    return bool(group // 2), bool(group % 2), symbol


@njit(cache=True)
def init(pi, pf, rng, out):
    out[:] = 0


@njit(cache=True)
def terminal(pi, s):
    return s[3] == 1 or s[1] >= pi[0] or s[2] >= pi[2]


@njit(cache=True)
def key(pi, s):
    # the read cursor never influences rewards or the write position, so
    # states differing only in the cursor share a search node
    return (s[2] * (pi[0] + 1) + s[1]) * 2 + s[3]


@njit(cache=True)
def step(pi, pf, s, a, rng, out):
    tape_len = pi[0]
    alphabet = pi[1]
    group = a // alphabet
    symbol = a % alphabet
    cursor = s[0] + (1 if group >= 2 else -1)
    out[0] = min(max(cursor, 0), tape_len - 1)
    out[1] = s[1]
    out[2] = s[2] + 1
    out[3] = 0
    reward = 0.0
    done = False
    if group % 2 == 1:
        if symbol == pi[_HEADER + s[1]]:
            reward = 1.0
            out[1] = s[1] + 1
            done = out[1] >= tape_len
        else:
            out[3] = 1
            done = True
    return reward, done or out[2] >= pi[2], 0


@njit(cache=True)
def perturb(pi, pf, s, rng, out):
    out[:] = s


class CopyTask(KernelMDP):
    env_id = ENV_ID
    name = "copy"
    kernels = sys.modules[__name__]

    def __init__(self, tape, alphabet: int = 36, horizon: int | None = None):
        tape = np.asarray(tape, dtype=np.int64)
        if tape.ndim != 1 or tape.size == 0:
            raise ValueError("tape must be a non-empty 1-d sequence")
        if tape.min() < 0 or tape.max() >= alphabet:
            raise ValueError("tape symbols must lie in [0, alphabet)")
        horizon = 2 * tape.size if horizon is None else int(horizon)
        pi = np.concatenate([[tape.size, alphabet, horizon], tape]).astype(np.int64)
        super().__init__(pi, np.zeros(1), n_actions=4 * alphabet, state_width=4, horizon=horizon)
        self.tape = tape
        self.alphabet = alphabet

    @classmethod
    def random(cls, rng: np.random.Generator, length: int = 40, alphabet: int = 36, horizon: int | None = None):
        return cls(rng.integers(0, alphabet, size=length), alphabet, horizon)

    def optimal_action(self, state) -> int:
        """Write the next expected symbol (moving right)."""
        return encode_action(True, True, int(self.tape[state[1]]), self.alphabet)
