"""Model classes wrapping compiled transition kernels.

A kernel module provides five functions with fixed signatures, operating on
an integer parameter vector ``pi``, a float parameter vector ``pf`` and
``int64`` state vectors:

    init(pi, pf, rng, out)                  sample an initial state into ``out``
    step(pi, pf, s, a, rng, out)            -> (raw_reward, terminal, observation)
    terminal(pi, s)                         -> bool
    key(pi, s)                              -> int, hashable successor key
    perturb(pi, pf, s, rng, out)            particle reinvigoration move

The object models below call the kernels' plain-Python bodies (``py_func``)
so a single definition drives both the reference planners and the compiled
search engine.
"""

from __future__ import annotations

from importlib import resources

import numpy as np


def load_grid(name: str) -> list[str]:
    text = resources.files("poweruct.envs").joinpath("data", name).read_text()
    rows = [line.rstrip("\n") for line in text.splitlines() if line.strip()]
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{name}: ragged grid")
    return rows


class KernelModel:
    env_id: int = -1
    name: str = ""
    kernels = None  # module-like object with init/step/terminal/key/perturb

    def __init__(self, pi: np.ndarray, pf: np.ndarray, n_actions: int, state_width: int, horizon: int):
        self.pi = np.ascontiguousarray(pi, dtype=np.int64)
        self.pf = np.ascontiguousarray(pf, dtype=np.float64)
        self.n_actions = int(n_actions)
        self.state_width = int(state_width)
        self.horizon = int(horizon)

    def action_count(self, state=None) -> int:
        return self.n_actions

    def initial_state(self, rng: np.random.Generator | None = None) -> np.ndarray:
        out = np.zeros(self.state_width, dtype=np.int64)
        self.kernels.init.py_func(self.pi, self.pf, rng, out)
        return out

    def is_terminal(self, state) -> bool:
        return bool(self.kernels.terminal.py_func(self.pi, state))

    def state_key(self, state) -> int:
        return int(self.kernels.key.py_func(self.pi, state))

    def _step(self, state, action, rng):
        out = np.empty(self.state_width, dtype=np.int64)
        r, term, obs = self.kernels.step.py_func(self.pi, self.pf, state, int(action), rng, out)
        return out, float(r), bool(term), int(obs)


class KernelMDP(KernelModel):
    """Generative model ``(s, a) -> (s', r, terminal)`` with rewards in ``[0, 1]``."""

    def sample(self, state, action, rng):
        out, r, term, _ = self._step(state, action, rng)
        return out, r, term


class KernelPOMDP(KernelModel):
    """Generative model ``(s, a) -> (s', o, r, terminal)`` with raw rewards.

    ``reward_bounds`` maps raw rewards into ``[0, 1]`` for planning.
    """

    reward_bounds: tuple[float, float] = (0.0, 1.0)

    def sample(self, state, action, rng):
        out, r, term, obs = self._step(state, action, rng)
        return out, obs, r, term

    def perturb(self, state, rng) -> np.ndarray:
        out = np.empty(self.state_width, dtype=np.int64)
        self.kernels.perturb.py_func(self.pi, self.pf, state, rng, out)
        return out
