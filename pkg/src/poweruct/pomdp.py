"""Power-mean POMCP: tree search over action-observation histories.

Each simulation starts from a hidden state drawn from the root belief and
descends a tree whose state nodes are histories (children of an action node
are keyed by observation).  Backups are exactly those of :mod:`poweruct.mdp`.

Rewards are mapped into ``[0, 1]`` with the model's ``reward_bounds`` before
planning.  The map is affine, so to keep the ranking of policies unchanged a
terminal state is treated as earning the scaled image of a raw zero reward
(``scale_reward(0)``) at every remaining step up to the rollout cut-off; the
discounted sum of those steps is the "tail" added at terminal transitions.
For MDP-style bounds ``(0, 1)`` the tail is zero.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .mdp import ActionNode, SearchConfig, StateNode, best_action, fold_returns, select_action, state_value


class PomdpModel(Protocol):
    horizon: int
    reward_bounds: tuple[float, float]

    def sample(self, state, action: int, rng: np.random.Generator) -> tuple[object, int, float, bool]: ...

    def initial_state(self, rng: np.random.Generator): ...

    def action_count(self, state=None) -> int: ...

    def is_terminal(self, state) -> bool: ...


def scale_reward(r: float, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("reward bounds must satisfy r_min < r_max")
    return min(max((r - lo) / (hi - lo), 0.0), 1.0)


def unscale_reward(v: float, bounds: tuple[float, float]) -> float:
    """Inverse of :func:`scale_reward` for one step's reward."""
    lo, hi = bounds
    return lo + (hi - lo) * v


def terminal_tails(bounds: tuple[float, float], gamma: float, limit: int, size: int) -> np.ndarray:
    """``tails[d]``: discounted scaled-zero reward from depth ``d`` to ``limit``."""
    c = scale_reward(0.0, bounds)
    tails = np.zeros(max(size, limit) + 2)
    for d in range(limit - 1, -1, -1):
        tails[d] = c + gamma * tails[d + 1]
    return tails


class BeliefState:
    """Unweighted particle set over hidden states."""

    def __init__(self, particles, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.particles = list(particles)
        self.capacity = int(capacity)
        if len(self.particles) > self.capacity:
            raise ValueError("more particles than capacity")

    def __len__(self) -> int:
        return len(self.particles)

    def draw(self, rng: np.random.Generator):
        """Uniform particle; consumes randomness only when there is a choice."""
        if not self.particles:
            raise ValueError("belief collapsed")
        if len(self.particles) == 1:
            return self.particles[0]
        return self.particles[int(rng.integers(0, len(self.particles)))]

    @classmethod
    def from_model(cls, model: PomdpModel, capacity: int, rng: np.random.Generator) -> "BeliefState":
        return cls([model.initial_state(rng) for _ in range(capacity)], capacity)


class HistoryNode(StateNode):
    __slots__ = ("belief",)

    def __init__(self, seed: float | None = None, belief: BeliefState | None = None):
        super().__init__(seed)
        self.belief = belief


HistoryActionNode = ActionNode


def advance_belief(belief: BeliefState, action: int, observation: int, model: PomdpModel,
                   rng: np.random.Generator, budget_factor: int = 20,
                   reinvigorate_fraction: float = 0.1) -> BeliefState:
    """Rejection-filter ``belief`` through ``(action, observation)``.

    Particles are drawn from ``belief``, pushed through the model and kept
    when they emit ``observation`` and are not terminal, until the new set is
    full or ``budget_factor * capacity`` draws have been spent.  A short set
    is topped up with up to ``reinvigorate_fraction * capacity`` perturbed
    copies of survivors when the model provides ``perturb``.
    """
    capacity = belief.capacity
    kept = []
    for _ in range(budget_factor * capacity):
        if len(kept) >= capacity:
            break
        nxt, obs, _, terminal = model.sample(belief.draw(rng), action, rng)
        if obs == observation and not terminal:
            kept.append(nxt)
    if not kept:
        raise ValueError("particle deprivation")
    perturb = getattr(model, "perturb", None)
    if perturb is not None and len(kept) < capacity:
        survivors = len(kept)
        extra = min(capacity - survivors, int(reinvigorate_fraction * capacity))
        for _ in range(extra):
            src = kept[0] if survivors == 1 else kept[int(rng.integers(0, survivors))]
            kept.append(perturb(src, rng))
    return BeliefState(kept, capacity)


class PowerPOMCP:
    """POMCP with power-mean backups; keeps the subtree of the realised history."""

    def __init__(self, model: PomdpModel, config: SearchConfig, rng: np.random.Generator | None = None,
                 belief: BeliefState | None = None):
        self.model = model
        self.config = config
        self.rng = np.random.default_rng(config.rng_seed) if rng is None else rng
        self.bounds = tuple(float(b) for b in model.reward_bounds)
        scale_reward(0.0, self.bounds)  # validates the bounds
        self.limit = config.rollout_limit(model.horizon)
        self.tails = terminal_tails(self.bounds, config.gamma, self.limit, model.horizon)
        if belief is None:
            belief = BeliefState.from_model(model, config.capacity, self.rng)
        self.root = HistoryNode(belief=belief)

    def search(self) -> int:
        belief = self.root.belief
        if belief is None or len(belief) == 0:
            raise ValueError("belief collapsed")
        for _ in range(self.config.simulations_per_move):
            self.simulate_v(self.root, belief.draw(self.rng), 0)
        return best_action(self.root, self.rng)

    def scale(self, r: float) -> float:
        return scale_reward(r, self.bounds)

    def simulate_v(self, node: HistoryNode, state, depth: int) -> None:
        if node.children is None:
            node.expand(self.model.action_count(state))
        action = select_action(node, self.config, self.rng)
        self.simulate_q(node.children[action], state, action, depth)
        node.visit_count += 1
        node.value = state_value(node, self.config)

    def simulate_q(self, qnode: ActionNode, state, action: int, depth: int) -> None:
        nxt, obs, reward, terminal = self.model.sample(state, action, self.rng)
        qnode.reward_sum += self.scale(reward)
        if terminal:
            qnode.tail_sum += self.tails[depth + 1]
        else:
            child = qnode.children.get(obs)
            if child is None:
                g = self.rollout(nxt, depth + 1)
                qnode.children[obs] = HistoryNode(seed=g)
            else:
                self.simulate_v(child, nxt, depth + 1)
        qnode.visit_count += 1
        qnode.update_value(self.config.gamma)

    def rollout(self, state, depth: int) -> float:
        k = self.model.action_count(state)
        rewards = []
        terminal = False
        for _ in range(depth, self.limit):
            state, _, r, terminal = self.model.sample(state, int(self.rng.integers(0, k)), self.rng)
            rewards.append(self.scale(r))
            if terminal:
                break
        tail = self.tails[depth + len(rewards)] if terminal else 0.0
        return fold_returns(rewards, self.config.gamma, tail)

    def advance(self, action: int, observation: int) -> None:
        """Move the root to the realised history and refill its belief."""
        belief = advance_belief(self.root.belief, action, observation, self.model, self.rng)
        child = None
        if self.root.children is not None:
            child = self.root.children[action].children.get(observation)
        if child is None:
            child = HistoryNode()
        child.belief = belief
        self.root = child


def search_pomdp(model: PomdpModel, config: SearchConfig, belief: BeliefState,
                 rng: np.random.Generator | None = None) -> int:
    """One search from a fresh history node holding ``belief``."""
    if len(belief) == 0:
        raise ValueError("belief collapsed")
    return PowerPOMCP(model, config, rng, belief).search()
