"""Power-UCT for fully observable MDPs with a generative model.

Each state node backs up its value as the power mean of its children's Q
values weighted by visit counts; ``order=1`` is plain UCT, ``order=inf`` is
max-backup, and ``backup_kind="ments_softmax"`` swaps in a soft (log-sum-exp)
backup with a Boltzmann-mixed exploration policy.

A state reached for the first time is not expanded: it is created with one
visit and the return of a uniformly random rollout as its value.  That
rollout return stays in the node as a sample of weight ``1 / N(s)`` next to
the children, so at ``order=1`` ``N(s) V(s)`` is exactly the sum of all
returns that passed through ``s``, as in classic UCT.  The max backup and
the soft backup use only visited children once there are any.

This module is the readable reference implementation.  ``poweruct.engine``
runs the same algorithm on flat arrays under numba and, fed the same random
generator, reproduces these trees exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Protocol

import numpy as np

from .bandit import choose
from .power_mean import validate_order

POWER_MEAN = "power_mean"
MENTS_SOFTMAX = "ments_softmax"


@dataclass(frozen=True)
class SearchConfig:
    order: float = 1.0
    exploration_c: float = math.sqrt(2.0)
    gamma: float = 1.0
    rollout_cutoff_eps: float = 0.01
    simulations_per_move: int = 1000
    backup_kind: str = POWER_MEAN
    ments_temperature: float = 1.0
    ments_exploration: float = 1.0
    rng_seed: int = 0
    max_rollout_depth: int | None = None  # default: the environment horizon
    belief_capacity: int | None = None  # POMDP only; default: simulations_per_move

    def __post_init__(self):
        object.__setattr__(self, "order", validate_order(self.order))
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not self.rollout_cutoff_eps > 0:
            raise ValueError("rollout_cutoff_eps must be > 0")
        if self.simulations_per_move < 1:
            raise ValueError("simulations_per_move must be >= 1")
        if self.exploration_c < 0:
            raise ValueError("exploration_c must be >= 0")
        if self.backup_kind not in (POWER_MEAN, MENTS_SOFTMAX):
            raise ValueError(f"unknown backup_kind {self.backup_kind!r}")
        if self.backup_kind == MENTS_SOFTMAX:
            if not self.ments_temperature > 0:
                raise ValueError("ments temperature must be > 0")
            if not self.ments_exploration > 0:
                raise ValueError("ments exploration must be > 0")
        if self.belief_capacity is not None and self.belief_capacity < 1:
            raise ValueError("belief_capacity must be >= 1")

    def rollout_limit(self, horizon: int) -> int:
        """Depth at which rollouts stop: the first ``d`` with ``gamma**d < eps``.

        Capped by ``max_rollout_depth`` (or ``horizon``), which is the only
        limit when ``gamma == 1``.
        """
        cap = int(horizon if self.max_rollout_depth is None else self.max_rollout_depth)
        depth, weight = 0, 1.0
        while weight >= self.rollout_cutoff_eps and depth < cap:
            depth += 1
            weight *= self.gamma
        return depth

    @property
    def capacity(self) -> int:
        return self.simulations_per_move if self.belief_capacity is None else self.belief_capacity


class GenerativeModel(Protocol):
    horizon: int

    def sample(self, state, action: int, rng: np.random.Generator) -> tuple[object, float, bool]: ...

    def action_count(self, state=None) -> int: ...

    def is_terminal(self, state) -> bool: ...

    def state_key(self, state) -> Hashable: ...


class ActionNode:
    """Statistics of one (state, action) pair.

    ``value * visit_count == reward_sum + gamma * (sum_children N V + tail_sum)``
    after every backup; ``tail_sum`` is only non-zero for scaled POMDP rewards.
    """

    __slots__ = ("visit_count", "value", "reward_sum", "tail_sum", "children")

    def __init__(self):
        self.visit_count = 0
        self.value = 0.0
        self.reward_sum = 0.0
        self.tail_sum = 0.0
        self.children: dict = {}

    def update_value(self, gamma: float) -> None:
        acc = 0.0
        for child in self.children.values():
            acc += child.visit_count * child.value
        acc += self.tail_sum
        self.value = (self.reward_sum + gamma * acc) / self.visit_count


class StateNode:
    """Statistics of one state; ``children`` is ``None`` until expanded."""

    __slots__ = ("visit_count", "value", "seed", "children")

    def __init__(self, seed: float | None = None):
        self.seed = seed
        self.visit_count = 0 if seed is None else 1
        self.value = 0.0 if seed is None else seed
        self.children: list[ActionNode] | None = None

    def expand(self, n_actions: int) -> None:
        self.children = [ActionNode() for _ in range(n_actions)]

    def visited(self) -> list[int]:
        return [a for a, q in enumerate(self.children or ()) if q.visit_count > 0]


def state_value(node: StateNode, config: SearchConfig) -> float:
    """Backed-up value of ``node`` from its children (and rollout seed)."""
    kids = [q for q in node.children if q.visit_count > 0]
    if not kids:
        return node.value
    if config.backup_kind == MENTS_SOFTMAX:
        tau = config.ments_temperature
        top = max(q.value for q in kids)
        total = 0.0
        for q in kids:
            total += math.exp((q.value - top) / tau)
        return top + tau * math.log(total)
    p = config.order
    if math.isinf(p):
        return max(q.value for q in kids)
    n_total = node.visit_count
    seed = node.seed
    if p == 1.0:
        acc = 0.0 if seed is None else seed
        for q in kids:
            acc += q.visit_count * q.value
        return acc / n_total
    top = max(q.value for q in kids)
    if seed is not None:
        top = max(top, seed)
    if top <= 0.0:
        return 0.0
    acc = 0.0 if seed is None else (seed / top) ** p
    for q in kids:
        acc += q.visit_count * (q.value / top) ** p
    return min(top * (acc / n_total) ** (1.0 / p), top)


def ucb_action(node: StateNode, c: float, rng: np.random.Generator) -> int:
    """Untried actions first (uniformly), then ``argmax Q + c sqrt(log N / n)``."""
    unvisited = [a for a, q in enumerate(node.children) if q.visit_count == 0]
    if unvisited:
        return choose(rng, unvisited)
    log_n = math.log(node.visit_count)
    best, ties = -math.inf, []
    for a, q in enumerate(node.children):
        score = q.value + c * math.sqrt(log_n / q.visit_count)
        if score > best:
            best, ties = score, [a]
        elif score == best:
            ties.append(a)
    return choose(rng, ties)


def ments_action(node: StateNode, config: SearchConfig, rng: np.random.Generator) -> int:
    """Sample from ``(1 - lam) softmax(Q / tau) + lam / K`` with decaying ``lam``."""
    k = len(node.children)
    tau = config.ments_temperature
    total = 0
    for q in node.children:
        total += q.visit_count
    lam = 1.0 if total == 0 else min(1.0, config.ments_exploration * k / math.log(total + 1))
    top = max(q.value for q in node.children)
    weights = [math.exp((q.value - top) / tau) for q in node.children]
    z = 0.0
    for w in weights:
        z += w
    u = rng.random()
    cum = 0.0
    for a in range(k):
        cum += (1.0 - lam) * weights[a] / z + lam / k
        if u < cum:
            return a
    return k - 1


def select_action(node: StateNode, config: SearchConfig, rng: np.random.Generator) -> int:
    if config.backup_kind == MENTS_SOFTMAX:
        return ments_action(node, config, rng)
    return ucb_action(node, config.exploration_c, rng)


def best_action(node: StateNode, rng: np.random.Generator) -> int:
    """``argmax_a Q(s, a)`` over visited actions, ties broken at random."""
    visited = node.visited()
    if not visited:
        raise ValueError("no action available")
    best = max(node.children[a].value for a in visited)
    return choose(rng, [a for a in visited if node.children[a].value == best])


def fold_returns(rewards: list[float], gamma: float, tail: float = 0.0) -> float:
    """``r_0 + gamma (r_1 + gamma (... + gamma tail))``, evaluated from the back."""
    g = tail
    for r in reversed(rewards):
        g = r + gamma * g
    return g


def rollout(model: GenerativeModel, state, depth: int, limit: int, gamma: float,
            rng: np.random.Generator) -> float:
    """Discounted return of uniformly random play from ``state`` at ``depth``."""
    if model.is_terminal(state):
        return 0.0
    k = model.action_count(state)
    rewards = []
    for _ in range(depth, limit):
        state, r, terminal = model.sample(state, int(rng.integers(0, k)), rng)
        rewards.append(r)
        if terminal:
            break
    return fold_returns(rewards, gamma)


class PowerUCT:
    """Tree search over a :class:`GenerativeModel`, keeping the tree between moves."""

    def __init__(self, model: GenerativeModel, config: SearchConfig, rng: np.random.Generator | None = None):
        self.model = model
        self.config = config
        self.rng = np.random.default_rng(config.rng_seed) if rng is None else rng
        self.limit = config.rollout_limit(model.horizon)
        self.root = StateNode()

    def search(self, state) -> int:
        if self.model.is_terminal(state):
            raise ValueError("no action available")
        for _ in range(self.config.simulations_per_move):
            self.simulate_v(self.root, state, 0)
        return best_action(self.root, self.rng)

    def simulate_v(self, node: StateNode, state, depth: int) -> None:
        if node.children is None:
            node.expand(self.model.action_count(state))
        action = select_action(node, self.config, self.rng)
        self.simulate_q(node.children[action], state, action, depth)
        node.visit_count += 1
        node.value = state_value(node, self.config)

    def simulate_q(self, qnode: ActionNode, state, action: int, depth: int) -> None:
        nxt, reward, terminal = self.model.sample(state, action, self.rng)
        qnode.reward_sum += reward
        if not terminal:
            key = self.model.state_key(nxt)
            child = qnode.children.get(key)
            if child is None:
                g = rollout(self.model, nxt, depth + 1, self.limit, self.config.gamma, self.rng)
                qnode.children[key] = StateNode(seed=g)
            else:
                self.simulate_v(child, nxt, depth + 1)
        qnode.visit_count += 1
        qnode.update_value(self.config.gamma)

    def advance(self, action: int, next_state) -> None:
        """Keep the subtree under ``action`` and the realised successor."""
        child = None
        if self.root.children is not None:
            child = self.root.children[action].children.get(self.model.state_key(next_state))
        self.root = child if child is not None else StateNode()

    def child(self, node: StateNode | None, action: int, key) -> StateNode | None:
        if node is None or node.children is None:
            return None
        return node.children[action].children.get(key)

    def greedy_action(self, node: StateNode | None) -> int:
        """Best visited action at ``node``, or a uniformly random one off-tree."""
        if node is None or not node.visited():
            return int(self.rng.integers(0, self.model.action_count()))
        return best_action(node, self.rng)


def search(root_state, model: GenerativeModel, config: SearchConfig, rng: np.random.Generator | None = None) -> int:
    """Run ``config.simulations_per_move`` simulations from a fresh root and pick an action."""
    return PowerUCT(model, config, rng).search(root_state)
