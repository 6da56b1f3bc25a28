"""Compiled search engine.

The same algorithm as :class:`poweruct.mdp.PowerUCT` and
:class:`poweruct.pomdp.PowerPOMCP`, with the tree stored in flat arrays and
the simulation loop compiled by numba.  Given the same ``np.random.Generator``
the engine draws the same numbers in the same order and performs the same
floating-point operations, so trees, values and chosen actions are identical
to the reference planners (the test suite checks this).

Tree layout (``n`` = number of nodes in use, rows beyond are free):

    vi[v] = [N, first_action_row, key, next_sibling]   state/history nodes
    vf[v] = [V, seed, has_seed]
    qi[q] = [n, first_child, last_child]               action nodes, one
    qf[q] = [Q, reward_sum, tail_sum]                  block of K per state

Successors of an action node form a singly linked list in creation order.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .bandit import choose
from .envs import bernoulli_tree, copy_task, frozenlake, pocman, rocksample
from .mdp import MENTS_SOFTMAX, SearchConfig, StateNode
from .pomdp import HistoryNode, scale_reward, terminal_tails

_N, _FIRST, _KEY, _NEXT = 0, 1, 2, 3
_V, _SEED, _HAS_SEED = 0, 1, 2
_QN, _HEAD, _LAST = 0, 1, 2
_Q, _RSUM, _TAIL = 0, 1, 2
# fpar = [order, c, gamma, tau, ments_eps, r_lo, r_hi, ments]
_ORDER, _C, _GAMMA, _TAU, _MEPS, _LO, _HI, _MENTS = range(8)


@njit(cache=True)
def env_init(env, pi, pf, rng, out):
    if env == 0:
        frozenlake.init(pi, pf, rng, out)
    elif env == 1:
        copy_task.init(pi, pf, rng, out)
    elif env == 2:
        rocksample.init(pi, pf, rng, out)
    elif env == 3:
        pocman.init(pi, pf, rng, out)
    else:
        bernoulli_tree.init(pi, pf, rng, out)


@njit(cache=True)
def env_step(env, pi, pf, s, a, rng, out):
    if env == 0:
        return frozenlake.step(pi, pf, s, a, rng, out)
    elif env == 1:
        return copy_task.step(pi, pf, s, a, rng, out)
    elif env == 2:
        return rocksample.step(pi, pf, s, a, rng, out)
    elif env == 3:
        return pocman.step(pi, pf, s, a, rng, out)
    return bernoulli_tree.step(pi, pf, s, a, rng, out)


@njit(cache=True)
def env_key(env, pi, s):
    if env == 0:
        return frozenlake.key(pi, s)
    elif env == 1:
        return copy_task.key(pi, s)
    elif env == 2:
        return rocksample.key(pi, s)
    elif env == 3:
        return pocman.key(pi, s)
    return bernoulli_tree.key(pi, s)


@njit(cache=True)
def env_perturb(env, pi, pf, s, rng, out):
    if env == 2:
        rocksample.perturb(pi, pf, s, rng, out)
    elif env == 3:
        pocman.perturb(pi, pf, s, rng, out)
    else:
        out[:] = s


@njit(cache=True)
def _pick(rng, idx, count):
    if count == 1:
        return idx[0]
    return idx[rng.integers(0, count)]


@njit(cache=True)
def _state_value(v, k, vi, vf, qi, qf, fpar):
    first = vi[v, _FIRST]
    top = -np.inf
    n_kids = 0
    for a in range(k):
        q = first + a
        if qi[q, _QN] > 0:
            n_kids += 1
            top = max(top, qf[q, _Q])
    if n_kids == 0:
        return vf[v, _V]
    if fpar[_MENTS] > 0:
        tau = fpar[_TAU]
        total = 0.0
        for a in range(k):
            q = first + a
            if qi[q, _QN] > 0:
                total += math.exp((qf[q, _Q] - top) / tau)
        return top + tau * math.log(total)
    p = fpar[_ORDER]
    if np.isinf(p):
        return top
    has_seed = vf[v, _HAS_SEED] > 0
    seed = vf[v, _SEED]
    n_total = vi[v, _N]
    if p == 1.0:
        acc = seed if has_seed else 0.0
        for a in range(k):
            q = first + a
            if qi[q, _QN] > 0:
                acc += qi[q, _QN] * qf[q, _Q]
        return acc / n_total
    if has_seed:
        top = max(top, seed)
    if top <= 0.0:
        return 0.0
    acc = (seed / top) ** p if has_seed else 0.0
    for a in range(k):
        q = first + a
        if qi[q, _QN] > 0:
            acc += qi[q, _QN] * (qf[q, _Q] / top) ** p
    return min(top * (acc / n_total) ** (1.0 / p), top)


@njit(cache=True)
def _update_q(q, vi, vf, qi, qf, gamma):
    acc = 0.0
    c = qi[q, _HEAD]
    while c >= 0:
        acc += vi[c, _N] * vf[c, _V]
        c = vi[c, _NEXT]
    acc += qf[q, _TAIL]
    qf[q, _Q] = (qf[q, _RSUM] + gamma * acc) / qi[q, _QN]


@njit(cache=True)
def _select(v, k, vi, qi, qf, fpar, ties, rng):
    first = vi[v, _FIRST]
    if fpar[_MENTS] > 0:
        tau = fpar[_TAU]
        total = 0
        for a in range(k):
            total += qi[first + a, _QN]
        lam = 1.0 if total == 0 else min(1.0, fpar[_MEPS] * k / math.log(total + 1))
        top = -np.inf
        for a in range(k):
            top = max(top, qf[first + a, _Q])
        z = 0.0
        for a in range(k):
            z += math.exp((qf[first + a, _Q] - top) / tau)
        u = rng.random()
        cum = 0.0
        for a in range(k):
            cum += (1.0 - lam) * math.exp((qf[first + a, _Q] - top) / tau) / z + lam / k
            if u < cum:
                return a
        return k - 1
    count = 0
    for a in range(k):
        if qi[first + a, _QN] == 0:
            ties[count] = a
            count += 1
    if count > 0:
        return _pick(rng, ties, count)
    log_n = math.log(vi[v, _N])
    c = fpar[_C]
    best = -np.inf
    for a in range(k):
        q = first + a
        score = qf[q, _Q] + c * math.sqrt(log_n / qi[q, _QN])
        if score > best:
            best = score
            ties[0] = a
            count = 1
        elif score == best:
            ties[count] = a
            count += 1
    return _pick(rng, ties, count)


@njit(cache=True)
def _scale(r, fpar):
    return min(max((r - fpar[_LO]) / (fpar[_HI] - fpar[_LO]), 0.0), 1.0)


@njit(cache=True)
def _rollout(env, pi, pf, pomdp, state, depth, limit, k, fpar, tails, rng, roll, rewards):
    roll[0, :] = state
    cur = 0
    n = 0
    terminal = False
    for _ in range(depth, limit):
        a = rng.integers(0, k)
        r, terminal, _obs = env_step(env, pi, pf, roll[cur], a, rng, roll[1 - cur])
        cur = 1 - cur
        rewards[n] = _scale(r, fpar) if pomdp else r
        n += 1
        if terminal:
            break
    g = tails[depth + n] if (terminal and pomdp) else 0.0
    gamma = fpar[_GAMMA]
    for i in range(n - 1, -1, -1):
        g = rewards[i] + gamma * g
    return g


@njit(cache=True)
def _new_node(vi, vf, counts, key, seed):
    v = counts[0]
    counts[0] += 1
    vi[v, _N] = 1
    vi[v, _FIRST] = -1
    vi[v, _KEY] = key
    vi[v, _NEXT] = -1
    vf[v, _V] = seed
    vf[v, _SEED] = seed
    vf[v, _HAS_SEED] = 1.0
    return v


@njit(cache=True)
def _simulate(env, pi, pf, pomdp, root, k, limit, fpar, vi, vf, qi, qf, counts, tails, rng,
              stack, roll, rewards, path_v, path_q, ties):
    """One simulation from ``stack[0]`` down the tree and back up."""
    v = root
    d = 0
    while True:
        if vi[v, _FIRST] < 0:
            first = counts[1]
            counts[1] += k
            vi[v, _FIRST] = first
            for a in range(k):
                qi[first + a, _QN] = 0
                qi[first + a, _HEAD] = -1
                qi[first + a, _LAST] = -1
                qf[first + a, _Q] = 0.0
                qf[first + a, _RSUM] = 0.0
                qf[first + a, _TAIL] = 0.0
        a = _select(v, k, vi, qi, qf, fpar, ties, rng)
        q = vi[v, _FIRST] + a
        path_v[d] = v
        path_q[d] = q
        r, terminal, obs = env_step(env, pi, pf, stack[d], a, rng, stack[d + 1])
        if pomdp:
            r = _scale(r, fpar)
        qf[q, _RSUM] += r
        if terminal:
            if pomdp:
                qf[q, _TAIL] += tails[d + 1]
            break
        key = obs if pomdp else env_key(env, pi, stack[d + 1])
        child = qi[q, _HEAD]
        while child >= 0 and vi[child, _KEY] != key:
            child = vi[child, _NEXT]
        if child < 0:
            g = _rollout(env, pi, pf, pomdp, stack[d + 1], d + 1, limit, k, fpar, tails, rng, roll, rewards)
            child = _new_node(vi, vf, counts, key, g)
            if qi[q, _HEAD] < 0:
                qi[q, _HEAD] = child
            else:
                vi[qi[q, _LAST], _NEXT] = child
            qi[q, _LAST] = child
            break
        v = child
        d += 1
    gamma = fpar[_GAMMA]
    for j in range(d, -1, -1):
        q = path_q[j]
        qi[q, _QN] += 1
        _update_q(q, vi, vf, qi, qf, gamma)
        v = path_v[j]
        vi[v, _N] += 1
        vf[v, _V] = _state_value(v, k, vi, vf, qi, qf, fpar)


@njit(cache=True)
def _run(env, pi, pf, pomdp, root, root_state, particles, n_particles, n_sims, k, limit, fpar,
         vi, vf, qi, qf, counts, tails, rng, stack, roll, rewards, path_v, path_q, ties):
    """Run up to ``n_sims`` simulations; stops early when the arrays are full."""
    done = 0
    while done < n_sims:
        if counts[0] + 1 > vi.shape[0] or counts[1] + k > qi.shape[0]:
            break
        if pomdp:
            idx = 0 if n_particles == 1 else rng.integers(0, n_particles)
            stack[0, :] = particles[idx]
        else:
            stack[0, :] = root_state
        _simulate(env, pi, pf, pomdp, root, k, limit, fpar, vi, vf, qi, qf, counts, tails, rng,
                  stack, roll, rewards, path_v, path_q, ties)
        done += 1
    return done


@njit(cache=True)
def _compact(root, k, vi, vf, qi, qf, nvi, nvf, nqi, nqf):
    """Copy the subtree under ``root`` into fresh arrays; returns ``(n_v, n_q)``."""
    order = np.empty(vi.shape[0], dtype=np.int64)
    order[0] = root
    nvi[0, :] = vi[root, :]
    nvf[0, :] = vf[root, :]
    nvi[0, _NEXT] = -1
    n_v = 1
    n_q = 0
    head = 0
    while head < n_v:
        old = order[head]
        first = vi[old, _FIRST]
        if first >= 0:
            nvi[head, _FIRST] = n_q
            for a in range(k):
                nq = n_q + a
                nqi[nq, _QN] = qi[first + a, _QN]
                nqi[nq, _HEAD] = -1
                nqi[nq, _LAST] = -1
                nqf[nq, :] = qf[first + a, :]
                c = qi[first + a, _HEAD]
                while c >= 0:
                    order[n_v] = c
                    nvi[n_v, :] = vi[c, :]
                    nvf[n_v, :] = vf[c, :]
                    nvi[n_v, _NEXT] = -1
                    if nqi[nq, _HEAD] < 0:
                        nqi[nq, _HEAD] = n_v
                    else:
                        nvi[nqi[nq, _LAST], _NEXT] = n_v
                    nqi[nq, _LAST] = n_v
                    n_v += 1
                    c = vi[c, _NEXT]
            n_q += k
        head += 1
    return n_v, n_q


@njit(cache=True)
def _refill(env, pi, pf, particles, n_particles, action, observation, capacity, budget, extra_cap,
            rng, out, scratch):
    """Rejection-filter particles through ``(action, observation)`` into ``out``."""
    kept = 0
    for _ in range(budget):
        if kept >= capacity:
            break
        idx = 0 if n_particles == 1 else rng.integers(0, n_particles)
        _r, terminal, obs = env_step(env, pi, pf, particles[idx], action, rng, scratch)
        if obs == observation and not terminal:
            out[kept, :] = scratch
            kept += 1
    if kept == 0 or kept >= capacity:
        return kept
    survivors = kept
    extra = min(capacity - survivors, extra_cap)
    for _ in range(extra):
        src = 0 if survivors == 1 else rng.integers(0, survivors)
        env_perturb(env, pi, pf, out[src], rng, out[kept])
        kept += 1
    return kept


@njit(cache=True)
def _init_particles(env, pi, pf, rng, out, n):
    for i in range(n):
        env_init(env, pi, pf, rng, out[i])


class CompiledPlanner:
    """Array-backed planner for the bundled environments.

    ``kind`` is ``"mdp"`` (successors keyed by state, rewards used as is) or
    ``"pomdp"`` (successors keyed by observation, rewards scaled with the
    model's bounds, root belief held as particles).  The interface mirrors
    the reference planners: ``search``, ``advance``, ``child``,
    ``greedy_action``.
    """

    def __init__(self, model, config: SearchConfig, rng: np.random.Generator | None = None,
                 kind: str | None = None, initial_capacity: int = 4096, budget_factor: int = 20,
                 reinvigorate_fraction: float = 0.1):
        if model.env_id < 0:
            raise ValueError("model has no compiled kernels")
        self.model = model
        self.config = config
        self.rng = np.random.default_rng(config.rng_seed) if rng is None else rng
        self.kind = kind or ("pomdp" if hasattr(model, "reward_bounds") else "mdp")
        if self.kind not in ("mdp", "pomdp"):
            raise ValueError(f"unknown planner kind {self.kind!r}")
        self.pomdp = self.kind == "pomdp"
        self.k = model.n_actions
        self.limit = config.rollout_limit(model.horizon)
        bounds = tuple(float(b) for b in getattr(model, "reward_bounds", (0.0, 1.0)))
        if self.pomdp:
            scale_reward(0.0, bounds)
            self.tails = terminal_tails(bounds, config.gamma, self.limit, model.horizon)
        else:
            self.tails = np.zeros(max(self.limit, model.horizon) + 2)
        self.fpar = np.array([config.order, config.exploration_c, config.gamma, config.ments_temperature,
                              config.ments_exploration, bounds[0], bounds[1],
                              1.0 if config.backup_kind == MENTS_SOFTMAX else 0.0])
        w = model.state_width
        depth = model.horizon + 2
        self.stack = np.zeros((depth, w), dtype=np.int64)
        self.roll = np.zeros((2, w), dtype=np.int64)
        self.rewards = np.zeros(self.limit + 1)
        self.path_v = np.zeros(depth, dtype=np.int64)
        self.path_q = np.zeros(depth, dtype=np.int64)
        self.ties = np.zeros(self.k, dtype=np.int64)
        self.budget_factor = budget_factor
        self.reinvigorate_fraction = reinvigorate_fraction
        self._allocate(max(initial_capacity, 2))
        self._reset_root()
        if self.pomdp:
            cap = config.capacity
            self.particles = np.zeros((cap, w), dtype=np.int64)
            _init_particles(model.env_id, model.pi, model.pf, self.rng, self.particles, cap)
            self.n_particles = cap
        else:
            self.particles = np.zeros((1, w), dtype=np.int64)
            self.n_particles = 0

    # tree storage -----------------------------------------------------------------

    def _allocate(self, n_v: int) -> None:
        self.vi = np.zeros((n_v, 4), dtype=np.int64)
        self.vf = np.zeros((n_v, 3))
        self.qi = np.zeros((n_v * self.k, 3), dtype=np.int64)
        self.qf = np.zeros((n_v * self.k, 3))
        self.counts = np.zeros(2, dtype=np.int64)

    def _grow(self) -> None:
        self.vi = np.concatenate([self.vi, np.zeros_like(self.vi)])
        self.vf = np.concatenate([self.vf, np.zeros_like(self.vf)])
        self.qi = np.concatenate([self.qi, np.zeros_like(self.qi)])
        self.qf = np.concatenate([self.qf, np.zeros_like(self.qf)])

    def _reset_root(self) -> None:
        self.counts[:] = 0
        self.counts[0] = 1
        self.vi[0] = (0, -1, 0, -1)
        self.vf[0] = 0.0
        self.root = 0

    @property
    def node_count(self) -> int:
        return int(self.counts[0])

    # planning --------------------------------------------------------------------

    def search(self, state=None) -> int:
        """Run ``simulations_per_move`` simulations and return the best root action."""
        self.simulate(self.config.simulations_per_move, state)
        return self.best_action(self.root)

    @property
    def root_value(self) -> float:
        return float(self.vf[self.root, _V])

    def simulate(self, n_sims: int, state=None) -> None:
        """Add ``n_sims`` simulations to the current tree."""
        m = self.model
        if self.pomdp:
            if self.n_particles == 0:
                raise ValueError("belief collapsed")
            root_state = self.particles[0]
        else:
            if state is None or m.is_terminal(state):
                raise ValueError("no action available")
            root_state = np.asarray(state, dtype=np.int64)
        todo = int(n_sims)
        while todo > 0:
            done = _run(m.env_id, m.pi, m.pf, self.pomdp, self.root, root_state, self.particles,
                        self.n_particles, todo, self.k, self.limit, self.fpar, self.vi, self.vf, self.qi,
                        self.qf, self.counts, self.tails, self.rng, self.stack, self.roll, self.rewards,
                        self.path_v, self.path_q, self.ties)
            todo -= done
            if todo > 0:
                self._grow()

    def _visited(self, v: int) -> list[int]:
        first = int(self.vi[v, _FIRST])
        if first < 0:
            return []
        return [a for a in range(self.k) if self.qi[first + a, _QN] > 0]

    def best_action(self, v: int) -> int:
        visited = self._visited(v)
        if not visited:
            raise ValueError("no action available")
        first = int(self.vi[v, _FIRST])
        best = max(self.qf[first + a, _Q] for a in visited)
        return choose(self.rng, [a for a in visited if self.qf[first + a, _Q] == best])

    def greedy_action(self, v: int | None) -> int:
        if v is None or not self._visited(v):
            return int(self.rng.integers(0, self.k))
        return self.best_action(v)

    def child(self, v: int | None, action: int, key: int) -> int | None:
        if v is None or self.vi[v, _FIRST] < 0:
            return None
        c = int(self.qi[self.vi[v, _FIRST] + action, _HEAD])
        while c >= 0 and self.vi[c, _KEY] != key:
            c = int(self.vi[c, _NEXT])
        return None if c < 0 else c

    def _reroot(self, child: int | None) -> None:
        if child is None:
            self._reset_root()
            return
        vi, vf, qi, qf = self.vi, self.vf, self.qi, self.qf
        self._allocate(vi.shape[0])
        n_v, n_q = _compact(child, self.k, vi, vf, qi, qf, self.vi, self.vf, self.qi, self.qf)
        self.counts[:] = (n_v, n_q)
        self.root = 0

    def advance(self, action: int, outcome) -> None:
        """Re-root at the realised successor (MDP: next state; POMDP: observation)."""
        m = self.model
        if self.pomdp:
            obs = int(outcome)
            cap = self.config.capacity
            out = np.zeros((cap, m.state_width), dtype=np.int64)
            scratch = np.zeros(m.state_width, dtype=np.int64)
            kept = _refill(m.env_id, m.pi, m.pf, self.particles, self.n_particles, int(action), obs, cap,
                           self.budget_factor * cap, int(self.reinvigorate_fraction * cap), self.rng, out,
                           scratch)
            if kept == 0:
                raise ValueError("particle deprivation")
            self.particles, self.n_particles = out, kept
            key = obs
        else:
            key = m.state_key(outcome)
        self._reroot(self.child(self.root, int(action), key))

    # inspection ------------------------------------------------------------------

    def belief_particles(self) -> np.ndarray:
        return self.particles[: self.n_particles].copy()

    def to_nodes(self, v: int | None = None) -> StateNode:
        """Rebuild the tree under ``v`` as reference-planner node objects."""
        v = self.root if v is None else v
        seed = float(self.vf[v, _SEED]) if self.vf[v, _HAS_SEED] > 0 else None
        node = HistoryNode(seed) if self.pomdp else StateNode(seed)
        node.visit_count = int(self.vi[v, _N])
        node.value = float(self.vf[v, _V])
        first = int(self.vi[v, _FIRST])
        if first >= 0:
            node.expand(self.k)
            for a, qn in enumerate(node.children):
                row = first + a
                qn.visit_count = int(self.qi[row, _QN])
                qn.value, qn.reward_sum, qn.tail_sum = (float(x) for x in self.qf[row])
                c = int(self.qi[row, _HEAD])
                while c >= 0:
                    qn.children[int(self.vi[c, _KEY])] = self.to_nodes(c)
                    c = int(self.vi[c, _NEXT])
        return node
