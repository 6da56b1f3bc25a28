"""Independent textbook planners used as oracles for the tree search tests.

``ReferenceUCT`` keeps, per node, the visit count and the running sum of the
returns that passed through it (the classic UCT bookkeeping), and reads
values off as ``sum / count``.  With ``backup="max"`` it instead stores the
immediate-reward sums and recomputes each state value as the maximum of its
visited action values.  Random numbers are consumed in the same order as the
library's planners: action choice, transition, then rollout.
"""

import math


def pick(rng, options):
    return options[0] if len(options) == 1 else options[int(rng.integers(0, len(options)))]


class Node:
    def __init__(self, visits=0, total=0.0):
        self.visits = visits
        self.total = total  # sum of returns; only the rollout seed under the max backup
        self.value = total / visits if visits else 0.0
        self.actions = None


class Edge:
    def __init__(self):
        self.visits = 0
        self.total = 0.0
        self.rewards = 0.0
        self.value = 0.0
        self.children = {}


class ReferenceUCT:
    def __init__(self, model, gamma, c, eps, rng, backup="mean"):
        self.model, self.gamma, self.c, self.rng, self.backup = model, gamma, c, rng, backup
        self.limit = 0
        while self.limit < model.horizon and gamma ** self.limit >= eps:
            self.limit += 1
        self.root = Node()

    def run(self, state, sims):
        for _ in range(sims):
            self.simulate(self.root, state)
        visited = [a for a, e in enumerate(self.root.actions) if e.visits]
        best = max(self.root.actions[a].value for a in visited)
        return pick(self.rng, [a for a in visited if self.root.actions[a].value == best])

    def rollout(self, state, depth):
        if self.model.is_terminal(state):
            return 0.0
        k = self.model.action_count(state)
        rewards = []
        for _ in range(depth, self.limit):
            state, r, done = self.model.sample(state, int(self.rng.integers(0, k)), self.rng)
            rewards.append(r)
            if done:
                break
        ret = 0.0
        for r in reversed(rewards):
            ret = r + self.gamma * ret
        return ret

    def choose(self, node):
        untried = [a for a, e in enumerate(node.actions) if e.visits == 0]
        if untried:
            return pick(self.rng, untried)
        scores = [e.value + self.c * math.sqrt(math.log(node.visits) / e.visits) for e in node.actions]
        top = max(scores)
        return pick(self.rng, [a for a, s in enumerate(scores) if s == top])

    def simulate(self, node, state, depth=0):
        if node.actions is None:
            node.actions = [Edge() for _ in range(self.model.action_count(state))]
        a = self.choose(node)
        edge = node.actions[a]
        nxt, r, done = self.model.sample(state, a, self.rng)
        ret = r
        if not done:
            key = self.model.state_key(nxt)
            child = edge.children.get(key)
            if child is None:
                g = self.rollout(nxt, depth + 1)
                edge.children[key] = Node(visits=1, total=g)
                ret = r + self.gamma * g
            else:
                ret = r + self.gamma * self.simulate(child, nxt, depth + 1)
        edge.visits += 1
        edge.rewards += r
        node.visits += 1
        if self.backup == "mean":
            edge.total += ret
            edge.value = edge.total / edge.visits
            node.total += ret
            node.value = node.total / node.visits
        else:
            mass = sum(ch.visits * ch.value for ch in edge.children.values())
            edge.value = (edge.rewards + self.gamma * mass) / edge.visits
            node.value = max(e.value for e in node.actions if e.visits)
        return ret


def compare_trees(ours, ref, tol=1e-12, path="root"):
    """Assert that a library tree and a reference tree agree node by node."""
    assert ours.visit_count == ref.visits, path
    assert abs(ours.value - ref.value) <= tol, (path, ours.value, ref.value)
    if ref.actions is None:
        assert ours.children is None, path
        return
    for a, (q, e) in enumerate(zip(ours.children, ref.actions)):
        here = f"{path}/{a}"
        assert q.visit_count == e.visits, here
        assert abs(q.value - e.value) <= tol, (here, q.value, e.value)
        assert set(q.children) == set(e.children), here
        for key, child in q.children.items():
            compare_trees(child, e.children[key], tol, f"{here}:{key}")
