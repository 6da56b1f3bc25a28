import math

import numpy as np
import pytest

from poweruct.envs import FrozenLake, PocMan, RockSample
from poweruct.envs import rocksample
from poweruct.mdp import PowerUCT, SearchConfig
from poweruct.pomdp import (
    BeliefState,
    PowerPOMCP,
    advance_belief,
    scale_reward,
    search_pomdp,
    terminal_tails,
    unscale_reward,
)

from reference_planners import ReferenceUCT, compare_trees


class FullyObservable:
    """An MDP seen through the POMDP interface: the observation is the state key."""

    reward_bounds = (0.0, 1.0)

    def __init__(self, mdp):
        self.mdp = mdp
        self.horizon = mdp.horizon

    def sample(self, state, action, rng):
        nxt, r, done = self.mdp.sample(state, action, rng)
        return nxt, self.mdp.state_key(nxt), r, done

    def initial_state(self, rng):
        return self.mdp.initial_state(rng)

    def action_count(self, state=None):
        return self.mdp.action_count(state)

    def is_terminal(self, state):
        return self.mdp.is_terminal(state)


class QuitOrWait:
    """Action 0 ends the episode, action 1 waits; both earn a raw reward of 0."""

    reward_bounds = (-1.0, 1.0)
    horizon = 10

    def sample(self, t, action, rng):
        return t + 1, 0, 0.0, action == 0 or t + 1 >= self.horizon

    def initial_state(self, rng):
        return 0

    def action_count(self, state=None):
        return 2

    def is_terminal(self, t):
        return t >= self.horizon


class TestScaling:
    def test_endpoints(self):
        assert scale_reward(-100, (-100, 25)) == 0.0
        assert scale_reward(25, (-100, 25)) == 1.0

    def test_pocman_food(self):
        assert scale_reward(10, PocMan().reward_bounds) == pytest.approx(0.88)

    def test_clamped(self):
        assert scale_reward(30, (0, 10)) == 1.0 and scale_reward(-3, (0, 10)) == 0.0

    def test_inverse(self):
        for r in np.linspace(-10, 10, 11):
            assert unscale_reward(scale_reward(r, (-10, 10)), (-10, 10)) == pytest.approx(r)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            scale_reward(0.0, (1.0, 1.0))

    def test_tails(self):
        tails = terminal_tails((-1.0, 1.0), 0.5, 3, 5)
        assert tails[:4].tolist() == [0.5 + 0.25 + 0.125, 0.5 + 0.25, 0.5, 0.0]
        assert not np.any(terminal_tails((0.0, 1.0), 0.9, 10, 10))


class TestBelief:
    def test_draw_empty(self):
        with pytest.raises(ValueError, match="belief collapsed"):
            BeliefState([], 3).draw(np.random.default_rng())

    def test_capacity(self):
        with pytest.raises(ValueError):
            BeliefState([1, 2], 1)
        with pytest.raises(ValueError):
            BeliefState([], 0)

    def test_fully_observable_collapses(self):
        model = FullyObservable(FrozenLake())
        belief = BeliefState([np.array([9, 0])] * 50, 50)
        g = np.random.default_rng(0)
        truth, obs, _, _ = model.sample(np.array([9, 0]), 1, g)
        new = advance_belief(belief, 1, obs, model, g)
        assert len(new) == 50
        assert all(np.array_equal(p, truth) for p in new.particles)

    def test_sensor_at_zero_distance(self):
        model = RockSample(5, 2, rocks=([0, 4], [2, 0]))
        g = np.random.default_rng(1)
        belief = BeliefState.from_model(model, 200, g)
        masks = {int(p[2]) & 1 for p in belief.particles}
        assert masks == {0, 1}
        new = advance_belief(belief, 5, rocksample.OBS_GOOD, model, g)
        assert all(int(p[2]) & 1 == 1 for p in new.particles)

    def test_deprivation(self):
        model = FullyObservable(FrozenLake())
        belief = BeliefState([np.array([9, 0])] * 5, 5)
        with pytest.raises(ValueError, match="particle deprivation"):
            advance_belief(belief, 1, 10**9, model, np.random.default_rng())

    def test_reinvigoration_tops_up(self):
        model = RockSample(5, 2, rocks=([0, 4], [2, 0]))
        g = np.random.default_rng(2)
        belief = BeliefState([np.array([0, 2, 0b01, 0])] + [np.array([0, 2, 0b00, 0])] * 99, 100)
        new = advance_belief(belief, 5, rocksample.OBS_GOOD, model, g, budget_factor=1, reinvigorate_fraction=0.1)
        # one particle in a hundred matches, so the hundred draws keep a few
        # and reinvigoration adds exactly ten perturbed copies
        survivors = len(new) - 10
        assert 1 <= survivors <= 10
        assert all(int(p[2]) & 1 for p in new.particles[:survivors])


class TestPowerPOMCP:
    def test_empty_belief(self):
        with pytest.raises(ValueError, match="belief collapsed"):
            search_pomdp(RockSample(5, 2), SearchConfig(simulations_per_move=5), BeliefState([], 4))

    @pytest.mark.parametrize("order", [1.0, 2.5, math.inf])
    def test_fully_observable_reduces_to_mdp(self, order):
        mdp = FrozenLake()
        cfg = SearchConfig(order=order, gamma=0.95, exploration_c=1.0, simulations_per_move=400)
        start = mdp.initial_state()
        for seed in range(3):
            a = PowerUCT(mdp, cfg, np.random.default_rng(seed))
            b = PowerPOMCP(FullyObservable(mdp), cfg, np.random.default_rng(seed), BeliefState([start], 1))
            assert a.search(start) == b.search()
            compare_trees(b.root, _as_reference(a.root), tol=0.0)

    def test_p1_matches_reference_uct(self):
        mdp = FrozenLake()
        cfg = SearchConfig(order=1.0, gamma=0.95, exploration_c=1.0, simulations_per_move=500)
        start = mdp.initial_state()
        for seed in range(3):
            ref = ReferenceUCT(mdp, 0.95, 1.0, 0.01, np.random.default_rng(seed))
            ours = PowerPOMCP(FullyObservable(mdp), cfg, np.random.default_rng(seed), BeliefState([start], 1))
            assert ours.search() == ref.run(start, 500)
            compare_trees(ours.root, ref.root)

    def test_terminal_tail_keeps_zero_reward_neutral(self):
        model = QuitOrWait()
        cfg = SearchConfig(gamma=0.9, simulations_per_move=200)
        planner = PowerPOMCP(model, cfg, np.random.default_rng(0), BeliefState([0], 1))
        planner.search()
        expected = terminal_tails(model.reward_bounds, 0.9, cfg.rollout_limit(model.horizon), model.horizon)[0]
        for q in planner.root.children:
            assert q.value == pytest.approx(expected, abs=1e-12)
        assert planner.root.value == pytest.approx(expected, abs=1e-12)

    def test_advance_keeps_subtree(self):
        model = RockSample(5, 2, rocks=([0, 4], [2, 0]))
        cfg = SearchConfig(gamma=0.95, simulations_per_move=300, belief_capacity=100)
        planner = PowerPOMCP(model, cfg, np.random.default_rng(3))
        planner.search()
        q = planner.root.children[5]
        if q.visit_count == 0:
            pytest.skip("sensing never tried")
        obs = next(iter(q.children))
        expected = q.children[obs]
        planner.advance(5, obs)
        assert planner.root is expected and len(planner.root.belief) > 0

    def test_prefers_sampling_a_known_good_rock(self):
        model = RockSample(5, 2, rocks=([0, 4], [2, 0]))
        belief = BeliefState([np.array([0, 2, 0b11, 0])], 1)
        cfg = SearchConfig(order=2.0, gamma=0.95, simulations_per_move=3000, exploration_c=1.0)
        assert search_pomdp(model, cfg, belief, np.random.default_rng(0)) == rocksample.SAMPLE


class _Ref:
    pass


def _as_reference(node):
    """View a library tree through the reference-tree attribute names."""
    out = _Ref()
    out.visits, out.value = node.visit_count, node.value
    if node.children is None:
        out.actions = None
        return out
    out.actions = []
    for q in node.children:
        e = _Ref()
        e.visits, e.value = q.visit_count, q.value
        e.children = {k: _as_reference(ch) for k, ch in q.children.items()}
        out.actions.append(e)
    return out
