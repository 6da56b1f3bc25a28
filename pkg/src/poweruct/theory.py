"""Monte-Carlo checks of the convergence properties of power-mean backups.

Each check runs a fixed-seed experiment and compares an empirical quantity
with an analytic bound or a reference value, returning a :class:`CheckReport`.
The finite-sample signatures tested are: the power-mean concentration
inequality, logarithmic growth of suboptimal pulls under UCB1, decay of the
probability of recommending a wrong arm, and decay of the root-value bias of
tree search on a small game tree.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .bandit import BanditConfig, BanditTestbed, run_bandit
from .engine import CompiledPlanner
from .envs import BernoulliTree
from .mdp import SearchConfig
from .power_mean import concentration_bound, hoelder_bounds, power_mean


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    trials: int
    empirical_value: float
    analytic_bound_or_reference: float
    passed: bool
    seed: int
    detail: dict | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _binomial_sigma(prob: float, trials: int) -> float:
    prob = min(max(prob, 0.0), 1.0)
    return math.sqrt(prob * (1.0 - prob) / trials)


def check_concentration(n: int = 1000, p: float = 2.0, epsilon: float = 0.1, trials: int = 10_000,
                        seed: int = 1, l: float = 0.1, U: float = 0.9,
                        value_range: tuple[float, float] = (0.0, 1.0)) -> CheckReport:
    """Tail frequency of ``|M_p(X_1..X_n) - mu| > eps`` for uniform ``[l, U]`` draws.

    Passes when the frequency is at most the analytic bound plus three
    binomial standard deviations; a bound ``>= 1`` passes vacuously.
    """
    rng = np.random.default_rng(seed)
    mu = 0.5 * (l + U)
    means = np.empty(trials)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        means[start:stop] = power_mean(rng.uniform(l, U, size=(stop - start, n)), p)
    tail = float(np.mean(np.abs(means - mu) > epsilon))
    if epsilon > 0:
        bound = concentration_bound(n, epsilon, p, l, U, value_range)
    else:
        bound = 2.0 * math.exp(hoelder_bounds(l, U, p, 1.0).H if p > 1 else 0.0)
    passed = bound >= 1.0 or tail <= bound + 3.0 * _binomial_sigma(bound, trials)
    return CheckReport("concentration", trials, tail, bound, bool(passed), seed,
                       {"n": n, "p": p, "epsilon": epsilon})


def _suboptimal_pulls(testbed: BanditTestbed, p: float, checkpoints: Sequence[int], seeds: int, seed: int,
                      c: float) -> np.ndarray:
    """Mean total pulls of suboptimal arms at each checkpoint."""
    config = BanditConfig(len(testbed.arm_means), exploration_c=c, order=p)
    best = max(testbed.arm_means)
    worse = np.array([m < best for m in testbed.arm_means])
    streams = np.random.SeedSequence(seed).spawn(seeds)
    totals = np.zeros(len(checkpoints))
    for ss in streams:
        run = run_bandit(testbed, config, max(checkpoints), checkpoints, np.random.default_rng(ss))
        totals += run.checkpoint_pulls[:, worse].sum(axis=1)
    return totals / seeds


def check_suboptimal_growth(testbed: BanditTestbed | None = None, p: float = 2.0,
                            horizons: Sequence[int] = (100, 1000, 10_000), seeds: int = 100, seed: int = 2,
                            c: float = math.sqrt(2.0)) -> CheckReport:
    """Suboptimal pulls grow logarithmically.

    With ``T(n)`` the mean suboptimal pulls after ``n`` rounds, passes when
    ``T(n_max) / T(n_min) <= 4 log(n_max) / log(n_min)`` and, for every
    ladder point ``n >= 1000``, ``T(4n) - T(n) <= T(n)``.
    """
    testbed = testbed or BanditTestbed((0.9, 0.1))
    gaps = [g for g in testbed.gaps if g > 0]
    lo, hi = min(horizons), max(horizons)
    reference = 4.0 * math.log(hi) / math.log(lo)
    if not gaps:
        return CheckReport("suboptimal_growth", seeds, 0.0, reference, True, seed,
                           {"skipped": "no suboptimal arm"})
    quads = [4 * n for n in horizons if n >= 1000]
    ladder = sorted(set(horizons) | set(quads))
    pulls = dict(zip(ladder, _suboptimal_pulls(testbed, p, ladder, seeds, seed, c)))
    ratio = pulls[hi] / pulls[lo]
    sublinear = all(pulls[4 * n] - pulls[n] <= pulls[n] for n in horizons if n >= 1000)
    return CheckReport("suboptimal_growth", seeds, float(ratio), reference,
                       bool(ratio <= reference and sublinear), seed,
                       {"p": p, "mean_suboptimal_pulls": {str(k): float(v) for k, v in pulls.items()}})


def check_failure_decay(testbed: BanditTestbed | None = None, p: float = 2.0,
                        checkpoints: Sequence[int] = (100, 1000, 10_000), seeds: int = 200, seed: int = 3,
                        c: float = math.sqrt(2.0), tolerance: float = 0.02, final_max: float = 0.1) -> CheckReport:
    """Probability of recommending a wrong arm decays.

    Passes when the empirical failure rate never rises by more than
    ``tolerance`` between checkpoints and ends below ``final_max``.
    """
    testbed = testbed or default_ten_arm_testbed()
    config = BanditConfig(len(testbed.arm_means), exploration_c=c, order=p)
    cps = tuple(sorted(checkpoints))
    fails = np.zeros(len(cps))
    for ss in np.random.SeedSequence(seed).spawn(seeds):
        fails += run_bandit(testbed, config, cps[-1], cps, np.random.default_rng(ss)).failures
    rates = fails / seeds
    steady = all(rates[j + 1] <= rates[j] + tolerance for j in range(len(cps) - 1))
    return CheckReport("failure_decay", seeds, float(rates[-1]), final_max,
                       bool(steady and rates[-1] < final_max), seed,
                       {"p": p, "failure_rate": {str(t): float(r) for t, r in zip(cps, rates)}})


def default_ten_arm_testbed(seed: int = 0) -> BanditTestbed:
    """Ten Bernoulli arms with means drawn uniformly from ``[0, 1]``."""
    return BanditTestbed(tuple(np.random.default_rng(seed).uniform(0.0, 1.0, size=10)), rng_seed=seed)


def tree_value_estimates(leaf_means: Sequence[float], p: float, n_ladder: Sequence[int], seeds: int, seed: int,
                         depth: int = 2, branching: int = 2, c: float = math.sqrt(2.0)) -> np.ndarray:
    """Root value after each ladder point, one row per seed."""
    model = BernoulliTree(leaf_means, depth, branching)
    config = SearchConfig(order=p, exploration_c=c, gamma=1.0, simulations_per_move=1)
    ladder = sorted(n_ladder)
    out = np.zeros((seeds, len(ladder)))
    start = model.initial_state()
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(seeds)):
        planner = CompiledPlanner(model, config, np.random.default_rng(ss), kind="mdp")
        done = 0
        for j, n in enumerate(ladder):
            planner.simulate(n - done, start)
            done = n
            out[i, j] = planner.root_value
    return out


def check_tree_bias(leaf_means: Sequence[float] = (0.9, 0.1, 0.5, 0.5), p: float = 2.0,
                    n_ladder: Sequence[int] = (100, 1000, 10_000), seeds: int = 500, seed: int = 4,
                    depth: int = 2, branching: int = 2, c: float = math.sqrt(2.0)) -> CheckReport:
    """Bias of the root value estimate shrinks with the simulation budget.

    ``bias(n) = |mean over seeds of V_n(root) - max leaf mean|``; passes when
    it strictly decreases along the ladder.
    """
    values = tree_value_estimates(leaf_means, p, n_ladder, seeds, seed, depth, branching, c)
    optimum = float(max(leaf_means))
    bias = np.abs(values.mean(axis=0) - optimum)
    decreasing = all(bias[j + 1] < bias[j] for j in range(len(bias) - 1))
    return CheckReport("tree_bias", seeds, float(bias[-1]), float(bias[0]), bool(decreasing), seed,
                       {"p": p, "optimum": optimum,
                        "bias": {str(n): float(b) for n, b in zip(sorted(n_ladder), bias)},
                        "signed_bias": {str(n): float(v - optimum) for n, v in zip(sorted(n_ladder), values.mean(axis=0))}})


def default_suite() -> list[CheckReport]:
    """All checks with their shipped seeds."""
    return [
        check_concentration(),
        check_suboptimal_growth(),
        check_failure_decay(),
        check_tree_bias(),
    ]
