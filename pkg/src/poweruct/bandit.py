"""UCB1 with an arithmetic- or power-mean arm estimator.

``select_arm``/``update_arm`` are the object-level API; ``run_bandit`` plays a
Bernoulli testbed with a compiled kernel that consumes the random stream in
exactly the same order, so both paths give identical runs for one seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .power_mean import validate_order


@dataclass(frozen=True)
class ArmStats:
    pulls: int = 0
    reward_sum: float = 0.0
    reward_power_sum: float = 0.0
    estimate: float = 0.0


@dataclass(frozen=True)
class BanditConfig:
    arm_count: int
    exploration_c: float = math.sqrt(2.0)
    order: float = 1.0

    def __post_init__(self):
        if self.arm_count < 1:
            raise ValueError("arm_count must be >= 1")
        if not self.exploration_c > 0:
            raise ValueError("exploration_c must be > 0")
        object.__setattr__(self, "order", validate_order(self.order))


@dataclass(frozen=True)
class BanditTestbed:
    """Bernoulli arms with known means."""

    arm_means: tuple[float, ...]
    rng_seed: int = 0

    def __post_init__(self):
        means = tuple(float(m) for m in self.arm_means)
        if not means:
            raise ValueError("testbed needs at least one arm")
        if any(not 0.0 <= m <= 1.0 for m in means):
            raise ValueError("arm means must lie in [0, 1]")
        object.__setattr__(self, "arm_means", means)

    @property
    def best_arm(self) -> int:
        # lowest index among maximal means
        return int(np.argmax(self.arm_means))

    @property
    def gaps(self) -> tuple[float, ...]:
        best = max(self.arm_means)
        return tuple(best - m for m in self.arm_means)


@dataclass
class BanditRun:
    pulls: np.ndarray
    checkpoints: tuple[int, ...]
    failures: np.ndarray  # failures[j]: recommended arm != best arm after checkpoints[j] pulls
    estimates: np.ndarray = field(default=None)
    checkpoint_pulls: np.ndarray = field(default=None)  # [j, i]: pulls of arm i after checkpoints[j]


def choose(rng: np.random.Generator, candidates: Sequence[int]) -> int:
    """Uniform pick; draws from ``rng`` only when there is a real choice."""
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(0, len(candidates)))]


def select_arm(stats: Sequence[ArmStats], config: BanditConfig, total_pulls: int, rng: np.random.Generator) -> int:
    """UCB1 choice: untried arms first, then ``argmax estimate + C sqrt(log n / T_i)``."""
    if not stats:
        raise ValueError("no arms to select from")
    if total_pulls < 0:
        raise ValueError("total_pulls must be >= 0")
    unpulled = [i for i, s in enumerate(stats) if s.pulls == 0]
    if unpulled:
        return choose(rng, unpulled)
    log_n = math.log(total_pulls)
    best, ties = -math.inf, []
    for i, s in enumerate(stats):
        score = s.estimate + config.exploration_c * math.sqrt(log_n / s.pulls)
        if score > best:
            best, ties = score, [i]
        elif score == best:
            ties.append(i)
    return choose(rng, ties)


def update_arm(stats: ArmStats, reward: float, order: float) -> ArmStats:
    if not 0.0 <= reward <= 1.0:
        raise ValueError("reward must be pre-scaled to [0, 1]")
    pulls = stats.pulls + 1
    reward_sum = stats.reward_sum + reward
    if math.isinf(order):
        return replace(stats, pulls=pulls, reward_sum=reward_sum,
                       estimate=reward if stats.pulls == 0 else max(stats.estimate, reward))
    power_sum = stats.reward_power_sum + reward**order
    if order == 1.0:
        estimate = reward_sum / pulls
    else:
        estimate = (power_sum / pulls) ** (1.0 / order)
    return ArmStats(pulls, reward_sum, power_sum, estimate)


def recommend(stats: Sequence[ArmStats], rng: np.random.Generator) -> int:
    """Arm with the highest estimate, ties broken at random."""
    best = max(s.estimate for s in stats)
    return choose(rng, [i for i, s in enumerate(stats) if s.estimate == best])


def _run_bandit_python(means, config, horizon, checkpoints, rng):
    stats = [ArmStats() for _ in means]
    failures, snapshots = [], []
    best_arm = int(np.argmax(means))
    for t in range(horizon):
        arm = select_arm(stats, config, t, rng)
        reward = 1.0 if rng.random() < means[arm] else 0.0
        stats[arm] = update_arm(stats[arm], reward, config.order)
        if t + 1 in checkpoints:
            failures.append(recommend(stats, rng) != best_arm)
            snapshots.append([s.pulls for s in stats])
    return (np.array([s.pulls for s in stats], dtype=np.int64),
            np.array(failures, dtype=bool),
            np.array([s.estimate for s in stats]),
            np.array(snapshots, dtype=np.int64).reshape(len(failures), len(means)))


@numba.njit(cache=True)
def _pick(rng, idx, count):
    if count == 1:
        return idx[0]
    return idx[rng.integers(0, count)]


@numba.njit(cache=True)
def _run_bandit_kernel(means, c, order, horizon, checkpoints, rng):
    k = means.shape[0]
    pulls = np.zeros(k, dtype=np.int64)
    reward_sum = np.zeros(k)
    power_sum = np.zeros(k)
    estimate = np.zeros(k)
    ties = np.empty(k, dtype=np.int64)
    failures = np.zeros(checkpoints.shape[0], dtype=np.bool_)
    snapshots = np.zeros((checkpoints.shape[0], k), dtype=np.int64)
    best_arm = np.argmax(means)
    is_max = np.isinf(order)
    next_cp = 0
    for t in range(horizon):
        count = 0
        for i in range(k):
            if pulls[i] == 0:
                ties[count] = i
                count += 1
        if count == 0:
            log_n = math.log(t)
            best = -np.inf
            for i in range(k):
                score = estimate[i] + c * math.sqrt(log_n / pulls[i])
                if score > best:
                    best = score
                    ties[0] = i
                    count = 1
                elif score == best:
                    ties[count] = i
                    count += 1
        arm = _pick(rng, ties, count)
        reward = 1.0 if rng.random() < means[arm] else 0.0
        first = pulls[arm] == 0
        pulls[arm] += 1
        reward_sum[arm] += reward
        if is_max:
            if first:
                estimate[arm] = reward
            else:
                estimate[arm] = max(estimate[arm], reward)
        else:
            power_sum[arm] += reward**order
            if order == 1.0:
                estimate[arm] = reward_sum[arm] / pulls[arm]
            else:
                estimate[arm] = (power_sum[arm] / pulls[arm]) ** (1.0 / order)
        while next_cp < checkpoints.shape[0] and checkpoints[next_cp] == t + 1:
            best = estimate.max()
            count = 0
            for i in range(k):
                if estimate[i] == best:
                    ties[count] = i
                    count += 1
            failures[next_cp] = _pick(rng, ties, count) != best_arm
            snapshots[next_cp, :] = pulls
            next_cp += 1
    return pulls, failures, estimate, snapshots


def run_bandit(
    testbed: BanditTestbed,
    config: BanditConfig,
    horizon: int,
    checkpoints: Sequence[int] = (),
    rng: np.random.Generator | None = None,
    engine: str = "compiled",
) -> BanditRun:
    """Play UCB1 for ``horizon`` pulls on Bernoulli arms.

    ``failures[j]`` records whether the arm with the best estimate after
    ``checkpoints[j]`` pulls differs from the truly best arm.
    """
    if config.arm_count != len(testbed.arm_means):
        raise ValueError("config.arm_count does not match the testbed")
    if horizon < config.arm_count:
        raise ValueError("horizon must be >= arm_count")
    cps = tuple(sorted(set(int(t) for t in checkpoints)))
    if cps and (cps[0] < 1 or cps[-1] > horizon):
        raise ValueError("checkpoints must lie in [1, horizon]")
    if rng is None:
        rng = np.random.default_rng(testbed.rng_seed)
    means = np.asarray(testbed.arm_means, dtype=float)
    if engine == "compiled":
        pulls, failures, est, snaps = _run_bandit_kernel(
            means, float(config.exploration_c), float(config.order), int(horizon),
            np.asarray(cps, dtype=np.int64), rng)
    elif engine == "python":
        pulls, failures, est, snaps = _run_bandit_python(means, config, horizon, cps, rng)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return BanditRun(pulls=pulls, checkpoints=cps, failures=failures, estimates=est, checkpoint_pulls=snaps)
