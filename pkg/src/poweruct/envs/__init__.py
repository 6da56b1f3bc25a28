"""Benchmark environments and the registry the harness uses to build them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .base import KernelMDP, KernelModel, KernelPOMDP, load_grid
from .bernoulli_tree import BernoulliTree
from .copy_task import CopyTask
from .frozenlake import FrozenLake
from .pocman import PocMan
from .rocksample import RockSample


@dataclass(frozen=True)
class EnvSpec:
    """How to build an environment for one evaluation episode.

    ``factory`` receives the episode's environment generator, so instances
    with random structure (the Copy tape) are a function of the episode seed.
    ``discounted_report`` selects whether episode returns are summed with
    ``gamma`` (POMDP benchmarks) or plainly.
    """

    name: str
    kind: str  # "mdp" or "pomdp"
    factory: Callable[[np.random.Generator], KernelModel]
    gamma: float
    discounted_report: bool
    plan_once: bool = False


ENVIRONMENTS: dict[str, EnvSpec] = {
    "frozenlake": EnvSpec("frozenlake", "mdp", lambda rng: FrozenLake(), 0.95, False),
    "copy-144": EnvSpec("copy-144", "mdp", lambda rng: CopyTask.random(rng, 40, 36), 1.0, False, True),
    "copy-200": EnvSpec("copy-200", "mdp", lambda rng: CopyTask.random(rng, 40, 50), 1.0, False, True),
    "rocksample-11-11": EnvSpec("rocksample-11-11", "pomdp", lambda rng: RockSample(11, 11), 0.95, True),
    "rocksample-15-15": EnvSpec("rocksample-15-15", "pomdp", lambda rng: RockSample(15, 15), 0.95, True),
    "rocksample-15-35": EnvSpec("rocksample-15-35", "pomdp", lambda rng: RockSample(15, 35), 0.95, True),
    "pocman": EnvSpec("pocman", "pomdp", lambda rng: PocMan(), 0.95, True),
}


def get_env(name: str) -> EnvSpec:
    try:
        return ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


__all__ = [
    "ENVIRONMENTS", "EnvSpec", "get_env", "KernelMDP", "KernelModel", "KernelPOMDP", "load_grid",
    "BernoulliTree", "CopyTask", "FrozenLake", "PocMan", "RockSample",
]
