"""Batch evaluation of planners on the bundled benchmarks.

Episode ``i`` of an experiment draws its randomness from
``SeedSequence(base_seed, spawn_key=(i,))``, split into one stream for the
environment and one for the planner, so every episode's outcome is a pure
function of the configuration and its index and results do not depend on the
number of worker processes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import multiprocessing
import time
from dataclasses import asdict, dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .engine import CompiledPlanner
from .envs import get_env
from .mdp import MENTS_SOFTMAX, POWER_MEAN, PowerUCT, SearchConfig
from .pomdp import PowerPOMCP

ALGORITHMS = {
    # name: (problem kind or None for both, fixed order or None for "use p")
    "uct": ("mdp", 1.0),
    "power_uct": ("mdp", None),
    "max_uct": ("mdp", math.inf),
    "ments": (None, None),
    "pomcp": ("pomdp", 1.0),
    "power_pomcp": ("pomdp", None),
}

# Exploration constants selected by grid search on seeds disjoint from the
# evaluation seeds (see README).  POMDP rewards are scaled to [0, 1], where
# the reward range max - min is 1.
DEFAULT_C = {
    "frozenlake": math.sqrt(2.0),
    "copy-144": 0.25,
    "copy-200": 0.25,
    "rocksample-11-11": 1.0,
    "rocksample-15-15": 1.0,
    "rocksample-15-35": 1.0,
    "pocman": 1.0,
}

CSV_COLUMNS = ("env", "algo", "p", "C", "gamma", "sims", "runs", "mean", "std_dev", "std_error", "seconds")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    algo: str
    sims: int
    runs: int
    p: float | None = None
    c: float | None = None
    gamma: float | None = None
    eps: float = 0.01
    seed: int = 0
    plan_once: bool | None = None
    ments_temperature: float = 1.0
    ments_exploration: float = 1.0
    belief_capacity: int | None = None
    max_steps: int | None = None
    engine: str = "compiled"

    def validate(self) -> "ExperimentConfig":
        try:
            spec = get_env(self.env)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algo!r}; choose from {sorted(ALGORITHMS)}")
        kind, order = ALGORITHMS[self.algo]
        if kind is not None and kind != spec.kind:
            raise ConfigError(f"algorithm {self.algo!r} does not apply to {spec.kind} environment {self.env!r}")
        if order is None and self.algo != "ments" and self.p is None:
            raise ConfigError(f"algorithm {self.algo!r} needs --p")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.sims < 1:
            raise ConfigError("sims must be >= 1")
        if self.engine not in ("compiled", "python"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        try:
            self.search_config()
        except ValueError as err:
            raise ConfigError(str(err)) from None
        return self

    @property
    def kind(self) -> str:
        return get_env(self.env).kind

    @property
    def order(self) -> float | None:
        if self.algo == "ments":
            return None
        fixed = ALGORITHMS[self.algo][1]
        return fixed if fixed is not None else float(self.p)

    @property
    def exploration_c(self) -> float:
        return DEFAULT_C[self.env] if self.c is None else float(self.c)

    @property
    def discount(self) -> float:
        return get_env(self.env).gamma if self.gamma is None else float(self.gamma)

    @property
    def single_plan(self) -> bool:
        return get_env(self.env).plan_once if self.plan_once is None else bool(self.plan_once)

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            order=1.0 if self.order is None else self.order,
            exploration_c=self.exploration_c,
            gamma=self.discount,
            rollout_cutoff_eps=self.eps,
            simulations_per_move=self.sims,
            backup_kind=MENTS_SOFTMAX if self.algo == "ments" else POWER_MEAN,
            ments_temperature=self.ments_temperature,
            ments_exploration=self.ments_exploration,
            rng_seed=self.seed,
            belief_capacity=self.belief_capacity,
        )


@dataclass(frozen=True)
class EpisodeResult:
    index: int
    total_return: float
    steps: int
    deprived: bool = False


@dataclass(frozen=True)
class ResultRow:
    env: str
    algo: str
    p: float | None
    C: float
    gamma: float
    sims: int
    runs: int
    mean: float
    std_dev: float
    std_error: float
    seconds: float | None = None


def episode_streams(base_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (environment, planner) generators for episode ``index``."""
    env_ss, plan_ss = np.random.SeedSequence(base_seed, spawn_key=(index,)).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(plan_ss)


def make_planner(model, config: SearchConfig, rng: np.random.Generator, kind: str, engine: str = "compiled"):
    if engine == "compiled":
        return CompiledPlanner(model, config, rng, kind=kind)
    if kind == "pomdp":
        return PowerPOMCP(model, config, rng)
    return PowerUCT(model, config, rng)


def run_episode(config: ExperimentConfig, index: int) -> EpisodeResult:
    """Play one evaluation episode and return its raw-scale return."""
    spec = get_env(config.env)
    env_rng, plan_rng = episode_streams(config.seed, index)
    model = spec.factory(env_rng)
    search = config.search_config()
    planner = make_planner(model, search, plan_rng, spec.kind, config.engine)
    max_steps = model.horizon if config.max_steps is None else config.max_steps
    gamma = search.gamma
    state = model.initial_state(env_rng)
    total, discount, steps = 0.0, 1.0, 0
    deprived = False

    if spec.kind == "mdp":
        node = None
        if config.single_plan:
            planner.search(state)
            node = planner.root
        while not model.is_terminal(state) and steps < max_steps:
            action = planner.greedy_action(node) if config.single_plan else planner.search(state)
            nxt, reward, _ = model.sample(state, action, env_rng)
            total += discount * reward if spec.discounted_report else reward
            discount *= gamma
            if config.single_plan:
                node = planner.child(node, action, model.state_key(nxt))
            else:
                planner.advance(action, nxt)
            state = nxt
            steps += 1
    else:
        while not model.is_terminal(state) and steps < max_steps:
            if deprived:
                action = int(plan_rng.integers(0, model.n_actions))
            else:
                action = planner.search()
            nxt, obs, reward, terminal = model.sample(state, action, env_rng)
            total += discount * reward if spec.discounted_report else reward
            discount *= gamma
            if not terminal and not deprived:
                try:
                    planner.advance(action, obs)
                except ValueError:
                    # no particle explains the observation: finish with random play
                    deprived = True
            state = nxt
            steps += 1
    return EpisodeResult(index, float(total), steps, deprived)


def _episode_task(args):
    config, index = args
    return run_episode(config, index)


def run_episodes(config: ExperimentConfig, workers: int = 1) -> list[EpisodeResult]:
    config.validate()
    tasks = [(config, i) for i in range(config.runs)]
    if workers <= 1:
        return [_episode_task(t) for t in tasks]
    with multiprocessing.get_context("fork").Pool(workers) as pool:
        return list(pool.imap(_episode_task, tasks, chunksize=1))


def aggregate(config: ExperimentConfig, returns: Sequence[float], seconds: float | None = None) -> ResultRow:
    values = np.asarray(returns, dtype=float)
    n = values.size
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if n > 1 else 0.0
    return ResultRow(env=config.env, algo=config.algo, p=config.order, C=config.exploration_c,
                     gamma=config.discount, sims=config.sims, runs=n, mean=mean, std_dev=std,
                     std_error=std / math.sqrt(n), seconds=seconds)


def run_experiment(config: ExperimentConfig, workers: int = 1, timing: bool = False) -> ResultRow:
    """Evaluate ``config.runs`` episodes and aggregate their returns."""
    start = time.perf_counter()
    episodes = run_episodes(config, workers)
    elapsed = time.perf_counter() - start
    return aggregate(config, [e.total_return for e in episodes], elapsed if timing else None)


def grid_cells(template: ExperimentConfig, axes: dict[str, Sequence]) -> list[ExperimentConfig]:
    if not axes:
        raise ConfigError("grid needs at least one axis")
    names = list(axes)
    known = {f.name for f in fields(ExperimentConfig)}
    for name in names:
        if name not in known:
            raise ConfigError(f"unknown grid axis {name!r}")
        if not axes[name]:
            raise ConfigError(f"grid axis {name!r} is empty")
    return [replace(template, **dict(zip(names, combo))) for combo in itertools.product(*(axes[n] for n in names))]


def grid_search(template: ExperimentConfig, axes: dict[str, Sequence], workers: int = 1,
                timing: bool = False) -> tuple[ExperimentConfig, list[ResultRow]]:
    """Evaluate the Cartesian product of ``axes``; best is the first cell with the highest mean."""
    cells = grid_cells(template, axes)
    rows = [run_experiment(cell.validate(), workers, timing) for cell in cells]
    best = max(range(len(rows)), key=lambda i: (rows[i].mean, -i))
    return cells[best], rows


def increasing_p_search(template: ExperimentConfig, orders: Iterable[float], workers: int = 1,
                        timing: bool = False) -> tuple[ExperimentConfig, list[ResultRow]]:
    """Raise ``p`` through ``orders`` until the mean return drops; keep the best."""
    rows: list[ResultRow] = []
    best_cfg, best_mean = None, -math.inf
    for p in orders:
        cell = replace(template, p=float(p)).validate()
        row = run_experiment(cell, workers, timing)
        rows.append(row)
        if row.mean < best_mean:
            break
        if row.mean > best_mean:
            best_cfg, best_mean = cell, row.mean
    if best_cfg is None:
        raise ConfigError("increasing-p search needs at least one order")
    return best_cfg, rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_rows(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, col)) for col in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        records = []
        for row in rows:
            rec = asdict(row)
            records.append({col: (_fmt(rec[col]) if isinstance(rec[col], float) and not math.isfinite(rec[col])
                                  else rec[col]) for col in CSV_COLUMNS})
        return json.dumps(records, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows: Sequence[ResultRow], path: str | None = None, fmt: str = "csv") -> str:
    """Render ``rows`` and write them to ``path`` (if given); returns the text."""
    text = format_rows(rows, fmt)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
