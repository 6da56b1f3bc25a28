import csv
import io
import json
import math

import numpy as np
import pytest

from poweruct.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ResultRow,
    aggregate,
    emit_results,
    episode_streams,
    format_rows,
    grid_search,
    increasing_p_search,
    run_episode,
    run_episodes,
    run_experiment,
)


def copy_config(**kw):
    base = dict(env="copy-144", algo="power_uct", p=3.0, sims=64, runs=4, seed=1)
    base.update(kw)
    return ExperimentConfig(**base).validate()


def row(**kw):
    base = dict(env="frozenlake", algo="uct", p=1.0, C=1.0, gamma=0.95, sims=8, runs=2,
                mean=0.5, std_dev=0.1, std_error=0.1 / math.sqrt(2))
    base.update(kw)
    return ResultRow(**base)


class TestConfig:
    @pytest.mark.parametrize("kwargs, message", [
        (dict(env="frozenlake", algo="pomcp"), "does not apply"),
        (dict(env="rocksample-11-11", algo="uct"), "does not apply"),
        (dict(env="nowhere", algo="uct"), "unknown environment"),
        (dict(env="frozenlake", algo="alphazero"), "unknown algorithm"),
        (dict(env="frozenlake", algo="power_uct"), "needs --p"),
        (dict(env="frozenlake", algo="uct", runs=0), "runs"),
        (dict(env="frozenlake", algo="uct", sims=0), "sims"),
        (dict(env="frozenlake", algo="uct", gamma=1.5), "gamma"),
        (dict(env="frozenlake", algo="uct", engine="gpu"), "engine"),
    ])
    def test_invalid(self, kwargs, message):
        args = dict(sims=8, runs=2)
        args.update(kwargs)
        with pytest.raises(ConfigError, match=message):
            ExperimentConfig(**args).validate()

    def test_orders(self):
        assert ExperimentConfig("frozenlake", "uct", 8, 1).order == 1.0
        assert ExperimentConfig("frozenlake", "max_uct", 8, 1).order == math.inf
        assert ExperimentConfig("frozenlake", "power_uct", 8, 1, p=2.2).order == 2.2
        assert ExperimentConfig("pocman", "power_pomcp", 8, 1, p=10).order == 10.0
        assert ExperimentConfig("pocman", "ments", 8, 1).order is None

    def test_defaults_come_from_environment(self):
        cfg = ExperimentConfig("copy-144", "uct", 8, 1)
        assert cfg.discount == 1.0 and cfg.single_plan
        assert not ExperimentConfig("copy-144", "uct", 8, 1, plan_once=False).single_plan
        assert ExperimentConfig("frozenlake", "uct", 8, 1).discount == 0.95


def test_episode_streams_are_independent_and_stable():
    e1, p1 = episode_streams(7, 3)
    e2, p2 = episode_streams(7, 3)
    assert e1.random() == e2.random() and p1.random() == p2.random()
    e3, _ = episode_streams(7, 4)
    e4, p4 = episode_streams(7, 3)
    assert e3.random() != e4.random()
    assert e4.random() != p4.random()


class TestEpisodes:
    def test_copy_episode(self):
        ep = run_episode(copy_config(sims=256), 0)
        assert 0 <= ep.total_return <= 40 and ep.steps >= 1

    def test_replanning_copy(self):
        ep = run_episode(copy_config(sims=32, plan_once=False), 0)
        assert 0 <= ep.total_return <= 40

    def test_frozenlake_returns_are_binary(self):
        cfg = ExperimentConfig("frozenlake", "uct", sims=16, runs=3).validate()
        assert all(e.total_return in (0.0, 1.0) for e in run_episodes(cfg))

    def test_pomdp_episode(self):
        cfg = ExperimentConfig("rocksample-11-11", "power_pomcp", p=2.0, sims=32, runs=1, max_steps=15).validate()
        ep = run_episode(cfg, 0)
        assert ep.steps <= 15

    def test_python_engine_agrees(self):
        a = run_episode(copy_config(sims=64, engine="compiled"), 2)
        b = run_episode(copy_config(sims=64, engine="python"), 2)
        assert a == b

    def test_parallel_matches_serial(self):
        cfg = copy_config(runs=5)
        assert run_episodes(cfg, workers=1) == run_episodes(cfg, workers=2)


class TestAggregate:
    def test_recomputes_from_episodes(self):
        cfg = copy_config(runs=6)
        episodes = run_episodes(cfg)
        r = run_experiment(cfg)
        values = np.array([e.total_return for e in episodes])
        assert r.mean == values.mean()
        assert r.std_dev == pytest.approx(values.std(ddof=1))
        assert r.std_error == pytest.approx(r.std_dev / math.sqrt(6))
        assert r.runs == 6 and r.seconds is None

    def test_single_run(self):
        r = aggregate(copy_config(runs=1), [3.0])
        assert (r.mean, r.std_dev, r.std_error) == (3.0, 0.0, 0.0)

    def test_timing(self):
        assert run_experiment(copy_config(runs=1), timing=True).seconds > 0


class TestGrid:
    def test_single_cell(self):
        cfg = copy_config(runs=2)
        best, rows = grid_search(cfg, {"c": [0.5]})
        assert best.c == 0.5 and len(rows) == 1

    def test_argmax_over_cells(self):
        cfg = copy_config(runs=3, sims=128)
        best, rows = grid_search(cfg, {"p": [1.0, 3.0], "c": [0.25, 2.0]})
        assert len(rows) == 4
        assert [r.p for r in rows] == [1.0, 1.0, 3.0, 3.0]
        means = [r.mean for r in rows]
        first = means.index(max(means))
        assert (best.p, best.c) == (rows[first].p, rows[first].C)

    def test_errors(self):
        with pytest.raises(ConfigError):
            grid_search(copy_config(), {})
        with pytest.raises(ConfigError):
            grid_search(copy_config(), {"c": []})
        with pytest.raises(ConfigError):
            grid_search(copy_config(), {"temperature_of_room": [1]})

    def test_increasing_p_stops_at_first_drop(self):
        cfg = copy_config(runs=3, sims=128)
        best, rows = increasing_p_search(cfg, [1.0, 2.0, 4.0, 8.0, 16.0])
        means = [r.mean for r in rows]
        assert all(a <= b for a, b in zip(means[:-2], means[1:-1]))
        assert len(rows) == 5 or means[-1] < max(means[:-1])
        assert best.p == rows[means.index(max(means))].p


class TestEmit:
    def test_csv_header_and_row(self):
        text = format_rows([row()])
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 2
        parsed = next(csv.DictReader(io.StringIO(text)))
        assert parsed["seconds"] == "" and float(parsed["mean"]) == 0.5

    def test_json(self):
        records = json.loads(format_rows([row(), row(algo="power_uct", p=2.2)], "json"))
        assert [list(r) for r in records] == [list(CSV_COLUMNS)] * 2
        assert records[1]["p"] == 2.2

    def test_infinite_order_is_text(self):
        assert json.loads(format_rows([row(p=math.inf)], "json"))[0]["p"] == "inf"
        assert "inf" in format_rows([row(p=math.inf)])

    def test_table_shape(self):
        rows = [row(algo=a, sims=s) for a in ("uct", "power_uct", "max_uct", "ments") for s in (4096, 16384, 65536, 262144)]
        assert len(format_rows(rows).splitlines()) == 17

    def test_byte_stable(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_results([row()], str(a))
        emit_results([row()], str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_empty(self):
        with pytest.raises(ValueError, match="no rows"):
            format_rows([])

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            format_rows([row()], "xml")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit_results([row()], str(tmp_path / "missing" / "out.csv"))
