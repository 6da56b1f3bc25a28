import json
import math

import numpy as np
import pytest

from poweruct.bandit import BanditTestbed
from poweruct.power_mean import concentration_bound
from poweruct.theory import (
    CheckReport,
    check_concentration,
    check_failure_decay,
    check_suboptimal_growth,
    check_tree_bias,
    default_ten_arm_testbed,
    tree_value_estimates,
)


class TestConcentration:
    def test_hoeffding_case(self):
        r = check_concentration(n=200, p=1.0, epsilon=0.05, trials=2000, seed=5)
        assert r.analytic_bound_or_reference == pytest.approx(2 * math.exp(-2 * 200 * 0.05**2))
        assert r.passed

    def test_desk_case(self):
        r = check_concentration(trials=2000)
        assert r.analytic_bound_or_reference == pytest.approx(concentration_bound(1000, 0.1, 2, 0.1, 0.9))
        assert r.empirical_value <= r.analytic_bound_or_reference + 1e-12
        assert r.passed

    def test_zero_epsilon_is_vacuous(self):
        r = check_concentration(n=50, epsilon=0.0, trials=500)
        assert r.empirical_value > 0.99
        assert r.analytic_bound_or_reference >= 1.0 and r.passed


class TestBandits:
    def test_no_suboptimal_arm(self):
        r = check_suboptimal_growth(BanditTestbed((0.5, 0.5)), seeds=2)
        assert r.passed and r.detail["skipped"]

    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_growth_small(self, p):
        r = check_suboptimal_growth(p=p, horizons=(100, 1000), seeds=20, seed=8)
        assert r.analytic_bound_or_reference == pytest.approx(4 * math.log(1000) / math.log(100))
        assert r.passed

    def test_single_arm_never_fails(self):
        r = check_failure_decay(BanditTestbed((0.3,)), checkpoints=(10, 100), seeds=10)
        assert r.empirical_value == 0.0 and r.passed

    def test_well_separated_pair(self):
        r = check_failure_decay(BanditTestbed((0.9, 0.1)), checkpoints=(100, 1000, 10_000), seeds=100)
        assert r.empirical_value < 0.01 and r.passed

    def test_ten_arm_testbed(self):
        tb = default_ten_arm_testbed()
        assert len(tb.arm_means) == 10
        assert tb.arm_means == default_ten_arm_testbed().arm_means


class TestTreeBias:
    def test_identical_leaves(self):
        values = tree_value_estimates([0.5] * 4, 2.0, (100, 2000), seeds=30, seed=1)
        assert abs(values[:, -1].mean() - 0.5) < 0.03

    @pytest.mark.parametrize("p", [1.0, 4.0])
    def test_converges(self, p):
        r = check_tree_bias(p=p, n_ladder=(100, 1000, 10_000), seeds=60, seed=3)
        bias = list(r.detail["bias"].values())
        assert bias[-1] < bias[0]


def test_reports_are_reproducible():
    a = check_failure_decay(checkpoints=(50, 500), seeds=20, seed=9)
    b = check_failure_decay(checkpoints=(50, 500), seeds=20, seed=9)
    assert a == b and a.to_json() == b.to_json()


def test_report_json():
    r = CheckReport("x", 3, 0.1, 0.2, True, 4, {"a": 1})
    assert json.loads(r.to_json()) == {"check_name": "x", "trials": 3, "empirical_value": 0.1,
                                       "analytic_bound_or_reference": 0.2, "passed": True, "seed": 4,
                                       "detail": {"a": 1}}
