"""Monte Carlo harnesses: identity checks, KS machinery, CLTs, determinism."""

import math

import numpy as np
import pytest

from rwre.errors import TooFewSamplesError
from rwre.experiments import (
    annealed_clt,
    canonical_laws,
    check_carne_bound,
    check_change_of_law,
    check_many_to_one,
    check_stationarity,
    ks_statistic,
    quenched_clt,
    run_replicas,
)

LAWS = canonical_laws()
BINARY = LAWS["binary_half"]
TWO_ATOM = LAWS["two_atom_critical"]
UNARY = LAWS["unary_unit"]


class TestStationarity:
    def test_trivial_functional_is_exact(self):
        rep = check_stationarity(BINARY, "one", 200, seed=1)
        assert rep.passed
        assert rep.estimates["difference"]["value"] == 0.0

    def test_binary_went_to_parent(self):
        rep = check_stationarity(BINARY, "went_to_parent", 5000, seed=2)
        assert rep.passed, rep.estimates

    def test_two_atom_occupied_mark(self):
        rep = check_stationarity(TWO_ATOM, "occupied_mark", 20_000, seed=3)
        assert rep.passed, rep.estimates

    def test_unary_child_count(self):
        rep = check_stationarity(UNARY, "child_count", 500, seed=4)
        assert rep.passed
        assert rep.estimates["difference"]["value"] == 0.0


class TestChangeOfLaw:
    def test_unit_functional_normalization(self):
        rep = check_change_of_law(TWO_ATOM, 2, "one", 20_000, seed=5)
        assert rep.passed
        assert rep.estimates["imt_side"]["value"] == 1.0

    def test_binary_child_count_exact(self):
        rep = check_change_of_law(BINARY, 2, "child_count", 300, seed=6)
        assert rep.passed
        assert rep.estimates["imt_side"]["value"] == pytest.approx(2.0)
        assert rep.estimates["mt_side"]["value"] == pytest.approx(2.0)

    def test_two_atom_mark(self):
        rep = check_change_of_law(TWO_ATOM, 1, "mark", 30_000, seed=7)
        assert rep.passed, rep.estimates


class TestManyToOne:
    def test_trivial_level_one(self):
        rep = check_many_to_one(TWO_ATOM, 1, "one", 5000, seed=8)
        assert rep.passed
        assert rep.estimates["walk_side"]["value"] == pytest.approx(
            TWO_ATOM.rho_exact(1.0)
        )

    def test_binary_deterministic(self):
        rep = check_many_to_one(BINARY, 3, "final_product", 300, seed=9)
        assert rep.passed
        assert rep.estimates["tree_side"]["value"] == pytest.approx(0.125)

    def test_two_atom_indicator_at_median(self):
        rep = check_many_to_one(TWO_ATOM, 2, "indicator_final_gt", 30_000,
                                seed=10, c=0.25)
        assert rep.passed, rep.estimates


class TestKsStatistic:
    def test_null_calibration(self):
        n = 10_000
        samples = np.random.default_rng(0).normal(size=n)
        assert ks_statistic(samples, "normal") <= 1.63 / math.sqrt(n) * 1.5

    def test_half_normal_null(self):
        n = 10_000
        samples = np.abs(np.random.default_rng(1).normal(size=n))
        assert ks_statistic(samples, "half_normal") <= 1.63 / math.sqrt(n) * 1.5

    def test_constant_sample_far_from_normal(self):
        assert ks_statistic(np.zeros(500), "normal") >= 0.5

    def test_negation_symmetry(self):
        samples = np.random.default_rng(2).normal(size=1000)
        a = ks_statistic(samples, "normal")
        b = ks_statistic(-samples, "normal")
        assert a == pytest.approx(b, abs=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamplesError):
            ks_statistic(np.zeros(50), "normal")


class TestCltSmoke:
    def test_quenched_imt_small(self):
        rep = quenched_clt(BINARY, tree_seed=11, steps=2048, walks=400, seed=12,
                           kind="imt", ks_tol=0.12, sigma2=1.0)
        assert rep.passed, rep.statistics

    def test_quenched_mt_small(self):
        rep = quenched_clt(BINARY, tree_seed=13, steps=2048, walks=400, seed=14,
                           kind="mt", ks_tol=0.12, sigma2=1.0)
        assert rep.passed, rep.statistics

    def test_annealed_equals_quenched_for_deterministic_law(self):
        rep = annealed_clt(BINARY, steps=2048, walks=400, seed=15, kind="imt",
                           ks_tol=0.12, sigma2=1.0)
        assert rep.passed, rep.statistics

    def test_negative_control_transient(self):
        rep = annealed_clt(LAWS["binary_unit"], steps=1024, walks=200, seed=16,
                           kind="mt", ks_tol=0.08, sigma2=1.0,
                           enforce_regime=False)
        assert not rep.passed
        assert rep.estimates["endpoint_mean"]["value"] > 1.0
        assert rep.statistics["ks"] > 0.5


class TestCarneBound:
    def test_not_violated(self):
        rep = check_carne_bound(TWO_ATOM, t=100, u=30, replicas=2000, seed=17)
        assert rep.passed
        assert rep.estimates["p_reach"]["value"] <= rep.statistics["bound"]


class TestDeterminismAndWorkers:
    def test_same_seed_same_report(self):
        a = check_stationarity(TWO_ATOM, "occupied_mark", 2000, seed=18)
        b = check_stationarity(TWO_ATOM, "occupied_mark", 2000, seed=18)
        assert a.to_dict() == b.to_dict()

    def test_worker_count_does_not_change_results(self):
        vals1 = run_replicas("stationarity", TWO_ATOM,
                             {"functional": "occupied_mark"}, 500, 19, workers=1)
        vals2 = run_replicas("stationarity", TWO_ATOM,
                             {"functional": "occupied_mark"}, 500, 19, workers=2)
        assert np.array_equal(vals1, vals2)

    def test_worker_count_invariance_full_report(self):
        a = check_change_of_law(TWO_ATOM, 1, "mark", 800, seed=20, workers=1)
        b = check_change_of_law(TWO_ATOM, 1, "mark", 800, seed=20, workers=2)
        assert a.to_dict() == b.to_dict()
