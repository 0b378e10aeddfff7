"""Walk kernel, trajectories, reversibility, and determinism."""

import math

import numpy as np
import pytest

from rwre.errors import ExtinctError, UnexpandedError
from rwre.experiments import canonical_laws, check_detailed_balance
from rwre.laws import Atom, FiniteSupportLaw
from rwre.network import invariant_measure
from rwre.trees import generate_imt, generate_mt
from rwre.walk import (
    Walker,
    environment_seen_from_particle,
    kernel,
    run_walk,
    step_once,
)

LAWS = canonical_laws()


class TestKernel:
    def test_non_root_half_marks(self):
        t = generate_mt(LAWS["binary_half"], 2, np.random.default_rng(0))
        v = t.children(0)[0]
        probs = dict(kernel(t, v))
        assert probs[t.parent[v]] == pytest.approx(0.5)
        for c in t.children(v):
            assert probs[c] == pytest.approx(0.25)

    def test_root_reflection(self):
        t = generate_mt(LAWS["binary_half"], 1, np.random.default_rng(0))
        probs = dict(kernel(t, 0))
        assert all(p == pytest.approx(0.5) for p in probs.values())
        assert sum(probs.values()) == pytest.approx(1.0)

    def test_single_heavy_child(self):
        law = FiniteSupportLaw((Atom(1.0, 1, (3.0,)),))
        t = generate_mt(law, 2, np.random.default_rng(0))
        v = t.children(0)[0]
        probs = dict(kernel(t, v))
        assert probs[t.parent[v]] == pytest.approx(0.25)
        assert probs[t.children(v)[0]] == pytest.approx(0.75)

    def test_probabilities_sum_to_one(self):
        t = generate_mt(LAWS["two_atom_critical"], 4, np.random.default_rng(1))
        for v in range(len(t)):
            if t.n_children[v] >= 0:
                assert sum(p for _, p in kernel(t, v)) == pytest.approx(1.0, abs=1e-12)

    def test_generic_root_kernel_omits_parent_mass(self):
        t = generate_mt(LAWS["two_atom_critical"], 1, np.random.default_rng(2))
        s = t.sum_marks[0]
        probs = dict(kernel(t, 0, reflect_root=False))
        assert sum(probs.values()) == pytest.approx(s / (1.0 + s))

    def test_unexpanded_rejected(self):
        t = generate_mt(LAWS["binary_half"], 1, np.random.default_rng(0))
        with pytest.raises(UnexpandedError):
            kernel(t, t.children(0)[0])

    def test_rayed_tree_always_has_parent(self):
        t = generate_imt(LAWS["binary_half"], 1, 0, np.random.default_rng(3))
        probs = dict(kernel(t, t.ray[-1]))
        assert sum(probs.values()) == pytest.approx(1.0)


class TestRunWalk:
    def test_zero_steps(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(0))
        traj = run_walk(t, None, 0, np.random.default_rng(1))
        assert traj.vertices == [0]

    def test_increments_are_unit(self):
        t = generate_mt(LAWS["two_atom_critical"], 0, np.random.default_rng(2))
        traj = run_walk(t, None, 5000, np.random.default_rng(3))
        lv = traj.levels
        for i in range(len(lv) - 1):
            d = lv[i + 1] - lv[i]
            assert d in (-1, 1)
            if lv[i] == 0:
                assert d == 1  # reflection at the root

    def test_balanced_updown_away_from_root(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(4))
        traj = run_walk(t, None, 10_000, np.random.default_rng(5))
        lv = traj.levels
        ups = total = 0
        for i in range(len(lv) - 1):
            if lv[i] > 0:
                total += 1
                ups += lv[i + 1] > lv[i]
        se = math.sqrt(0.25 / total)
        assert abs(ups / total - 0.5) <= 3 * se

    def test_regime_contrast_on_occupation(self):
        # positive recurrent walk hugs the root far more than the transient one
        def frac_below(law, seed):
            t = generate_mt(law, 0, np.random.default_rng(seed))
            traj = run_walk(t, None, 100_000, np.random.default_rng(seed + 1))
            lv = traj.levels
            return sum(1 for x in lv if x <= 3) / len(lv)

        assert frac_below(LAWS["binary_quarter"], 10) > frac_below(LAWS["binary_unit"], 20)

    def test_extinct_root(self):
        law = FiniteSupportLaw((Atom(1.0, 0, ()),))
        t = generate_mt(law, 0, np.random.default_rng(0))
        with pytest.raises(ExtinctError):
            run_walk(t, None, 5, np.random.default_rng(1))

    def test_negative_steps_rejected(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            run_walk(t, None, -1, np.random.default_rng(1))


class TestDeterminism:
    def test_same_seeds_same_trajectory(self):
        outs = []
        for _ in range(2):
            t = generate_mt(LAWS["two_atom_critical"], 0, np.random.default_rng(6))
            traj = run_walk(t, None, 2000, np.random.default_rng(7))
            outs.append(traj.vertices)
        assert outs[0] == outs[1]

    def test_walker_extension_continues_stream(self):
        t1 = generate_mt(LAWS["two_atom_critical"], 0, np.random.default_rng(8))
        one = run_walk(t1, None, 400, np.random.default_rng(9)).vertices
        t2 = generate_mt(LAWS["two_atom_critical"], 0, np.random.default_rng(8))
        w = Walker(t2, np.random.default_rng(9))
        w.advance(150)
        w.advance(250)
        assert w.path == one


class TestReversibility:
    def test_detailed_balance_sampled_trees(self):
        rep = check_detailed_balance(LAWS["two_atom_critical"], trees=5, depth=5, seed=3)
        assert rep.passed, rep.statistics

    def test_pi_omega_symmetry_direct(self):
        t = generate_mt(LAWS["two_atom_critical"], 5, np.random.default_rng(10))
        for v in range(1, len(t)):
            p = t.parent[v]
            if t.n_children[v] < 0 or p == t.root:
                continue
            k_p = dict(kernel(t, p))
            k_v = dict(kernel(t, v))
            lhs = invariant_measure(t, p) * k_p[v]
            rhs = invariant_measure(t, v) * k_v[p]
            assert abs(lhs - rhs) <= 1e-12


class TestViews:
    def test_environment_at_time_zero(self):
        t = generate_imt(LAWS["binary_half"], 2, 0, np.random.default_rng(11))
        traj = run_walk(t, None, 50, np.random.default_rng(12))
        view = environment_seen_from_particle(t, traj, 0)
        assert view.root == traj.vertices[0]

    def test_shift_composes_with_steps(self):
        t = generate_imt(LAWS["binary_half"], 2, 0, np.random.default_rng(13))
        traj = run_walk(t, None, 50, np.random.default_rng(14))
        for s in (1, 7, 23):
            assert environment_seen_from_particle(t, traj, s).root == traj.vertices[s]

    def test_out_of_range(self):
        t = generate_imt(LAWS["binary_half"], 2, 0, np.random.default_rng(15))
        traj = run_walk(t, None, 10, np.random.default_rng(16))
        with pytest.raises(ValueError):
            environment_seen_from_particle(t, traj, 99)


class TestTrajectoryMarkers:
    def test_first_passage_and_returns(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(17))
        traj = run_walk(t, None, 1000, np.random.default_rng(18))
        fp = traj.first_passage()
        assert fp[0] == 0
        for level, time_hit in fp.items():
            assert traj.levels[time_hit] == level
            assert level not in traj.levels[:time_hit]
        returns = traj.start_returns()
        assert all(traj.vertices[r] == traj.vertices[0] for r in returns)

    def test_step_once_matches_kernel_support(self):
        t = generate_mt(LAWS["two_atom_critical"], 2, np.random.default_rng(19))
        rng = np.random.default_rng(20)
        v = t.children(0)[0]
        nbrs = {nbr for nbr, _ in kernel(t, v)}
        for _ in range(50):
            assert step_once(t, v, rng) in nbrs
