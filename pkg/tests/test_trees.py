"""Tree arenas: generation, lazy growth, rayed trees, shifts, reproducibility."""

import io
import json
import math

import numpy as np
import pytest

from rwre.errors import NotFrontierError, SizeLimitError
from rwre.experiments import canonical_laws, check_change_of_law
from rwre.laws import Atom, FiniteSupportLaw
from rwre.trees import (
    dump_jsonl,
    expand_frontier,
    generate_imt,
    generate_mt,
    level_ids,
    shift,
)
from rwre.walk import run_walk

LAWS = canonical_laws()


class TestGenerateMt:
    def test_deterministic_binary_depth3(self):
        t = generate_mt(LAWS["binary_half"], 3, np.random.default_rng(0))
        assert len(t) == 15
        assert [t.cum[v] for v in level_ids(t, 3)] == [0.125] * 8
        assert t.frontier == set(level_ids(t, 3))
        assert [t.level[v] for v in level_ids(t, 2)] == [2, 2, 2, 2]

    def test_depth_zero(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(0))
        assert len(t) == 1
        assert t.frontier == {0}

    def test_cum_recursion(self):
        t = generate_mt(LAWS["two_atom_critical"], 6, np.random.default_rng(1))
        for v in range(1, len(t)):
            assert t.cum[v] == pytest.approx(t.cum[t.parent[v]] * t.mark[v], rel=1e-12)
            assert t.level[v] == t.level[t.parent[v]] + 1

    def test_extinction_frequency_matches_pgf_iteration(self):
        # offspring 0 w.p. 1/4, 2 w.p. 3/4; survival to depth 20 from the
        # fixed-point iteration of f(s) = 1/4 + 3/4 s^2
        law = FiniteSupportLaw((Atom(0.25, 0, ()), Atom(0.75, 2, (0.5, 0.5))))
        q = 0.0
        for _ in range(20):
            q = 0.25 + 0.75 * q * q
        p_survive = 1.0 - q
        n = 3000
        alive = sum(
            1 for j in range(n)
            if not generate_mt(law, 20, np.random.default_rng(1000 + j)).extinct
        )
        se = math.sqrt(p_survive * (1 - p_survive) / n)
        assert abs(alive / n - p_survive) <= 4 * se

    def test_size_cap(self):
        with pytest.raises(SizeLimitError):
            generate_mt(LAWS["binary_half"], 10, np.random.default_rng(0), size_cap=100)


class TestExpandFrontier:
    def test_expand_appends_children(self):
        law = FiniteSupportLaw((Atom(1.0, 3, (0.2, 0.3, 0.4)),))
        t = generate_mt(law, 0, np.random.default_rng(0))
        expand_frontier(t, 0)
        assert t.children(0) == [1, 2, 3]
        assert [t.mark[c] for c in t.children(0)] == [0.2, 0.3, 0.4]

    def test_double_expand_rejected(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(0))
        expand_frontier(t, 0)
        with pytest.raises(NotFrontierError):
            expand_frontier(t, 0)

    def test_lazy_walk_expansion_is_bounded(self):
        t = generate_mt(LAWS["binary_half"], 0, np.random.default_rng(2))
        steps = 10_000
        run_walk(t, None, steps, np.random.default_rng(3))
        assert len(t) <= 3 * steps + 3


class TestGenerateImt:
    def test_single_atom_structure(self):
        t = generate_imt(LAWS["binary_half"], 6, 1, np.random.default_rng(4))
        for k, v in enumerate(t.ray):
            assert t.level[v] == -k
            assert t.n_children[v] == 2
        # off-ray children of ray vertices hang at distance 1
        for v in t.ray[1:]:
            kids = t.children(v)
            assert len(kids) == 2
            assert any(t.ray_attach[c] == c for c in kids if c in t.ray)

    def test_ray_vertex_atom_frequencies_are_size_biased(self):
        t = generate_imt(LAWS["two_atom_critical"], 10_000, 0, np.random.default_rng(5))
        light = sum(1 for v in t.ray[1:] if abs(t.sum_marks[v] - 0.5) < 1e-9)
        n = len(t.ray) - 1
        se = math.sqrt(0.25 * 0.75 / n)
        assert abs(light / n - 0.25) <= 4 * se

    def test_root_mixture_draws_both_laws(self):
        # mixture weights for the two-atom law at v_0: (0.375, 0.625)
        n = 20_000
        light = 0
        for j in range(n):
            t = generate_imt(LAWS["two_atom_critical"], 1, 0,
                             np.random.default_rng(10_000 + j))
            if abs(t.sum_marks[0] - 0.5) < 1e-9:
                light += 1
        se = math.sqrt(0.375 * 0.625 / n)
        assert abs(light / n - 0.375) <= 4 * se

    def test_not_critical_propagates(self):
        from rwre.errors import NotCriticalError

        with pytest.raises(NotCriticalError):
            generate_imt(LAWS["binary_quarter"], 3, 1, np.random.default_rng(0))

    def test_cum_recursion_holds_on_ray(self):
        t = generate_imt(LAWS["two_atom_critical"], 8, 2, np.random.default_rng(6))
        for v in range(len(t)):
            p = t.parent[v]
            if p >= 0:
                assert t.cum[v] == pytest.approx(t.cum[p] * t.mark[v], rel=1e-12)


class TestShift:
    def test_identity(self):
        t = generate_imt(LAWS["binary_half"], 3, 1, np.random.default_rng(7))
        view = shift(t, t.root)
        assert view.root == t.root
        assert view.h(t.root) == 0

    def test_child_shift_rebases_h(self):
        t = generate_imt(LAWS["binary_half"], 3, 1, np.random.default_rng(8))
        c = t.children(t.root)[0]
        view = shift(t, c)
        assert view.h(t.root) == -1
        assert view.h(c) == 0

    def test_involution(self):
        t = generate_imt(LAWS["binary_half"], 3, 1, np.random.default_rng(9))
        c = t.children(t.root)[0]
        assert shift(shift(t, c), t.root) == shift(t, t.root)


class TestReproducibility:
    def test_same_seed_same_arena(self):
        a = generate_mt(LAWS["two_atom_critical"], 8, np.random.default_rng(11))
        b = generate_mt(LAWS["two_atom_critical"], 8, np.random.default_rng(11))
        assert a.parent == b.parent
        assert a.cum == b.cum
        assert a.mark[1:] == b.mark[1:]

    def test_lazy_walk_reproducible(self):
        outs = []
        for _ in range(2):
            t = generate_mt(LAWS["two_atom_critical"], 0, np.random.default_rng(12))
            traj = run_walk(t, None, 5000, np.random.default_rng(13))
            outs.append((list(t.parent), list(t.mark[1:]), list(traj.vertices)))
        assert outs[0] == outs[1]


class TestChangeOfLawIdentity:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_child_count_functional(self, n):
        rep = check_change_of_law(LAWS["two_atom_critical"], n, "child_count",
                                  replicas=20_000, seed=500 + n)
        assert rep.passed, rep.estimates


def test_dump_jsonl_schema():
    t = generate_mt(LAWS["binary_half"], 2, np.random.default_rng(1))
    buf = io.StringIO()
    dump_jsonl(t, buf)
    lines = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert len(lines) == len(t)
    assert lines[0]["parent"] == -1 and lines[0]["mark"] is None
    assert set(lines[1]) == {"id", "parent", "depth", "mark", "C"}
