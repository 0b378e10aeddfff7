"""Mark-law sampling, size-biasing, and config parsing."""

import json
import math

import numpy as np
import pytest
import scipy.integrate

from rwre.errors import ConfigError, NotCriticalError
from rwre.laws import (
    Atom,
    FiniteSupportLaw,
    MarkDistSpec,
    OffspringSpec,
    ParametricLaw,
    law_from_config,
    load_law,
    size_bias,
)

TWO_ATOM = FiniteSupportLaw((Atom(0.5, 2, (0.25, 0.25)), Atom(0.5, 2, (0.75, 0.75))))


def freq_se(p, n):
    return math.sqrt(p * (1 - p) / n)


class TestValidation:
    def test_prob_sum_must_be_one(self):
        with pytest.raises(ConfigError):
            FiniteSupportLaw((Atom(0.5, 1, (1.0,)), Atom(0.4, 1, (1.0,))))

    def test_marks_length_must_match_count(self):
        with pytest.raises(ConfigError):
            Atom(1.0, 2, (0.5,))

    def test_marks_positive(self):
        with pytest.raises(ConfigError):
            Atom(1.0, 1, (0.0,))

    def test_parametric_ellipticity_window(self):
        with pytest.raises(ConfigError):
            ParametricLaw(
                offspring=OffspringSpec.fixed(2),
                mark_mode="independent",
                marks=MarkDistSpec("uniform", (0.01, 0.5)),
                eps0=0.1,
            )


class TestSampling:
    def test_single_atom_deterministic(self):
        law = FiniteSupportLaw((Atom(1.0, 2, (0.5, 0.5)),))
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert law.sample(rng) == (2, (0.5, 0.5))

    def test_atom_frequencies(self):
        rng = np.random.default_rng(1)
        n = 100_000
        hits = sum(1 for _ in range(n) if TWO_ATOM.sample(rng)[1][0] == 0.25)
        assert abs(hits / n - 0.5) <= 3 * freq_se(0.5, n)

    def test_shared_marks_equal_across_siblings(self):
        law = ParametricLaw(
            offspring=OffspringSpec.fixed(3),
            mark_mode="shared",
            marks=MarkDistSpec("uniform", (0.3, 0.7)),
            eps0=0.2,
        )
        rng = np.random.default_rng(2)
        for _ in range(50):
            n, marks = law.sample(rng)
            assert n == 3
            assert len(set(marks)) == 1

    def test_sample_many_matches_support(self):
        rng = np.random.default_rng(3)
        counts, marks = TWO_ATOM.sample_many(1000, rng)
        assert counts.sum() == len(marks)
        assert set(np.round(marks, 12)) <= {0.25, 0.75}

    def test_rho_moment_matches_empirical(self):
        # empirical mean of sum(mark^alpha) against the exact rho
        rng = np.random.default_rng(4)
        n = 100_000
        counts, marks = TWO_ATOM.sample_many(n, rng)
        seg = np.concatenate(([0], np.cumsum(counts[:-1])))
        for alpha in (0.0, 0.5, 1.0, 2.0):
            vals = np.add.reduceat(marks ** alpha, seg)
            se = vals.std(ddof=1) / math.sqrt(n)
            assert abs(vals.mean() - TWO_ATOM.rho_exact(alpha)) <= 4 * se

    def test_reproducible_streams(self):
        a = [TWO_ATOM.sample(np.random.default_rng(7)) for _ in range(1)]
        draws1 = [TWO_ATOM.sample(np.random.default_rng(42)) for _ in range(100)]
        draws2 = [TWO_ATOM.sample(np.random.default_rng(42)) for _ in range(100)]
        assert draws1 == draws2


class TestSizeBias:
    def test_weights_two_atom(self):
        sb = size_bias(TWO_ATOM)
        assert sb.atom_weights == pytest.approx((0.25, 0.75), abs=1e-12)

    def test_single_atom_weight_one(self):
        sb = size_bias(FiniteSupportLaw((Atom(1.0, 2, (0.5, 0.5)),)))
        assert sb.atom_weights == pytest.approx((1.0,))

    def test_not_critical_rejected(self):
        # E[sum marks] = 0.5*2 + 0.5*0.5 = 1.25
        law = FiniteSupportLaw((Atom(0.5, 2, (1.0, 1.0)), Atom(0.5, 1, (0.5,))))
        assert law.rho_exact(1.0) == pytest.approx(1.25)
        with pytest.raises(NotCriticalError):
            size_bias(law)

    def test_marginal_atom_frequencies(self):
        sb = size_bias(TWO_ATOM)
        rng = np.random.default_rng(5)
        n = 50_000
        hits = sum(1 for _ in range(n) if sb.sample_with_ray_child(rng)[1][0] == 0.25)
        assert abs(hits / n - 0.25) <= 4 * freq_se(0.25, n)

    def test_ray_child_uniform_for_equal_marks(self):
        sb = size_bias(FiniteSupportLaw((Atom(1.0, 2, (0.5, 0.5)),)))
        rng = np.random.default_rng(6)
        n = 100_000
        zeros = sum(1 for _ in range(n) if sb.sample_with_ray_child(rng)[2] == 0)
        assert abs(zeros / n - 0.5) <= 3 * freq_se(0.5, n)

    def test_ray_child_single_child(self):
        sb = size_bias(FiniteSupportLaw((Atom(1.0, 1, (1.0,)),)))
        rng = np.random.default_rng(7)
        assert all(sb.sample_with_ray_child(rng)[2] == 0 for _ in range(20))

    def test_ray_child_mark_proportional(self):
        sb = size_bias(FiniteSupportLaw((Atom(1.0, 2, (0.75, 0.25)),)))
        rng = np.random.default_rng(8)
        n = 100_000
        zeros = sum(1 for _ in range(n) if sb.sample_with_ray_child(rng)[2] == 0)
        assert abs(zeros / n - 0.75) <= 3 * freq_se(0.75, n)

    def test_parametric_rejection_sampling(self):
        # shared uniform marks on 2 children: critical since E[2B] = 1
        law = ParametricLaw(
            offspring=OffspringSpec.fixed(2),
            mark_mode="shared",
            marks=MarkDistSpec("uniform", (0.3, 0.7)),
            eps0=0.2,
        )
        assert law.rho_exact(1.0) == pytest.approx(1.0)
        sb = size_bias(law)
        rng = np.random.default_rng(9)
        n = 20_000
        vals = np.array([sum(sb.sample(rng)[1]) for _ in range(n)])
        # E under the reweighted law of the total mark is E_q[(sum marks)^2]
        target = 4 * (0.5 ** 2 + 0.4 ** 2 / 12)
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - target) <= 4 * se


class TestParametricMoments:
    @pytest.mark.parametrize("kind,params", [
        ("uniform", (0.3, 0.9)),
        ("log_uniform", (0.25, 0.8)),
    ])
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
    def test_moment_against_quadrature(self, kind, params, alpha):
        dist = MarkDistSpec(kind, params)
        lo, hi = params
        if kind == "uniform":
            density = lambda x: 1.0 / (hi - lo)
        else:
            span = math.log(hi / lo)
            density = lambda x: 1.0 / (x * span)
        want, _ = scipy.integrate.quad(lambda x: x ** alpha * density(x), lo, hi)
        assert dist.moment(alpha) == pytest.approx(want, rel=1e-9)
        want_log, _ = scipy.integrate.quad(
            lambda x: x ** alpha * math.log(x) * density(x), lo, hi
        )
        assert dist.log_moment(alpha) == pytest.approx(want_log, rel=1e-9)

    def test_two_point_moments(self):
        dist = MarkDistSpec("two_point", (0.5, 2.0, 0.25))
        assert dist.moment(2.0) == pytest.approx(0.25 * 0.25 + 0.75 * 4.0)
        assert dist.log_moment(1.0) == pytest.approx(
            0.25 * 0.5 * math.log(0.5) + 0.75 * 2.0 * math.log(2.0)
        )


class TestConfig:
    def test_finite_roundtrip(self):
        cfg = {"kind": "finite",
               "atoms": [[0.5, 2, [0.25, 0.25]], [0.5, 2, [0.75, 0.75]]]}
        law = law_from_config(cfg)
        assert law == TWO_ATOM

    def test_parametric_config(self):
        cfg = {
            "kind": "parametric",
            "eps0": 0.2,
            "offspring": {"categorical": [[1, 0.5], [3, 0.5]]},
            "marks": {"mode": "independent", "dist": "two_point",
                      "params": [0.4, 0.6, 0.5]},
        }
        law = law_from_config(cfg)
        assert law.offspring.values == (1, 3)
        assert law.rho_exact(1.0) == pytest.approx(2.0 * 0.5)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            law_from_config({"kind": "nope"})

    def test_load_toml_and_json(self, tmp_path):
        toml_path = tmp_path / "law.toml"
        toml_path.write_text(
            'kind = "finite"\natoms = [[1.0, 2, [0.5, 0.5]]]\n'
        )
        law = load_law(str(toml_path))
        assert law.atoms[0].marks == (0.5, 0.5)
        json_path = tmp_path / "law.json"
        json_path.write_text(json.dumps(
            {"kind": "finite", "atoms": [[1.0, 2, [0.5, 0.5]]]}
        ))
        assert load_law(str(json_path)) == law
