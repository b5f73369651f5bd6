import math

import numpy as np
import pytest
import scipy.stats as st_sp
from hypothesis import given
from hypothesis import strategies as st

import parkflux as pf
from parkflux.distributions import DistSpec, InvalidSpec, NotCritical


def law(spec):
    return pf.make_law(spec)


class TestMakeLaw:
    def test_delta0_moments(self):
        d0 = law(DistSpec.finite([(0, 1.0)]))
        assert d0.mean == 0.0
        assert d0.variance == 0.0

    def test_geometric_half_moments(self):
        g = law(DistSpec.geometric(0.5))
        assert g.mean == pytest.approx(1.0, abs=1e-15)
        assert g.variance == pytest.approx(2.0, abs=1e-15)

    def test_poisson_moments(self):
        p = law(DistSpec.poisson(0.25))
        assert p.mean == 0.25
        assert p.variance == 0.25

    def test_binomial_moments(self):
        b = law(DistSpec.binomial(10, 0.3))
        assert b.mean == pytest.approx(3.0)
        assert b.variance == pytest.approx(2.1)

    def test_poisson_zero_rate_is_point_mass(self):
        p = law(DistSpec.poisson(0.0))
        assert p.pmf(0) == 1.0
        assert p.mean == 0.0

    @pytest.mark.parametrize("spec", [
        DistSpec.poisson(-1.0),
        DistSpec.geometric(0.0),
        DistSpec.geometric(1.5),
        DistSpec.binomial(-1, 0.5),
        DistSpec.binomial(3, 1.2),
        DistSpec.finite([(0, 0.5), (2, 0.6)]),
        DistSpec.finite([(0, -0.1), (2, 1.1)]),
        DistSpec.finite([(-1, 1.0)]),
        DistSpec.finite([(0, 0.5), (0, 0.5)]),
    ])
    def test_invalid_specs_rejected(self, spec):
        with pytest.raises(InvalidSpec):
            pf.make_law(spec)

    def test_finite_renormalized_within_tolerance(self):
        off = 1.0 + 4e-13
        f = law(DistSpec.finite([(0, 0.5 * off), (2, 0.5 * off)]))
        assert math.fsum(f.pmf(k) for k in (0, 2)) == pytest.approx(1.0, abs=1e-15)

    def test_spec_json_round_trip(self):
        for spec in (DistSpec.poisson(0.25), DistSpec.geometric(0.5),
                     DistSpec.binomial(7, 0.2),
                     DistSpec.finite([(0, 0.5), (2, 0.5)])):
            again = DistSpec.from_json_dict(spec.to_json_dict())
            assert again == spec

    def test_spec_json_rejects_unknown_keys(self):
        with pytest.raises(InvalidSpec):
            DistSpec.from_json_dict({"family": "poisson", "rate": 1.0, "x": 2})


class TestSizeBiased:
    def test_geometric_pmf_value(self, geo_half):
        nb = pf.size_biased(geo_half)
        # base pmf at 2 is 1/8, so the reweighted mass is 2/8
        assert nb.pmf(2) == pytest.approx(0.25, abs=1e-15)
        assert nb.pmf(0) == 0.0

    def test_mean_is_variance_plus_one(self, geo_half):
        assert pf.size_biased(geo_half).mean == pytest.approx(3.0, abs=1e-12)

    def test_two_point_law_becomes_point_mass(self):
        two = law(DistSpec.finite([(0, 0.5), (2, 0.5)]))
        nb = pf.size_biased(two)
        assert nb.pmf(2) == pytest.approx(1.0, abs=1e-15)
        assert nb.pmf(0) == 0.0
        assert nb.pmf(1) == 0.0

    def test_rejects_noncritical(self):
        with pytest.raises(NotCritical):
            pf.size_biased(law(DistSpec.poisson(0.9)))

    @given(frac=st.floats(0.05, 0.95), k=st.integers(2, 6))
    def test_mean_identity_on_random_critical_laws(self, frac, k):
        # mean-1 laws of the form {0: a, 1: b, k: c}
        c = frac / k
        b = 1.0 - k * c
        a = 1.0 - b - c
        lw = law(DistSpec.finite([(0, a), (1, b), (k, c)]))
        nb = pf.size_biased(lw)
        assert nb.mean == pytest.approx(lw.variance + 1.0, rel=1e-12)


class TestThin:
    def test_t0_is_point_mass_at_zero(self, poisson1):
        t = pf.thin(poisson1, 0.0)
        assert t.pmf(0) == pytest.approx(1.0)
        assert t.mean == 0.0

    def test_t1_is_base_law(self, poisson1):
        t = pf.thin(poisson1, 1.0)
        for k in range(8):
            assert t.pmf(k) == pytest.approx(poisson1.pmf(k), rel=1e-14)

    def test_half_poisson_mean(self):
        t = pf.thin(law(DistSpec.poisson(0.5)), 0.5)
        assert t.mean == pytest.approx(0.25, abs=1e-15)

    def test_mean_linear_on_grid(self, geo_half):
        for i in range(11):
            t = i / 10
            assert pf.thin(geo_half, t).mean == pytest.approx(
                t * geo_half.mean, abs=1e-12)

    @given(t=st.floats(0.0, 1.0))
    def test_variance_formula(self, t, geo_half):
        th = pf.thin(geo_half, t)
        m, s2 = geo_half.mean, geo_half.variance
        assert th.variance == pytest.approx(t * s2 + t * (1 - t) * m * m,
                                            abs=1e-12)

    def test_range_check(self, geo_half):
        with pytest.raises(ValueError):
            pf.thin(geo_half, 1.5)


class TestSampling:
    def test_point_mass_always_zero(self):
        d0 = law(DistSpec.finite([(0, 1.0)]))
        rng = np.random.default_rng(0)
        assert np.all(d0.sample_n(rng, 1000) == 0)

    def test_point_mass_always_three(self):
        d3 = law(DistSpec.finite([(3, 1.0)]))
        rng = np.random.default_rng(0)
        assert np.all(d3.sample_n(rng, 1000) == 3)

    def test_geometric_zero_frequency(self, geo_half):
        rng = np.random.default_rng(7)
        draws = geo_half.sample_n(rng, 10**6)
        p0 = np.mean(draws == 0)
        assert abs(p0 - 0.5) < 3 * math.sqrt(0.25 / 10**6)

    def test_single_draw_matches_contract(self, geo_half):
        a = geo_half.sample(np.random.default_rng(3))
        b = geo_half.sample(np.random.default_rng(3))
        assert a == b

    @pytest.mark.parametrize("spec", [
        DistSpec.poisson(0.25),
        DistSpec.geometric(0.5),
        DistSpec.binomial(7, 0.3),
        DistSpec.finite([(0, 0.5), (2, 0.3), (5, 0.2)]),
    ])
    def test_chisquare_each_family(self, spec):
        lw = pf.make_law(spec)
        rng = np.random.default_rng(42)
        n = 10**5
        draws = lw.sample_n(rng, n)
        kmax = int(draws.max())
        probs = np.array([lw.pmf(k) for k in range(kmax + 1)])
        tail = 1.0 - probs.sum()
        observed = np.bincount(draws, minlength=kmax + 1).astype(float)
        expected = probs * n
        # pool cells until every expected count is >= 10, tail included
        obs_c, exp_c = [], []
        o_acc = e_acc = 0.0
        for o, e in zip(observed, expected):
            o_acc += o
            e_acc += e
            if e_acc >= 10:
                obs_c.append(o_acc)
                exp_c.append(e_acc)
                o_acc = e_acc = 0.0
        obs_c[-1] += o_acc
        exp_c[-1] += e_acc + tail * n
        chi2 = float(np.sum((np.array(obs_c) - np.array(exp_c)) ** 2
                            / np.array(exp_c)))
        assert chi2 < st_sp.chi2.ppf(1 - 1e-3, len(obs_c) - 1)

    def test_chisquare_derived_law(self, geo_half):
        nb = pf.size_biased(geo_half)
        rng = np.random.default_rng(9)
        n = 10**5
        draws = nb.sample_n(rng, n)
        ks = np.arange(1, 30)
        probs = np.array([nb.pmf(int(k)) for k in ks])
        observed = np.array([(draws == k).sum() for k in ks], dtype=float)
        observed[-1] += (draws >= 30).sum()
        expected = probs * n
        expected[-1] += (1 - probs.sum()) * n
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        assert chi2 < st_sp.chi2.ppf(1 - 1e-3, len(ks) - 1)


class TestMomentConsistency:
    @pytest.mark.parametrize("build", [
        lambda: pf.make_law(DistSpec.poisson(0.25)),
        lambda: pf.make_law(DistSpec.poisson(1.0)),
        lambda: pf.make_law(DistSpec.geometric(0.5)),
        lambda: pf.make_law(DistSpec.binomial(6, 0.4)),
        lambda: pf.make_law(DistSpec.finite([(0, 0.5), (2, 0.5)])),
        lambda: pf.size_biased(pf.make_law(DistSpec.geometric(0.5))),
        lambda: pf.thin(pf.make_law(DistSpec.poisson(0.5)), 0.3),
    ])
    def test_stored_moments_match_pmf_sums(self, build):
        lw = build()
        m, v = lw.moments_from_pmf()
        assert m == pytest.approx(lw.mean, abs=1e-9)
        assert v == pytest.approx(lw.variance, abs=1e-9)

    def test_pmf_mass_covers_window(self, geo_half):
        ks = geo_half.support_upto(1e-12)
        total = math.fsum(geo_half.pmf(int(k)) for k in ks)
        assert total >= 1 - 1e-12


class TestCheckOffspring:
    def test_geometric_is_critical_aperiodic(self, geo_half):
        rep = pf.check_offspring(geo_half)
        assert rep.is_critical
        assert rep.period == 1
        assert not rep.is_delta1
        assert rep.variance == pytest.approx(2.0)

    def test_delta1_flagged(self):
        rep = pf.check_offspring(law(DistSpec.finite([(1, 1.0)])))
        assert rep.is_delta1

    def test_two_point_law_has_period_two(self):
        rep = pf.check_offspring(law(DistSpec.finite([(0, 0.5), (2, 0.5)])))
        assert rep.is_critical
        assert rep.period == 2
        assert not rep.is_delta1

    def test_subcritical_not_critical(self):
        rep = pf.check_offspring(law(DistSpec.poisson(0.25)))
        assert not rep.is_critical
