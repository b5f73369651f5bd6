import math
import warnings

import numpy as np
import pytest

import parkflux as pf
from parkflux import montecarlo as mc
from parkflux.distributions import DistSpec


@pytest.fixture(scope="module")
def poisson_quarter_cars():
    return pf.make_law(DistSpec.poisson(0.25))


@pytest.fixture(scope="module")
def zero_cars():
    return pf.make_law(DistSpec.finite([(0, 1.0)]))


class TestEstimateHelpers:
    def test_plain_mean_and_se(self):
        vals = np.array([1.0, 2.0, 3.0, 4.0])
        est = mc._estimate_from_values(vals, seed=5, overflow_count=0)
        assert est.point == pytest.approx(2.5)
        assert est.std_error == pytest.approx(np.std(vals, ddof=1) / 2)
        assert est.se_method == "mean"
        assert est.seed == 5

    def test_median_of_means_trips_on_heavy_tail(self):
        rng = np.random.default_rng(0)
        vals = np.zeros(4096)
        vals[rng.integers(0, 4096, 4)] = 1e6
        est = mc._estimate_from_values(vals, seed=0, overflow_count=0)
        assert est.se_method == "median_of_means"

    def test_empty_raises(self):
        with pytest.raises(pf.AllOverflowed):
            mc._estimate_from_values(np.array([]), seed=0, overflow_count=3)

    def test_ks_distance(self):
        a = np.array([0, 0, 1, 2])
        b = np.array([0, 1, 1, 2])
        assert mc.ks_distance(a, b) == pytest.approx(0.25)
        assert mc.ks_distance(a, a) == 0.0


class TestMeanFlux:
    def test_zero_cars_exactly_zero(self, poisson1, zero_cars):
        est = pf.estimate_mean_flux(poisson1, zero_cars, reps=2000, cap=10**4,
                                    seed=1)
        assert est.point == 0.0
        assert est.std_error == 0.0
        assert not est.diverged

    def test_subcritical_matches_closed_form(self, poisson1,
                                             poisson_quarter_cars):
        est = pf.estimate_mean_flux(poisson1, poisson_quarter_cars,
                                    reps=3 * 10**4, cap=10**5, seed=2)
        target = 0.75 - math.sqrt(0.5)
        assert abs(est.point - target) < 3 * est.std_error + 0.002
        assert not est.diverged
        assert est.notes["cap_shift_se"] < 1.0

    def test_supercritical_flagged_as_growing_with_cap(self, poisson1):
        cars = pf.make_law(DistSpec.poisson(0.75))
        est = pf.estimate_mean_flux(poisson1, cars, reps=2 * 10**4, cap=10**4,
                                    seed=3)
        assert est.diverged
        assert est.notes["doubled_cap_point"] > est.point + 3 * est.std_error

    def test_reproducible_and_worker_invariant(self, poisson1,
                                               poisson_quarter_cars):
        kw = dict(reps=6000, cap=10**4, seed=77)
        a = pf.estimate_mean_flux(poisson1, poisson_quarter_cars, **kw)
        b = pf.estimate_mean_flux(poisson1, poisson_quarter_cars, **kw)
        c = pf.estimate_mean_flux(poisson1, poisson_quarter_cars, workers=2,
                                  **kw)
        for other in (b, c):
            assert a.point == other.point
            assert a.std_error == other.std_error
            assert a.overflow_count == other.overflow_count
            assert a.notes == other.notes

    def test_delta1_offspring_rejected(self, poisson_quarter_cars):
        d1 = pf.make_law(DistSpec.finite([(1, 1.0)]))
        with pytest.raises(pf.Delta1Offspring):
            pf.estimate_mean_flux(d1, poisson_quarter_cars, 100, 10**3, 0)

    def test_delta1_cars_warn(self, poisson1):
        d1 = pf.make_law(DistSpec.finite([(1, 1.0)]))
        with pytest.warns(mc.CarsDeltaOneWarning):
            est = pf.estimate_mean_flux(poisson1, d1, 400, 10**4, 0)
        assert est.point == 0.0  # every car parks on its own spot

    def test_all_overflowed(self, poisson1, poisson_quarter_cars):
        # tiny cap and few replicates; seed found so every tree is large
        for seed in range(200):
            flux, sizes, _, over = mc._run_gw_blocks(
                poisson1, poisson_quarter_cars, 3, 2 * 2, seed,
                mc._T_OFFSPRING, mc._T_LABELS)
            if np.all(over | (sizes > 2)):
                with pytest.raises(pf.AllOverflowed):
                    pf.estimate_mean_flux(poisson1, poisson_quarter_cars,
                                          reps=3, cap=2, seed=seed)
                return
        pytest.fail("no seed produced three oversized trees")


class TestRootParkedProb:
    def test_zero_cars(self, poisson1, zero_cars):
        est = pf.estimate_root_parked_prob(poisson1, zero_cars, 2000, 10**4, 1)
        assert est.point == 0.0

    def test_subcritical_matches_mean(self, poisson1, poisson_quarter_cars):
        est = pf.estimate_root_parked_prob(poisson1, poisson_quarter_cars,
                                           reps=2 * 10**4, cap=10**5, seed=4)
        assert abs(est.point - 0.25) < 3 * est.std_error + 0.002


class TestConditionedFlux:
    def test_zero_cars(self, poisson1, zero_cars):
        est = pf.estimate_flux_conditioned(poisson1, zero_cars, n=50,
                                           reps=50, seed=0)
        assert est.point == 0.0

    def test_subcritical_small(self, poisson1, poisson_quarter_cars):
        est = pf.estimate_flux_conditioned(poisson1, poisson_quarter_cars,
                                           n=2000, reps=60, seed=5)
        assert est.point < 0.01

    def test_inadmissible(self, poisson_quarter_cars):
        two = pf.make_law(DistSpec.finite([(0, 0.5), (2, 0.5)]))
        with pytest.raises(pf.Inadmissible):
            pf.estimate_flux_conditioned(two, poisson_quarter_cars, n=4,
                                         reps=10, seed=0)

    def test_reproducible(self, poisson1, poisson_quarter_cars):
        a = pf.estimate_flux_conditioned(poisson1, poisson_quarter_cars,
                                         n=500, reps=40, seed=9)
        b = pf.estimate_flux_conditioned(poisson1, poisson_quarter_cars,
                                         n=500, reps=40, seed=9, workers=2)
        assert a.point == b.point and a.std_error == b.std_error


class TestWalkRepresentation:
    def test_walk_path_running_max(self):
        wp = pf.WalkPath.from_increment_draws(np.array([2, 0, 0, 3, 0]))
        assert wp.increments.tolist() == [1, -1, -1, 2, -1]
        assert wp.partial_sums.tolist() == [1, 0, -1, 1, 0]
        assert wp.running_max.tolist() == [1, 1, 1, 1, 1]
        assert wp.truncated_flux(0) == 1
        assert wp.truncated_flux(2) == 1

    def test_truncated_flux_monotone_in_horizon(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            z = rng.poisson(0.9, 60)
            wp = pf.WalkPath.from_increment_draws(z)
            fl = [wp.truncated_flux(h) for h in range(60)]
            assert all(a <= b for a, b in zip(fl, fl[1:]))

    def test_zero_cars_zero_flux(self, poisson1, zero_cars):
        d = pf.estimate_flux_infinite_walk(poisson1, zero_cars, H=20,
                                           reps=500, flux_pool_size=2000,
                                           seed=0, cap=10**4)
        assert np.all(d.samples == 0)
        assert not d.diverged

    def test_direct_zero_cars(self, poisson1, zero_cars):
        d = pf.estimate_flux_infinite_direct(poisson1, zero_cars, H=10,
                                             reps=200, seed=0, cap=10**5)
        assert np.all(d.samples == 0)

    def test_direct_and_walk_agree_subcritical(self, poisson1,
                                               poisson_quarter_cars):
        d = pf.estimate_flux_infinite_direct(
            poisson1, poisson_quarter_cars, H=40, reps=3000, seed=21,
            cap=10**6, graft_depth=96)
        w = pf.estimate_flux_infinite_walk(
            poisson1, poisson_quarter_cars, H=40, reps=3000,
            flux_pool_size=10**5, seed=21, cap=10**5)
        assert mc.ks_distance(d.samples, w.samples) < 0.04

    def test_pool_warning(self, poisson1, poisson_quarter_cars):
        with pytest.warns(pf.PoolTooSmallWarning):
            pf.estimate_flux_infinite_walk(poisson1, poisson_quarter_cars,
                                           H=50, reps=2000,
                                           flux_pool_size=500, seed=0,
                                           cap=10**4)

    def test_walk_reproducible(self, poisson1, poisson_quarter_cars):
        kw = dict(H=25, reps=1500, flux_pool_size=20000, seed=8, cap=10**4)
        a = pf.estimate_flux_infinite_walk(poisson1, poisson_quarter_cars, **kw)
        b = pf.estimate_flux_infinite_walk(poisson1, poisson_quarter_cars, **kw)
        assert np.array_equal(a.samples, b.samples)

    def test_divergence_flag_mechanism(self):
        assert mc._divergence_flag(np.array([2000] * 10 + [0] * 10))
        assert not mc._divergence_flag(np.array([2000] + [0] * 999))


class TestSpineIncrements:
    def test_mean_increment_subcritical(self, poisson1, poisson_quarter_cars):
        est = pf.estimate_mean_increment(poisson1, poisson_quarter_cars,
                                         reps=2 * 10**4, seed=6, cap=10**5)
        target = 0.25 + (0.75 - math.sqrt(0.5))
        assert abs(est.point - target) < 3 * est.std_error + 0.003

    def test_negative_drift_subcritical(self, poisson1, poisson_quarter_cars):
        est = pf.estimate_mean_increment(poisson1, poisson_quarter_cars,
                                         reps=2 * 10**4, seed=7, cap=10**5)
        assert est.point - 1.0 < -3 * est.std_error

    def test_critical_drift_within_noise(self, poisson1):
        # truncating trees at the cap biases the critical mean downward a
        # little; the cap is pushed up so the bias sits inside three SEs
        cars = pf.make_law(DistSpec.poisson(0.5))
        est = pf.estimate_mean_increment(poisson1, cars, reps=2000, seed=8,
                                         cap=10**7)
        assert abs(est.point - 1.0) <= 3 * est.std_error

    def test_structural_identity_against_own_pool(self, poisson1):
        # the increment mean must equal Sigma2 * mean(pool) + m for the very
        # pool the increments resample, independent of any truncation
        cars = pf.make_law(DistSpec.poisson(0.5))
        pool, _ = mc.flux_pool(poisson1, cars, 3 * 10**4, cap=10**5, seed=11)
        sampler = pf.SpineIncrementSampler(
            offspring=poisson1, size_biased_law=pf.size_biased(poisson1),
            cars=cars, flux_values=pool)
        rng = mc.stream(123, 50, 0)
        z = sampler.sample_n(rng, 4 * 10**4)
        lhs = z.mean()
        rhs = 1.0 * pool.mean() + 0.5
        se = z.std(ddof=1) / math.sqrt(z.shape[0]) + \
            pool.std(ddof=1) / math.sqrt(pool.shape[0])
        assert abs(lhs - rhs) < 4 * se


class TestSpinalCheck:
    def test_impossible_subtree_size_gives_zero_both_sides(self, geo_half):
        chk = pf.spinal_check(geo_half, h0=1, k=0, reps=4000, seed=0,
                              cap=10**4)
        assert chk.lhs.point == 0.0
        assert chk.rhs.point == 0.0

    def test_root_level_equals_single_vertex_mass(self, geo_half):
        chk = pf.spinal_check(geo_half, h0=0, k=1, reps=3 * 10**4, seed=1,
                              cap=10**5)
        assert abs(chk.lhs.point - 0.5) < 4 * chk.lhs.std_error
        assert abs(chk.rhs.point - 0.5) < 4 * chk.rhs.std_error

    def test_sides_agree(self, geo_half):
        chk = pf.spinal_check(geo_half, h0=1, k=1, reps=4 * 10**4, seed=2,
                              cap=10**5)
        assert chk.disagreement_sigma < 3.5

    def test_pruned_spine_point_height(self, geo_half):
        # the construction guarantee the right side leans on: pruning the
        # truncated surviving tree at the top spine vertex leaves that
        # vertex at its own height
        rng = np.random.default_rng(5)
        for h in (0, 1, 3):
            s = pf.sample_kesten_truncated(geo_half, H=h, rng=rng, cap=10**5)
            pt = pf.pruned(s.tree, int(s.spine[h]))
            assert pt.tree.depths()[pt.point] == h

    def test_reproducible(self, geo_half):
        a = pf.spinal_check(geo_half, h0=1, k=2, reps=4000, seed=3, cap=10**4)
        b = pf.spinal_check(geo_half, h0=1, k=2, reps=4000, seed=3, cap=10**4)
        assert a.lhs.point == b.lhs.point
        assert a.rhs.point == b.rhs.point


class TestSweep:
    def test_empty_grid(self, poisson1):
        assert pf.sweep(poisson1, "poisson", [], seed=0) == []

    def test_single_subcritical_row(self, poisson1):
        cfg = pf.SweepPointConfig(reps_flux=2000, reps_parked=2000, n=200,
                                  reps_conditioned=20, cap=10**4)
        rows = pf.sweep(poisson1, "poisson", [0.25], seed=42, config=cfg)
        assert len(rows) == 1
        row = rows[0]
        assert row.error is None
        assert row.regime == "subcritical"
        assert row.theta == pytest.approx(0.5)
        assert row.phi1_closed == pytest.approx(0.75 - math.sqrt(0.5))
        assert abs(row.mean_flux - row.phi1_closed) < 5 * row.mean_flux_se
        assert row.seed == mc.point_seed(42, 0)

    def test_regime_flips_across_geometric_transition(self, geo_half):
        m_star = math.sqrt(2) - 1
        cfg = pf.SweepPointConfig(reps_flux=200, reps_parked=200, n=50,
                                  reps_conditioned=5, cap=10**4)
        rows = pf.sweep(geo_half, "poisson", [m_star - 0.05, m_star + 0.05],
                        seed=1, config=cfg)
        assert rows[0].regime == "subcritical"
        assert rows[1].regime == "supercritical"

    def test_car_law_means(self):
        for fam, kw in (("poisson", {}), ("geometric", {}),
                        ("binomial", {"trials": 4})):
            law = mc.car_law_for(fam, 0.3, **kw)
            assert law.mean == pytest.approx(0.3, rel=1e-12)


class TestSeeding:
    def test_stream_is_deterministic(self):
        a = mc.stream(5, 1, 2).integers(0, 2**63, 4)
        b = mc.stream(5, 1, 2).integers(0, 2**63, 4)
        assert np.array_equal(a, b)

    def test_streams_differ_across_indices(self):
        a = mc.stream(5, 1, 2).integers(0, 2**63, 4)
        b = mc.stream(5, 1, 3).integers(0, 2**63, 4)
        c = mc.stream(5, 2, 2).integers(0, 2**63, 4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_seed_wraps(self):
        assert mc.norm_seed(-1) == 2**64 - 1
