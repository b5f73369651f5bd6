import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import parkflux as pf

from conftest import car_order, labeled_trees


def degrees(*d):
    return pf.Tree.from_preorder_degrees(np.array(d, dtype=np.int64))


def labels(*counts):
    return pf.CarLabels(counts=np.array(counts, dtype=np.int64))


class TestParkExamples:
    def test_single_vertex_three_cars(self):
        res = pf.park(degrees(0), labels(3))
        assert res.flux == 2
        assert res.occupied.tolist() == [True]
        assert res.edge_flux.tolist() == [2]

    def test_branching_example_everything_parks(self):
        # root with children a and b, a has child c; one car on a and b,
        # two on c: c keeps one and sends one down, a is taken so it passes
        # through to the root, b's car parks at b
        t = degrees(2, 1, 0, 0)  # preorder: root, a, c, b
        res = pf.park(t, labels(0, 1, 2, 1))
        assert res.flux == 0
        assert res.occupied.all()
        assert res.edge_flux.tolist() == [0, 1, 1, 0]

    def test_path_example(self):
        res = pf.park(degrees(1, 1, 0), labels(0, 1, 2))
        assert res.flux == 0
        assert res.edge_flux[1] == 1
        assert res.edge_flux[2] == 1

    def test_label_mismatch(self):
        with pytest.raises(pf.LabelMismatch):
            pf.park(degrees(1, 0), labels(1))
        with pytest.raises(pf.LabelMismatch):
            pf.park(degrees(1, 0), labels(1, -2))


class TestSequentialOracle:
    def test_single_vertex_any_order(self):
        t = degrees(0)
        res = pf.park_sequential(t, labels(3), [0, 0, 0])
        assert res.flux == 2

    def test_bad_permutation(self):
        t = degrees(1, 0)
        with pytest.raises(pf.BadPermutation):
            pf.park_sequential(t, labels(1, 1), [0, 0])
        with pytest.raises(pf.BadPermutation):
            pf.park_sequential(t, labels(1, 0), [0, 1])
        with pytest.raises(pf.BadPermutation):
            pf.park_sequential(t, labels(1, 0), [5])

    @given(labeled_trees(), st.randoms(use_true_random=False))
    def test_matches_fast_pass(self, tl, pyrandom):
        tree, lab = tl
        order = [int(v) for v in np.repeat(np.arange(tree.n), lab.counts)]
        pyrandom.shuffle(order)
        fast = pf.park(tree, lab)
        slow = pf.park_sequential(tree, lab, order)
        assert fast.flux == slow.flux
        assert np.array_equal(fast.occupied, slow.occupied)
        assert np.array_equal(fast.edge_flux, slow.edge_flux)

    def test_reversed_vs_forward_orders_agree(self):
        rng = np.random.default_rng(33)
        geo = pf.make_law(pf.DistSpec.geometric(0.5))
        cars = pf.make_law(pf.DistSpec.poisson(0.8))
        for _ in range(100):
            t = pf.sample_gw_conditioned(geo, int(rng.integers(1, 30)), rng)
            lab = pf.assign_arrivals(t, cars, rng)
            order = car_order(rng, lab.counts)
            a = pf.park_sequential(t, lab, order)
            b = pf.park_sequential(t, lab, order[::-1])
            assert a.flux == b.flux
            assert np.array_equal(a.occupied, b.occupied)


class TestInvariants:
    @given(labeled_trees())
    def test_conservation(self, tl):
        tree, lab = tl
        res = pf.park(tree, lab)
        assert int(lab.counts.sum()) == res.flux + int(res.occupied.sum())

    @given(labeled_trees(), st.integers(0, 10**6))
    def test_adding_a_car_is_monotone(self, tl, pick):
        tree, lab = tl
        v = pick % tree.n
        before = pf.park(tree, lab)
        bumped = lab.counts.copy()
        bumped[v] += 1
        after = pf.park(tree, pf.CarLabels(counts=bumped))
        assert after.flux >= before.flux
        # occupied vertices never free up when cars are added
        assert np.all(after.occupied >= before.occupied)

    @given(labeled_trees(), st.randoms(use_true_random=False))
    def test_planar_order_irrelevant(self, tl, pyrandom):
        tree, lab = tl
        base = pf.park(tree, lab)
        tree._ensure_children()
        new_list = tree.child_list.copy()
        for v in range(tree.n):
            a, b = tree.child_start[v], tree.child_start[v + 1]
            block = new_list[a:b].tolist()
            pyrandom.shuffle(block)
            new_list[a:b] = block
        shuffled = tree.with_children_order(new_list)
        res = pf.park(shuffled, lab)
        assert res.flux == base.flux
        assert np.array_equal(res.occupied, base.occupied)
        assert np.array_equal(res.edge_flux, base.edge_flux)

    @given(labeled_trees())
    def test_free_root_means_no_flux(self, tl):
        tree, lab = tl
        res = pf.park(tree, lab)
        if not res.occupied[tree.root]:
            assert res.flux == 0

    def test_deep_path_does_not_overflow_stack(self):
        n = 200_000
        t = pf.Tree.from_preorder_degrees(
            np.array([1] * (n - 1) + [0], dtype=np.int64))
        counts = np.zeros(n, dtype=np.int64)
        counts[-1] = 5
        res = pf.park(t, pf.CarLabels(counts=counts))
        assert res.flux == 0
        assert int(res.occupied.sum()) == 5


class TestAssignArrivals:
    def test_zero_car_law(self):
        t = degrees(1, 1, 0)
        d0 = pf.make_law(pf.DistSpec.finite([(0, 1.0)]))
        lab = pf.assign_arrivals(t, d0, np.random.default_rng(0))
        assert lab.counts.tolist() == [0, 0, 0]

    def test_constant_two_law(self):
        t = degrees(1, 1, 0)
        c2 = pf.make_law(pf.DistSpec.finite([(2, 1.0)]))
        lab = pf.assign_arrivals(t, c2, np.random.default_rng(0))
        assert lab.counts.tolist() == [2, 2, 2]

    def test_empirical_mean(self):
        n = 10**6
        t = pf.Tree.from_parent_array(
            np.concatenate([[-1], np.zeros(n - 1, dtype=np.int64)]))
        cars = pf.make_law(pf.DistSpec.poisson(0.6))
        lab = pf.assign_arrivals(t, cars, np.random.default_rng(1))
        se = np.sqrt(0.6 / n)
        assert abs(lab.counts.mean() - 0.6) < 3 * se

    def test_times_drawn_on_request(self):
        t = degrees(0)
        cars = pf.make_law(pf.DistSpec.poisson(0.5))
        lab = pf.assign_arrivals(t, cars, np.random.default_rng(2),
                                 with_times=True)
        assert lab.times is not None and 0 <= lab.times[0] < 1


class TestThinnedParking:
    def _labeled(self, seed=0):
        rng = np.random.default_rng(seed)
        geo = pf.make_law(pf.DistSpec.geometric(0.5))
        cars = pf.make_law(pf.DistSpec.poisson(0.7))
        t = pf.sample_gw_conditioned(geo, 40, rng)
        return t, pf.assign_arrivals(t, cars, rng, with_times=True)

    def test_time_zero_no_cars(self):
        t, lab = self._labeled()
        assert pf.park_thinned(t, lab, 0.0).flux == 0

    def test_time_one_equals_full_parking(self):
        t, lab = self._labeled()
        full = pf.park(t, lab)
        thinned = pf.park_thinned(t, lab, 1.0)
        assert thinned.flux == full.flux
        assert np.array_equal(thinned.occupied, full.occupied)

    def test_flux_monotone_in_time(self):
        for seed in range(20):
            t, lab = self._labeled(seed)
            fluxes = [pf.park_thinned(t, lab, u / 10).flux
                      for u in range(11)]
            assert all(a <= b for a, b in zip(fluxes, fluxes[1:]))

    def test_missing_times(self):
        t = degrees(0)
        with pytest.raises(pf.MissingTimes):
            pf.park_thinned(t, pf.CarLabels(counts=np.array([1])), 0.5)
