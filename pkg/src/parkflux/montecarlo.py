"""Monte Carlo estimators for every quantity in the phase-transition picture.

Seeding contract: every estimator takes an integer seed and derives all of
its randomness through `stream(seed, tag, index)`, i.e.
numpy SeedSequence((seed, tag, index)).  Replicates are grouped into fixed
blocks of BLOCK trees, one derived stream per block, so results are
bit-identical for a given (config, seed) regardless of how many worker
threads execute the blocks.  Merging is always by block index.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, parking, theory, trees
from .distributions import DistSpec, LawHandle, make_law, size_biased
from .trees import DEFAULT_CAP

BLOCK = 4096
WALK_SLAB = 16384
_MOM_BLOCKS = 16
_KURTOSIS_TRIP = 100.0
DIVERGENCE_FLUX = 1000
DIVERGENCE_PREVALENCE = 0.01

# stream purpose tags (part of the documented seed-splitting rule)
_T_OFFSPRING = 1
_T_LABELS = 2
_T_CONDITIONED = 3
_T_KESTEN = 4
_T_POOL_OFF = 5
_T_POOL_LAB = 6
_T_WALK = 7
_T_SPINAL_LHS_OFF = 8
_T_SPINAL_RHS = 9
_T_INCREMENT = 10
_T_INCREMENT_POOL = 11
_T_SWEEP = 12


class AllOverflowed(RuntimeError):
    """Every replicate hit the vertex cap; no estimate is possible."""


class PoolTooSmallWarning(UserWarning):
    """Walk-representation flux pool is heavily resampled."""


class CarsDeltaOneWarning(UserWarning):
    """Car law is the point mass at one (degenerate but allowed)."""


def norm_seed(seed: int) -> int:
    return int(seed) & (2**64 - 1)


def stream(seed: int, tag: int, index: int) -> np.random.Generator:
    """The one and only seed-splitting rule used by the estimators."""
    return np.random.default_rng(
        np.random.SeedSequence((norm_seed(seed), int(tag), int(index))))


def _check_model(offspring: LawHandle, cars: LawHandle) -> None:
    trees._require_offspring(offspring, critical=True)
    if cars.is_delta(1):
        warnings.warn("car law is the point mass at 1; every car parks on "
                      "its own spot", CarsDeltaOneWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# point estimates


@dataclass(eq=False)
class Estimate:
    point: float
    std_error: float
    replicates: int
    overflow_count: int
    diverged: bool
    seed: int
    se_method: str = "mean"
    notes: dict = field(default_factory=dict)


def _estimate_from_values(values: np.ndarray, seed: int, overflow_count: int,
                          diverged: bool = False, notes: dict | None = None,
                          ) -> Estimate:
    """Plain mean with sd/sqrt(n) errors; switches to median-of-means over 16
    blocks when the sample kurtosis looks untrustworthy (heavy tails)."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n == 0:
        raise AllOverflowed("no replicates survived the vertex cap")
    mu = float(values.mean())
    if n == 1:
        return Estimate(point=mu, std_error=math.inf, replicates=1,
                        overflow_count=overflow_count, diverged=diverged,
                        seed=seed, notes=notes or {})
    sd = float(values.std(ddof=1))
    method = "mean"
    point = mu
    se = sd / math.sqrt(n)
    if sd > 0 and n >= 16 * _MOM_BLOCKS:
        centered = values - mu
        kurt = float(np.mean(centered**4)) / sd**4 - 3.0
        if kurt > _KURTOSIS_TRIP:
            blocks = np.array_split(values, _MOM_BLOCKS)
            bmeans = np.array([b.mean() for b in blocks])
            point = float(np.median(bmeans))
            se = 1.2533141373155003 * float(bmeans.std(ddof=1)) / \
                math.sqrt(_MOM_BLOCKS)
            method = "median_of_means"
    return Estimate(point=point, std_error=se, replicates=int(n),
                    overflow_count=int(overflow_count), diverged=diverged,
                    seed=seed, se_method=method, notes=notes or {})


# ---------------------------------------------------------------------------
# block engine for unconditioned trees


def _gw_block(offspring: LawHandle, cars: LawHandle | None, n_trees: int,
              parse_cap: int, seed: int, tag_off: int, tag_lab: int,
              block_index: int, max_depth: int):
    """Sample and park n_trees unconditioned trees from this block's streams.
    Returns (flux, size, root_occupied, overflowed) arrays."""
    rng_o = stream(seed, tag_off, block_index)
    rng_l = stream(seed, tag_lab, block_index) if cars is not None else None
    out_flux = np.empty(n_trees, dtype=np.int64)
    out_size = np.empty(n_trees, dtype=np.int64)
    out_occ = np.empty(n_trees, dtype=np.uint8)
    out_over = np.empty(n_trees, dtype=np.uint8)
    rem = np.empty(parse_cap + 2, dtype=np.int64)
    acc = np.empty(parse_cap + 2, dtype=np.int64)
    left_d = np.empty(0, dtype=np.int64)
    left_l = np.empty(0, dtype=np.int64)
    done = 0
    avg = 256.0
    while done < n_trees:
        chunk = int(min(max(avg * (n_trees - done) * 1.25, 8192),
                        float(1 << 22)))
        d = np.concatenate([left_d, offspring.sample_n(rng_o, chunk)])
        l = np.concatenate([left_l, cars.sample_n(rng_l, chunk)]) \
            if cars is not None else np.zeros_like(d)
        done2, du, lu = _kernels.flux_stream(
            d, l, n_trees, parse_cap, max_depth, rem, acc,
            out_flux, out_size, out_occ, out_over, done)
        if done2 > done:
            produced = float(out_size[done:done2].sum())
            avg = max(64.0, 0.5 * avg + 0.5 * produced / (done2 - done))
        done = done2
        left_d = d[du:]
        left_l = l[lu:] if cars is not None else left_l
    return out_flux, out_size, out_occ.astype(bool), out_over.astype(bool)


def _run_gw_blocks(offspring: LawHandle, cars: LawHandle | None, reps: int,
                   parse_cap: int, seed: int, tag_off: int, tag_lab: int,
                   workers: int = 1,
                   max_depth: int = int(_kernels.NO_DEPTH_LIMIT)):
    spans = [(b, min(BLOCK, reps - b * BLOCK))
             for b in range((reps + BLOCK - 1) // BLOCK)]

    def job(span):
        b, m = span
        return _gw_block(offspring, cars, m, parse_cap, seed, tag_off,
                         tag_lab, b, max_depth)

    if workers <= 1 or len(spans) == 1:
        parts = [job(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, spans))
    flux = np.concatenate([p[0] for p in parts])
    sizes = np.concatenate([p[1] for p in parts])
    occ = np.concatenate([p[2] for p in parts])
    over = np.concatenate([p[3] for p in parts])
    return flux, sizes, occ, over


def _capped_estimate(values_all: np.ndarray, sizes: np.ndarray,
                     over_parsed: np.ndarray, cap: int, seed: int) -> Estimate:
    """Estimate at the requested cap from a parse that ran at twice the cap,
    with the doubled-cap result kept as a coupled sensitivity diagnostic."""
    over_at_cap = over_parsed | (sizes > cap)
    kept = values_all[~over_at_cap]
    if kept.shape[0] == 0:
        raise AllOverflowed(
            f"all {values_all.shape[0]} replicates exceeded cap {cap}")
    kept2 = values_all[~over_parsed]
    point2 = float(kept2.mean()) if kept2.shape[0] else math.nan
    est = _estimate_from_values(kept.astype(np.float64), seed,
                                overflow_count=int(over_at_cap.sum()))
    shift = point2 - est.point
    est.notes.update({
        "cap": int(cap),
        "doubled_cap_point": point2,
        "doubled_cap_overflow": int(over_parsed.sum()),
        "cap_shift": shift,
        "cap_shift_se": abs(shift) / est.std_error if est.std_error > 0
        else (0.0 if shift == 0 else math.inf),
    })
    if est.std_error > 0 and abs(shift) > 3 * est.std_error:
        est.diverged = True
    return est


def estimate_mean_flux(offspring: LawHandle, cars: LawHandle, reps: int,
                       cap: int = DEFAULT_CAP, seed: int = 0,
                       workers: int = 1) -> Estimate:
    """Mean outgoing flux over independent (tree, arrivals) samples.  Trees
    past the cap are dropped and counted; the run is internally parsed at
    twice the cap so the doubled-cap estimate in `notes` shares the same
    draws (diverged is set when doubling moves the point by > 3 SE)."""
    _check_model(offspring, cars)
    flux, sizes, _, over = _run_gw_blocks(offspring, cars, reps, 2 * cap,
                                          seed, _T_OFFSPRING, _T_LABELS,
                                          workers)
    return _capped_estimate(flux.astype(np.float64), sizes, over, cap, seed)


def estimate_root_parked_prob(offspring: LawHandle, cars: LawHandle,
                              reps: int, cap: int = DEFAULT_CAP, seed: int = 0,
                              workers: int = 1) -> Estimate:
    """Probability that the root ends up occupied."""
    _check_model(offspring, cars)
    _, sizes, occ, over = _run_gw_blocks(offspring, cars, reps, 2 * cap,
                                         seed, _T_OFFSPRING, _T_LABELS,
                                         workers)
    return _capped_estimate(occ.astype(np.float64), sizes, over, cap, seed)


# ---------------------------------------------------------------------------
# size-conditioned trees


def conditioned_flux_samples(offspring: LawHandle, cars: LawHandle, n: int,
                             reps: int, seed: int = 0,
                             workers: int = 1) -> np.ndarray:
    """Raw flux of `reps` independent n-vertex conditioned trees."""
    _check_model(offspring, cars)
    if not trees.admissible_size(offspring, n):
        raise trees.Inadmissible(f"no tree with {n} vertices has positive mass")

    def job(r):
        rng = stream(seed, _T_CONDITIONED, r)
        degs = trees.conditioned_degrees(offspring, n, rng)
        labels = cars.sample_n(rng, n)
        rem = np.empty(n + 2, dtype=np.int64)
        acc = np.empty(n + 2, dtype=np.int64)
        f = np.empty(1, dtype=np.int64)
        s = np.empty(1, dtype=np.int64)
        o = np.empty(1, dtype=np.uint8)
        ov = np.empty(1, dtype=np.uint8)
        _kernels.flux_stream(degs, labels, 1, n + 1,
                             _kernels.NO_DEPTH_LIMIT, rem, acc, f, s, o, ov, 0)
        return int(f[0])

    if workers <= 1:
        vals = [job(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(job, range(reps)))
    return np.array(vals, dtype=np.int64)


def estimate_flux_conditioned(offspring: LawHandle, cars: LawHandle, n: int,
                              reps: int, seed: int = 0,
                              workers: int = 1) -> Estimate:
    """Mean of flux/n over exact n-vertex conditioned samples."""
    flux = conditioned_flux_samples(offspring, cars, n, reps, seed, workers)
    est = _estimate_from_values(flux.astype(np.float64) / n, seed,
                                overflow_count=0)
    est.notes["n"] = int(n)
    return est


# ---------------------------------------------------------------------------
# flux on the truncated surviving tree, two independent routes


@dataclass(eq=False)
class FluxDistribution:
    """Empirical flux law from one of the two infinite-tree routes."""

    samples: np.ndarray
    replicates: int
    overflow_count: int
    diverged: bool
    seed: int
    method: str

    def histogram(self) -> dict:
        vals, counts = np.unique(self.samples, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


def _divergence_flag(samples: np.ndarray) -> bool:
    if samples.shape[0] == 0:
        return False
    frac = float(np.mean(samples > DIVERGENCE_FLUX))
    return frac >= DIVERGENCE_PREVALENCE


def estimate_flux_infinite_direct(offspring: LawHandle, cars: LawHandle,
                                  H: int, reps: int, seed: int = 0,
                                  cap: int = DEFAULT_CAP,
                                  graft_depth: int | None = 256,
                                  workers: int = 1) -> FluxDistribution:
    """Materialize truncated spine trees and park them.

    graft_depth caps how deep the grafted subtrees are grown; in the
    subcritical regime (this estimator's intended domain) flux contributions
    decay geometrically with depth, so the default truncation is far below
    any observable bias while keeping the expected work per graft finite.
    Pass None for the untruncated law.
    """
    _check_model(offspring, cars)
    nu_bar = size_biased(offspring)

    def job(r):
        rng = stream(seed, _T_KESTEN, r)
        # flux is invariant under planar order, so the estimator skips the
        # planar materialization (the slot draws are still consumed)
        st = trees._sample_kesten(offspring, nu_bar, H, rng, cap, graft_depth,
                                  materialize_planar=False)
        if isinstance(st, trees.OverflowMark):
            return None
        labels = parking.assign_arrivals(st.tree, cars, rng)
        return parking.park(st.tree, labels).flux

    if workers <= 1:
        vals = [job(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(job, range(reps)))
    samples = np.array([v for v in vals if v is not None], dtype=np.int64)
    overflow = sum(1 for v in vals if v is None)
    if samples.shape[0] == 0:
        raise AllOverflowed(f"all {reps} spine trees exceeded cap {cap}")
    return FluxDistribution(samples=samples, replicates=reps,
                            overflow_count=overflow,
                            diverged=_divergence_flag(samples), seed=seed,
                            method="direct")


@dataclass(eq=False)
class SpineIncrementSampler:
    """Draws of Z = sum_{i<Y-1} F_i + P: the car load arriving at one spine
    vertex after the side branches have parked (Y size-biased, F_i flux
    draws resampled from a pool, P a car arrival)."""

    offspring: LawHandle
    size_biased_law: LawHandle
    cars: LawHandle
    flux_values: np.ndarray

    def sample_n(self, rng: np.random.Generator, size: int) -> np.ndarray:
        y = self.size_biased_law.sample_n(rng, size)
        needs = y - 1
        total = int(needs.sum())
        picks = rng.integers(0, self.flux_values.shape[0], total) \
            if total else np.empty(0, dtype=np.int64)
        side = _segment_sums(self.flux_values[picks], needs.ravel())
        return side.reshape(np.shape(y)) + self.cars.sample_n(rng, size)


def _segment_sums(values: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    cs = np.concatenate([[0], np.cumsum(values)])
    ends = np.cumsum(lengths)
    return cs[ends] - cs[ends - lengths]


@dataclass(eq=False)
class WalkPath:
    """The spine load walk: increments Z-1, their partial sums, and the
    running maximum whose positive part is the flux at each horizon."""

    increments: np.ndarray
    partial_sums: np.ndarray
    running_max: np.ndarray

    @staticmethod
    def from_increment_draws(z: np.ndarray) -> "WalkPath":
        inc = np.asarray(z, dtype=np.int64) - 1
        ps = np.cumsum(inc)
        return WalkPath(increments=inc, partial_sums=ps,
                        running_max=np.maximum.accumulate(ps))

    def truncated_flux(self, h: int) -> int:
        return int(max(self.running_max[h], 0))


def flux_pool(offspring: LawHandle, cars: LawHandle, pool_size: int,
              cap: int = DEFAULT_CAP, seed: int = 0,
              workers: int = 1) -> tuple[np.ndarray, int]:
    """Independent flux draws for the walk representation (cap overflows are
    dropped and counted, a conditioning the pool's consumers inherit)."""
    flux, _, _, over = _run_gw_blocks(offspring, cars, pool_size, cap, seed,
                                      _T_POOL_OFF, _T_POOL_LAB, workers)
    kept = flux[~over]
    if kept.shape[0] == 0:
        raise AllOverflowed("flux pool empty: every tree overflowed")
    return kept, int(over.sum())


def estimate_flux_infinite_walk(offspring: LawHandle, cars: LawHandle, H: int,
                                reps: int, flux_pool_size: int, seed: int = 0,
                                cap: int = DEFAULT_CAP,
                                workers: int = 1) -> FluxDistribution:
    """Flux at the root of the truncated surviving tree via the running
    maximum of the spine load walk, never materializing a tree."""
    _check_model(offspring, cars)
    nu_bar = size_biased(offspring)
    expected_use = reps * (H + 1) * max(nu_bar.mean - 1.0, 0.0)
    if expected_use > 10.0 * flux_pool_size:
        warnings.warn(
            f"flux pool of {flux_pool_size} will be resampled ~"
            f"{expected_use / flux_pool_size:.0f} times over",
            PoolTooSmallWarning, stacklevel=2)
    pool, pool_overflow = flux_pool(offspring, cars, flux_pool_size, cap,
                                    seed, workers)
    sampler = SpineIncrementSampler(offspring=offspring,
                                    size_biased_law=nu_bar, cars=cars,
                                    flux_values=pool)
    rng = stream(seed, _T_WALK, 0)
    out = np.empty(reps, dtype=np.int64)
    hgrid = np.arange(1, H + 2)
    done = 0
    while done < reps:
        s = min(WALK_SLAB, reps - done)
        z = sampler.sample_n(rng, (s, H + 1))
        w = np.cumsum(z, axis=1) - hgrid
        out[done:done + s] = np.maximum(w.max(axis=1), 0)
        done += s
    return FluxDistribution(samples=out, replicates=reps,
                            overflow_count=pool_overflow,
                            diverged=_divergence_flag(out), seed=seed,
                            method="walk")


def estimate_mean_increment(offspring: LawHandle, cars: LawHandle, reps: int,
                            seed: int = 0, cap: int = DEFAULT_CAP,
                            workers: int = 1) -> Estimate:
    """Mean of Z from fresh flux draws (each side branch sampled once)."""
    _check_model(offspring, cars)
    nu_bar = size_biased(offspring)
    rng = stream(seed, _T_INCREMENT, 0)
    y = nu_bar.sample_n(rng, reps)
    needs = y - 1
    total = int(needs.sum())
    draws = np.empty(0, dtype=np.int64)
    batch = 0
    while draws.shape[0] < total:
        want = max(total - draws.shape[0], 1)
        # distinct tag pair per top-up batch so streams never repeat
        flux, _, _, over = _run_gw_blocks(
            offspring, cars, int(want * 1.02) + 16, cap, seed,
            1000 + 2 * batch, 1001 + 2 * batch, workers)
        draws = np.concatenate([draws, flux[~over]])
        batch += 1
    side = _segment_sums(draws[:total], needs)
    z = side + cars.sample_n(rng, reps)
    return _estimate_from_values(z.astype(np.float64), seed, overflow_count=0)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample sup difference of empirical distribution functions."""
    a = np.sort(np.asarray(a))
    b = np.sort(np.asarray(b))
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / a.shape[0]
    fb = np.searchsorted(b, grid, side="right") / b.shape[0]
    return float(np.max(np.abs(fa - fb)))


# ---------------------------------------------------------------------------
# spinal identity check


@dataclass(eq=False)
class SpinalCheck:
    lhs: Estimate
    rhs: Estimate

    @property
    def disagreement_sigma(self) -> float:
        se = math.hypot(self.lhs.std_error, self.rhs.std_error)
        diff = abs(self.lhs.point - self.rhs.point)
        return diff / se if se > 0 else (0.0 if diff == 0 else math.inf)


def spinal_check(offspring: LawHandle, h0: int, k: int, reps: int,
                 seed: int = 0, cap: int = DEFAULT_CAP,
                 spine_cap: int = 100_000, workers: int = 1) -> SpinalCheck:
    """Monte Carlo check of the spine reweighting identity for the functional
    F = 1{point at height h0, descendant subtree of k vertices}.

    Left side: over unconditioned trees, count vertices at height h0 whose
    subtree has k vertices.  Right side: over independent replicates, build
    the below-the-point part of the truncated surviving tree (spine to h0
    with side branches strictly below, exactly the pruned law) and evaluate F
    against an independent tree, whose size is probed lazily up to k+1
    vertices.  Both sides return standard errors.
    """
    trees._require_offspring(offspring, critical=True)
    if h0 < 0 or k < 0:
        raise ValueError("need h0 >= 0 and k >= 0")
    lhs = _spinal_lhs(offspring, h0, k, reps, seed, cap, workers)
    rhs = _spinal_rhs(offspring, h0, k, reps, seed, spine_cap)
    return SpinalCheck(lhs=lhs, rhs=rhs)


def _spinal_lhs(offspring: LawHandle, h0: int, k: int, reps: int, seed: int,
                cap: int, workers: int) -> Estimate:
    def job(span):
        b, m = span
        rng = stream(seed, _T_SPINAL_LHS_OFF, b)
        out_count = np.empty(m, dtype=np.int64)
        out_size = np.empty(m, dtype=np.int64)
        out_over = np.empty(m, dtype=np.uint8)
        ws = np.empty(2 * (cap + 2), dtype=np.int64)
        left = np.empty(0, dtype=np.int64)
        done = 0
        avg = 256.0
        while done < m:
            chunk = int(min(max(avg * (m - done) * 1.25, 8192),
                            float(1 << 22)))
            d = np.concatenate([left, offspring.sample_n(rng, chunk)])
            done2, used = _kernels.top_shape_count_stream(
                d, m, cap, h0, k, ws, out_count, out_size, out_over, done)
            if done2 > done:
                produced = float(out_size[done:done2].sum())
                avg = max(64.0, 0.5 * avg + 0.5 * produced / (done2 - done))
            done = done2
            left = d[used:]
        return out_count, out_over.astype(bool)

    spans = [(b, min(BLOCK, reps - b * BLOCK))
             for b in range((reps + BLOCK - 1) // BLOCK)]
    if workers <= 1 or len(spans) == 1:
        parts = [job(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, spans))
    counts = np.concatenate([p[0] for p in parts])
    over = np.concatenate([p[1] for p in parts])
    kept = counts[~over]
    if kept.shape[0] == 0:
        raise AllOverflowed("all trees overflowed on the vertex-sum side")
    return _estimate_from_values(kept.astype(np.float64), seed,
                                 overflow_count=int(over.sum()))


def _spinal_rhs(offspring: LawHandle, h0: int, k: int, reps: int, seed: int,
                spine_cap: int) -> Estimate:
    """The spine side, batched.  The functional only reads the distinguished
    point's height (h0 by construction, checked in tests) and the size of
    the independent tree, so side branches are sampled for their sizes alone
    to apply the cap, and the independent tree is grown just past k."""
    rng = stream(seed, _T_SPINAL_RHS, 0)
    nu_bar = size_biased(offspring)
    if h0 > 0:
        y = nu_bar.sample_n(rng, (reps, h0))
        graft_counts = (y - 1).sum(axis=1)
        total = int(graft_counts.sum())
        sizes = np.empty(total, dtype=np.int64)
        over = np.empty(total, dtype=np.uint8)
        done = 0
        left = np.empty(0, dtype=np.int64)
        avg = 256.0
        while done < total:
            chunk = int(min(max(avg * (total - done) * 1.25, 8192),
                            float(1 << 22)))
            d = np.concatenate([left, offspring.sample_n(rng, chunk)])
            done2, used = _kernels.sizes_stream(d, total, spine_cap, sizes,
                                                over, done)
            if done2 > done:
                produced = float(sizes[done:done2].sum())
                avg = max(64.0, 0.5 * avg + 0.5 * produced / (done2 - done))
            done = done2
            left = d[used:]
        graft_over = _segment_sums(over.astype(np.int64), graft_counts) > 0
        graft_total = _segment_sums(sizes, graft_counts)
        valid = (~graft_over) & (graft_total + h0 + 1 <= spine_cap)
    else:
        valid = np.ones(reps, dtype=bool)
    # independent tree, probed only as far as needed to decide |T| == k
    t_sizes = np.empty(reps, dtype=np.int64)
    t_over = np.empty(reps, dtype=np.uint8)
    done = 0
    left = np.empty(0, dtype=np.int64)
    while done < reps:
        chunk = int(min(max((k + 2.0) * (reps - done) * 1.5, 8192),
                        float(1 << 22)))
        d = np.concatenate([left, offspring.sample_n(rng, chunk)])
        done2, used = _kernels.sizes_stream(d, reps, k + 1, t_sizes, t_over,
                                            done)
        done = done2
        left = d[used:]
    indicator = (t_over == 0) & (t_sizes == k)
    kept = indicator[valid]
    if kept.shape[0] == 0:
        raise AllOverflowed("all spine replicates overflowed")
    return _estimate_from_values(kept.astype(np.float64), seed,
                                 overflow_count=int((~valid).sum()))


# ---------------------------------------------------------------------------
# parameter sweep


@dataclass
class SweepPointConfig:
    reps_flux: int = 20_000
    reps_parked: int = 20_000
    n: int = 10_000
    reps_conditioned: int = 200
    cap: int = DEFAULT_CAP
    workers: int = 1


@dataclass
class SweepRow:
    m: float
    theta: float | None = None
    regime: str | None = None
    phi1_closed: float | None = None
    mean_flux: float | None = None
    mean_flux_se: float | None = None
    parked_prob: float | None = None
    parked_prob_se: float | None = None
    flux_per_n: float | None = None
    flux_per_n_se: float | None = None
    overflow_frac: float | None = None
    seed: int | None = None
    error: str | None = None


def car_law_for(family: str, m: float, trials: int | None = None) -> LawHandle:
    """A car law of the given family with mean m."""
    if family == "poisson":
        return make_law(DistSpec.poisson(m))
    if family == "geometric":
        return make_law(DistSpec.geometric(1.0 / (1.0 + m)))
    if family == "binomial":
        if trials is None or not 0 < m <= trials:
            raise ValueError("binomial car family needs trials >= m > 0")
        return make_law(DistSpec.binomial(trials, m / trials))
    raise ValueError(f"unsupported sweep car family {family!r}")


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(
        (norm_seed(seed), _T_SWEEP, int(index))).generate_state(1, np.uint64)[0])


def sweep(offspring: LawHandle, car_family: str, m_grid, seed: int = 0,
          config: SweepPointConfig | None = None,
          trials: int | None = None) -> list[SweepRow]:
    """One row per car mean: closed forms plus the three core estimators,
    each point reproducible from the seed recorded in its row."""
    cfg = config or SweepPointConfig()
    rows = []
    for i, m in enumerate(m_grid):
        ps = point_seed(seed, i)
        row = SweepRow(m=float(m), seed=ps)
        try:
            cars = car_law_for(car_family, float(m), trials)
            params = theory.ModelParams.from_laws(cars, offspring)
            rep = theory.classify(params)
            row.theta = rep.theta
            row.regime = rep.regime.value
            try:
                row.phi1_closed = theory.phi_closed_form(1.0, params)
            except ValueError:
                row.phi1_closed = math.inf
            ef = estimate_mean_flux(offspring, cars, cfg.reps_flux, cfg.cap,
                                    ps, cfg.workers)
            row.mean_flux, row.mean_flux_se = ef.point, ef.std_error
            row.overflow_frac = ef.overflow_count / ef.replicates \
                if ef.replicates else None
            ep = estimate_root_parked_prob(offspring, cars, cfg.reps_parked,
                                           cfg.cap, ps, cfg.workers)
            row.parked_prob, row.parked_prob_se = ep.point, ep.std_error
            en = estimate_flux_conditioned(offspring, cars, cfg.n,
                                           cfg.reps_conditioned, ps,
                                           cfg.workers)
            row.flux_per_n, row.flux_per_n_se = en.point, en.std_error
        except Exception as exc:  # noqa: BLE001 - per-point failures go in the row
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows
