"""Discrete probability laws on {0, 1, 2, ...}.

Construction and validation of the built-in families (poisson, geometric on
the nonnegative integers, binomial, finite), exact moments, exact sampling,
size-biasing, and Bernoulli thinning.  A LawHandle is immutable after
construction and safe to share across threads; random draws always come from
a caller-owned numpy Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

CRITICAL_TOL = 1e-9
_FINITE_NORM_TOL = 1e-12
_TAIL_EPS = 1e-15


class InvalidSpec(ValueError):
    """Distribution parameters out of range or a finite pmf that does not
    normalize."""


class NotCritical(ValueError):
    """An operation that requires an offspring law with mean exactly 1."""


@dataclass(frozen=True)
class DistSpec:
    """Serializable description of one of the built-in families."""

    family: str
    rate: float | None = None          # poisson
    prob: float | None = None          # geometric / binomial success prob
    trials: int | None = None          # binomial
    pmf: tuple[tuple[int, float], ...] | None = None  # finite

    @staticmethod
    def poisson(rate: float) -> "DistSpec":
        return DistSpec(family="poisson", rate=float(rate))

    @staticmethod
    def geometric(prob: float) -> "DistSpec":
        return DistSpec(family="geometric", prob=float(prob))

    @staticmethod
    def binomial(trials: int, prob: float) -> "DistSpec":
        return DistSpec(family="binomial", trials=int(trials), prob=float(prob))

    @staticmethod
    def finite(pairs: Iterable[tuple[int, float]]) -> "DistSpec":
        return DistSpec(family="finite",
                        pmf=tuple((int(k), float(p)) for k, p in pairs))

    def validate(self) -> None:
        if self.family == "poisson":
            if self.rate is None or not math.isfinite(self.rate) or self.rate < 0:
                raise InvalidSpec(f"poisson rate must be >= 0, got {self.rate}")
        elif self.family == "geometric":
            if self.prob is None or not 0 < self.prob <= 1:
                raise InvalidSpec(f"geometric success prob must be in (0, 1], got {self.prob}")
        elif self.family == "binomial":
            if self.trials is None or self.trials < 0:
                raise InvalidSpec(f"binomial trials must be >= 0, got {self.trials}")
            if self.prob is None or not 0 <= self.prob <= 1:
                raise InvalidSpec(f"binomial prob must be in [0, 1], got {self.prob}")
        elif self.family == "finite":
            if not self.pmf:
                raise InvalidSpec("finite law needs at least one (value, prob) pair")
            vals = [k for k, _ in self.pmf]
            if len(set(vals)) != len(vals):
                raise InvalidSpec("finite law has duplicate support values")
            for k, p in self.pmf:
                if k < 0:
                    raise InvalidSpec(f"finite law support must be nonnegative, got {k}")
                if not math.isfinite(p) or p < 0:
                    raise InvalidSpec(f"finite law probabilities must be >= 0, got {p}")
            total = math.fsum(p for _, p in self.pmf)
            if abs(total - 1.0) > _FINITE_NORM_TOL:
                raise InvalidSpec(f"finite law probabilities sum to {total!r}, not 1")
        else:
            raise InvalidSpec(f"unknown family {self.family!r}")

    def to_json_dict(self) -> dict:
        if self.family == "poisson":
            return {"family": "poisson", "rate": self.rate}
        if self.family == "geometric":
            return {"family": "geometric", "prob": self.prob}
        if self.family == "binomial":
            return {"family": "binomial", "trials": self.trials, "prob": self.prob}
        return {"family": "finite", "pmf": [[k, p] for k, p in self.pmf]}

    @staticmethod
    def from_json_dict(d: dict) -> "DistSpec":
        if not isinstance(d, dict) or "family" not in d:
            raise InvalidSpec(f"not a distribution spec: {d!r}")
        fam = d["family"]
        allowed = {
            "poisson": {"family", "rate"},
            "geometric": {"family", "prob"},
            "binomial": {"family", "trials", "prob"},
            "finite": {"family", "pmf"},
        }
        if fam not in allowed:
            raise InvalidSpec(f"unknown family {fam!r}")
        extra = set(d) - allowed[fam]
        if extra:
            raise InvalidSpec(f"unknown keys for {fam}: {sorted(extra)}")
        if fam == "poisson":
            spec = DistSpec.poisson(d["rate"])
        elif fam == "geometric":
            spec = DistSpec.geometric(d["prob"])
        elif fam == "binomial":
            spec = DistSpec.binomial(d["trials"], d["prob"])
        else:
            spec = DistSpec.finite(tuple((k, p) for k, p in d["pmf"]))
        spec.validate()
        return spec


@dataclass(frozen=True, eq=False)
class LawHandle:
    """A validated law with exact moments, a pmf, and exact samplers.

    `kind` is one of the four base families plus the derived forms
    "size_biased" and "thinned"; derived handles keep a reference to their
    base.  variance may be math.inf for laws flagged as infinite-variance.
    """

    kind: str
    mean: float
    variance: float
    spec: DistSpec | None = None
    base: "LawHandle | None" = None
    thin_t: float | None = None
    _values: np.ndarray = field(default=None, repr=False)
    _cdf: np.ndarray = field(default=None, repr=False)

    # -- pmf ---------------------------------------------------------------

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        if self.kind == "poisson":
            lam = self.spec.rate
            if lam == 0.0:
                return 1.0 if k == 0 else 0.0
            return math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))
        if self.kind == "geometric":
            p = self.spec.prob
            return p * (1.0 - p) ** k
        if self.kind == "binomial":
            n, p = self.spec.trials, self.spec.prob
            if k > n:
                return 0.0
            return math.comb(n, k) * p**k * (1.0 - p) ** (n - k)
        if self.kind == "finite":
            for v, p in self.spec.pmf:
                if v == k:
                    return p
            return 0.0
        if self.kind == "size_biased":
            return k * self.base.pmf(k)
        if self.kind == "thinned":
            t = self.thin_t
            out = t * self.base.pmf(k)
            if k == 0:
                out += 1.0 - t
            return out
        raise AssertionError(self.kind)

    def pmf_window(self, kmax: int) -> np.ndarray:
        """pmf values on 0..kmax inclusive."""
        return np.array([self.pmf(k) for k in range(kmax + 1)])

    def support_upto(self, tail: float = _TAIL_EPS) -> np.ndarray:
        """Support values carrying all but `tail` of the mass, in order."""
        vals, _ = _inversion_table(self, tail)
        return vals

    # -- sampling ----------------------------------------------------------

    def sample_n(self, rng: np.random.Generator, size) -> np.ndarray:
        """Exact i.i.d. draws as int64; native numpy samplers for the base
        families, inversion from a cumulative table otherwise."""
        if self.kind == "poisson":
            return rng.poisson(self.spec.rate, size).astype(np.int64, copy=False)
        if self.kind == "geometric":
            return rng.geometric(self.spec.prob, size).astype(np.int64, copy=False) - 1
        if self.kind == "binomial":
            return rng.binomial(self.spec.trials, self.spec.prob, size).astype(
                np.int64, copy=False)
        if self.kind == "thinned":
            keep = rng.random(size) < self.thin_t
            draws = self.base.sample_n(rng, size)
            return np.where(keep, draws, 0)
        vals, cdf = self._table()
        u = rng.random(size)
        idx = np.searchsorted(cdf, u, side="right")
        if np.any(idx >= len(vals)):
            # astronomically unlikely tail beyond the cached table
            vals, cdf = _inversion_table(self, tail=0.0, at_least=float(np.max(u)))
            idx = np.searchsorted(cdf, u, side="right")
            idx = np.minimum(idx, len(vals) - 1)
        return vals[idx]

    def sample(self, rng: np.random.Generator) -> int:
        return int(self.sample_n(rng, 1)[0])

    def _table(self):
        return self._values, self._cdf

    # -- misc --------------------------------------------------------------

    def is_delta(self, at: int) -> bool:
        return self.pmf(at) >= 1.0 - _FINITE_NORM_TOL

    def moments_from_pmf(self, tail: float = _TAIL_EPS) -> tuple[float, float]:
        """Mean and variance recomputed by direct summation over a window
        holding all but `tail` of the mass (independent of stored moments)."""
        ks, _ = _inversion_table(self, tail)
        ps = np.array([self.pmf(int(k)) for k in ks])
        m = float(np.sum(ks * ps))
        v = float(np.sum(ks.astype(float) ** 2 * ps) - m * m)
        return m, v


def _hard_support_bound(law: LawHandle) -> int | None:
    """Largest possible support value when the law is bounded, else None."""
    if law.kind == "binomial":
        return law.spec.trials
    if law.kind == "finite":
        return max(k for k, _ in law.spec.pmf)
    if law.kind in ("size_biased", "thinned"):
        return _hard_support_bound(law.base)
    return None


def _inversion_table(law: LawHandle, tail: float, at_least: float | None = None):
    """(values, cdf) covering mass >= 1 - tail (or >= at_least)."""
    if law.kind == "finite":
        pairs = sorted(law.spec.pmf)
        vals = np.array([k for k, _ in pairs], dtype=np.int64)
        cdf = np.cumsum([p for _, p in pairs])
        cdf[-1] = 1.0
        return vals, cdf
    target = 1.0 - tail if at_least is None else min(1.0, max(1.0 - tail, at_least))
    bound = _hard_support_bound(law)
    vals = []
    probs = []
    acc = 0.0
    k = 0
    kcap = 1 << 22
    while acc < target and k < kcap:
        if bound is not None and k > bound:
            break
        p = law.pmf(k)
        if p > 0.0:
            vals.append(k)
            probs.append(p)
            acc += p
        elif bound is None and acc > 0.5 and k > 64 and law.pmf(k - 1) == 0.0:
            # unbounded families here have log-concave tails; two consecutive
            # underflows mean the rest of the mass is below float resolution
            break
        k += 1
    cdf = np.cumsum(probs)
    if acc >= 1.0 - 1e-14:
        cdf[-1] = max(cdf[-1], 1.0)
    return np.array(vals, dtype=np.int64), cdf


def _with_table(law: LawHandle) -> LawHandle:
    vals, cdf = _inversion_table(law, _TAIL_EPS)
    object.__setattr__(law, "_values", vals)
    object.__setattr__(law, "_cdf", cdf)
    return law


def make_law(spec: DistSpec) -> LawHandle:
    """Validate a spec and wrap it with exact closed-form moments."""
    spec.validate()
    if spec.family == "poisson":
        law = LawHandle(kind="poisson", mean=spec.rate, variance=spec.rate, spec=spec)
    elif spec.family == "geometric":
        p = spec.prob
        law = LawHandle(kind="geometric", mean=(1 - p) / p,
                        variance=(1 - p) / p**2, spec=spec)
    elif spec.family == "binomial":
        n, p = spec.trials, spec.prob
        law = LawHandle(kind="binomial", mean=n * p, variance=n * p * (1 - p), spec=spec)
    else:
        pairs = spec.pmf
        total = math.fsum(p for _, p in pairs)
        if abs(total - 1.0) > _FINITE_NORM_TOL:
            raise InvalidSpec(f"finite law probabilities sum to {total!r}")
        pairs = tuple((k, p / total) for k, p in pairs)
        spec = DistSpec(family="finite", pmf=pairs)
        m = math.fsum(k * p for k, p in pairs)
        m2 = math.fsum(k * k * p for k, p in pairs)
        law = LawHandle(kind="finite", mean=m, variance=m2 - m * m, spec=spec)
    return _with_table(law)


def size_biased(offspring: LawHandle) -> LawHandle:
    """The law with pmf k * p_k on k >= 1; requires mean-1 input, and its
    mean then equals variance(offspring) + 1."""
    if not math.isclose(offspring.mean, 1.0, abs_tol=CRITICAL_TOL, rel_tol=0.0):
        raise NotCritical(
            f"size-biasing needs offspring mean 1, got {offspring.mean!r}")
    if not math.isfinite(offspring.variance):
        mean = math.inf
        var = math.inf
    else:
        mean = offspring.variance + 1.0
        # E[k^2] under the size-biased law is the third moment of the base
        m3 = _third_moment(offspring)
        var = m3 - mean * mean if math.isfinite(m3) else math.inf
    law = LawHandle(kind="size_biased", mean=mean, variance=var, base=offspring)
    return _with_table(law)


def _third_moment(law: LawHandle, tail: float = _TAIL_EPS) -> float:
    ks, _ = _inversion_table(law, tail)
    return float(sum(float(k) ** 3 * law.pmf(int(k)) for k in ks))


def thin(cars: LawHandle, t: float) -> LawHandle:
    """Keep each arrival batch with probability t, else replace it by zero:
    pmf (1-t) 1{k=0} + t p_k, mean t*m, variance t s2 + t(1-t) m^2."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"thinning time must lie in [0, 1], got {t}")
    m, s2 = cars.mean, cars.variance
    var = t * s2 + t * (1 - t) * m * m if math.isfinite(s2) else math.inf
    law = LawHandle(kind="thinned", mean=t * m, variance=var, base=cars, thin_t=t)
    return _with_table(law)


def sample(law: LawHandle, rng: np.random.Generator) -> int:
    return law.sample(rng)


@dataclass(frozen=True)
class OffspringReport:
    mean: float
    variance: float
    is_critical: bool
    period: int
    is_delta1: bool


def check_offspring(law: LawHandle, tol: float = CRITICAL_TOL) -> OffspringReport:
    """Gatekeeping report for offspring laws: criticality, lattice period of
    the total progeny (gcd of the nonzero support), and the degenerate
    one-child case."""
    is_delta1 = law.is_delta(1)
    support = law.support_upto()
    g = 0
    for k in support:
        if k >= 1:
            g = math.gcd(g, int(k))
    period = g if g >= 1 else 1
    return OffspringReport(
        mean=law.mean,
        variance=law.variance,
        is_critical=abs(law.mean - 1.0) <= tol,
        period=period,
        is_delta1=is_delta1,
    )
