"""Closed forms for the mean parking flux and the regime classification.

All quantities are driven by three numbers: the car-arrival mean m and
variance sigma2, and the offspring variance Sigma2 of a mean-1 offspring law.
The phase parameter theta = (1-m)^2 - Sigma2*(sigma2 + m^2 - m) separates a
regime where almost all cars park (theta > 0) from one where a positive
fraction exits through the root (theta < 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .distributions import CRITICAL_TOL, LawHandle


class InfiniteVariance(ValueError):
    """Analytic operation on a law flagged with infinite variance."""


class SingularityApproached(RuntimeError):
    """The integrated mean flux ran into the blow-up point."""


_CRITICAL_THETA_TOL = 1e-12


class Regime(Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class ModelParams:
    """m > 0: car mean; sigma2 >= 0: car variance (math.inf allowed and
    flagged); Sigma2 > 0: offspring variance."""

    m: float
    sigma2: float
    Sigma2: float

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"car mean must be positive and finite, got {self.m}")
        if self.sigma2 < 0:
            raise ValueError(f"car variance must be >= 0, got {self.sigma2}")
        if not (self.Sigma2 > 0 and math.isfinite(self.Sigma2)):
            raise ValueError(
                f"offspring variance must be positive and finite, got {self.Sigma2}")
        if math.isfinite(self.sigma2):
            # sigma2 + m^2 - m is a second factorial moment, never negative
            raw = self.sigma2 + self.m * self.m - self.m
            if raw < -1e-12 * max(1.0, self.m * self.m):
                raise ValueError(
                    f"inconsistent moments: sigma2 + m^2 - m = {raw} < 0")

    @property
    def pair_coefficient(self) -> float:
        """sigma2 + m^2 - m, the mean number of ordered excess-car pairs per
        node; clamped at 0 against float dust."""
        if not math.isfinite(self.sigma2):
            return math.inf
        return max(0.0, self.sigma2 + self.m * self.m - self.m)

    @staticmethod
    def from_laws(cars: LawHandle, offspring: LawHandle) -> "ModelParams":
        if abs(offspring.mean - 1.0) > CRITICAL_TOL:
            raise ValueError(
                f"offspring law must have mean 1, got {offspring.mean!r}")
        return ModelParams(m=cars.mean, sigma2=cars.variance,
                           Sigma2=offspring.variance)


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    theta: float
    t_max: float  # math.inf when the mean flux never blows up, nan if undefined


def theta(p: ModelParams) -> float:
    """(1-m)^2 - Sigma2*(sigma2 + m^2 - m); -inf for infinite car variance."""
    if not math.isfinite(p.sigma2):
        return -math.inf
    return (1.0 - p.m) ** 2 - p.Sigma2 * p.pair_coefficient


def classify(p: ModelParams) -> RegimeReport:
    """Three-way phase classification; m > 1 and infinite car variance are
    supercritical outright (t_max reported as nan there)."""
    th = theta(p)
    if p.m > 1.0 or not math.isfinite(p.sigma2):
        return RegimeReport(regime=Regime.SUPERCRITICAL, theta=th, t_max=math.nan)
    tol = _CRITICAL_THETA_TOL * max(1.0, (1.0 - p.m) ** 2)
    if abs(th) <= tol:
        regime = Regime.CRITICAL
    elif th > 0:
        regime = Regime.SUBCRITICAL
    else:
        regime = Regime.SUPERCRITICAL
    return RegimeReport(regime=regime, theta=th, t_max=t_max(p))


def t_max(p: ModelParams) -> float:
    """Blow-up time of the mean flux: smallest positive root of
    (1 - m t)^2 = t * Sigma2 * (sigma2 + m^2 - m), +inf when the pair
    coefficient vanishes (single-car arrivals park forever)."""
    if p.m > 1.0 + 1e-12:
        raise ValueError("t_max is only defined for car mean m <= 1")
    if not math.isfinite(p.sigma2):
        raise InfiniteVariance("t_max undefined for infinite car variance")
    c = p.pair_coefficient
    if c == 0.0:
        return math.inf
    b = 2.0 * p.m + p.Sigma2 * c
    disc = p.Sigma2 * c * (p.Sigma2 * c + 4.0 * p.m)
    # smaller quadratic root of m^2 t^2 - b t + 1 = 0, in cancellation-free form
    return 2.0 / (b + math.sqrt(disc))


def phi_closed_form(t: float, p: ModelParams) -> float:
    """Mean flux at thinning time t in [0, 1]:
    ((1 - m t) - sqrt((1 - m t)^2 - Sigma2 (sigma2 + m^2 - m) t)) / Sigma2,
    and +inf past the blow-up time."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"thinning time must lie in [0, 1], got {t}")
    tm = t_max(p)
    if t > tm:
        return math.inf
    a = 1.0 - p.m * t
    disc = a * a - p.Sigma2 * p.pair_coefficient * t
    return (a - math.sqrt(max(disc, 0.0))) / p.Sigma2


_SINGULARITY_FLOOR = 1e-6


def _flux_rate(s: float, y: float, p: ModelParams, half_pair: float) -> float:
    den = 1.0 - p.m * s - p.Sigma2 * y
    if den < _SINGULARITY_FLOOR:
        raise SingularityApproached(
            f"mean-flux growth rate singular near s={s:.6g}")
    return (half_pair + p.m * y) / den


def phi_ode_grid(t_end: float, p: ModelParams, n_steps: int):
    """Classical fixed-step fourth-order march of
    phi' = ((sigma2+m^2-m)/2 + m phi) / (1 - m s - Sigma2 phi), phi(0) = 0,
    returning (times, values) at every step boundary (n_steps+1 points).
    Fixed step keeps the output bit-reproducible."""
    if t_end < 0:
        raise ValueError("integration horizon must be >= 0")
    if not math.isfinite(p.sigma2):
        raise InfiniteVariance("mean-flux integration needs finite car variance")
    if p.m > 1.0 + 1e-12:
        raise ValueError("mean-flux integration assumes car mean m <= 1")
    half_pair = 0.5 * p.pair_coefficient
    h = t_end / n_steps if n_steps else 0.0
    y = 0.0
    ts = [0.0]
    ys = [0.0]
    for i in range(n_steps):
        s = i * h
        k1 = _flux_rate(s, y, p, half_pair)
        k2 = _flux_rate(s + 0.5 * h, y + 0.5 * h * k1, p, half_pair)
        k3 = _flux_rate(s + 0.5 * h, y + 0.5 * h * k2, p, half_pair)
        k4 = _flux_rate(s + h, y + h * k3, p, half_pair)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ts.append((i + 1) * h)
        ys.append(y)
    return ts, ys


def phi_ode(t: float, p: ModelParams, step: float = 1e-4) -> float:
    """Mean flux at time t by fixed-step integration; the step is shrunk so a
    whole number of steps lands exactly on t."""
    if t < 0:
        raise ValueError("time must be >= 0")
    if step <= 0:
        raise ValueError("step must be positive")
    n = max(1, math.ceil(t / step)) if t > 0 else 0
    return phi_ode_grid(t, p, n)[1][-1]


def root_flux_identity(p: ModelParams) -> float:
    """Sigma2 * (mean flux at t=1) + m - 1: equals -sqrt(theta) below and at
    the transition, +inf beyond it."""
    rep = classify(p)
    if rep.regime is Regime.SUPERCRITICAL:
        return math.inf
    return p.Sigma2 * phi_closed_form(1.0, p) + p.m - 1.0
