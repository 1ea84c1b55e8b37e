"""Reference-intensity optimisation, root finding and parameter scans.

All root finders use bracketing bisection: the key rate has a sharp cliff
near its zero and bisection needs no derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _opt

from .config import ChannelGeometry, SystemConfig
from .errors import InvalidArgumentError, NoPositiveRateError
from .keyrate import SystemKeyRate, system_key_rate
from .noise import (NoiseBudget, leakage_per_photon, noise_budget,
                    reference_error_numerator)

MAX_ITER = 60


def _bisect(f, lo, hi, xtol, rtol=4 * np.finfo(float).eps, error=NoPositiveRateError):
    if np.sign(f(lo)) == np.sign(f(hi)):
        raise error(f"no sign change on [{lo}, {hi}]")
    root, info = _opt.bisect(f, lo, hi, xtol=xtol, rtol=rtol, maxiter=MAX_ITER,
                             full_output=True, disp=True)
    return root, info.iterations


def optimal_reference_intensity(cfg: SystemConfig) -> float:
    """Reference photon number balancing reference-phase error and leakage.

    ``eps_error`` falls as ``1/|alpha_R1|^2`` and ``eps_LE`` grows linearly,
    so their sum is minimal where they are equal.
    """
    return math.sqrt(reference_error_numerator(cfg) / leakage_per_photon(cfg))


def optimal_reference_intensity_bisect(cfg: SystemConfig) -> float:
    """Same optimum found numerically; an independent cross-check."""
    num = reference_error_numerator(cfg)
    leak = leakage_per_photon(cfg)

    def gap(log_a):
        a = math.exp(log_a)
        return num / a - leak * a

    root, _ = _bisect(gap, -20.0, 60.0, xtol=1e-12, error=InvalidArgumentError)
    return math.exp(root)


def budget_at_optimum(cfg: SystemConfig) -> tuple[NoiseBudget, float]:
    a = optimal_reference_intensity(cfg)
    return noise_budget(cfg, ref_intensity=a), a


def rate_at(cfg: SystemConfig, optimize_reference: bool = True) -> tuple[SystemKeyRate, float]:
    """System key rate, optionally at the optimal reference intensity."""
    if optimize_reference:
        budget, a = budget_at_optimum(cfg)
    else:
        budget, a = noise_budget(cfg), cfg.ref_intensity
    return system_key_rate(cfg, budget=budget), a


def max_distance(cfg: SystemConfig, placement: str | None = None, n_users: int | None = None,
                 optimize_reference: bool = True, xtol: float = 1e-3,
                 step: float = 1.0, l_max: float = 500.0, l_min: float = 0.1) -> float:
    """Largest total distance (km) with a positive system key rate.

    Users are re-placed at every trial distance by ``placement`` (default:
    the configuration's own rule).  Returns 0 when the rate is already
    non-positive at ``l_min``.
    """
    if placement is not None:
        cfg = cfg.replace(placement=placement)
    n = cfg.n_users if n_users is None else n_users

    def rate(L):
        return rate_at(cfg.with_distance(L, n), optimize_reference)[0].rate

    if rate(l_min) <= 0:
        return 0.0
    lo = l_min
    hi = None
    L = l_min
    while L < l_max:
        L = min(L + step, l_max)
        if rate(L) <= 0:
            hi = L
            break
        lo = L
    if hi is None:
        raise NoPositiveRateError(f"rate still positive at {l_max} km")
    root, _ = _bisect(rate, lo, hi, xtol=xtol)
    return root


def tolerable_excess_noise(cfg: SystemConfig, total_distance: float | None = None,
                           xtol: float = 1e-7) -> float:
    """Excess noise at which the system key rate reaches zero."""
    if total_distance is not None:
        cfg = cfg.with_distance(total_distance)
    budget = noise_budget(cfg)

    def rate(e):
        return system_key_rate(cfg, eps=e, budget=budget).rate

    if rate(0.0) <= 0:
        raise NoPositiveRateError("no positive rate even without excess noise")
    hi = 0.125
    while rate(hi) > 0:
        hi *= 2
        if hi > 1e4:
            raise NoPositiveRateError("rate does not vanish with growing noise")
    root, _ = _bisect(rate, 0.0, hi, xtol=xtol)
    return root


SCAN_PARAMETERS = ("distance", "ratio", "users", "variance")


@dataclass(frozen=True)
class ScanSpec:
    """One parameter sweep.

    ``distance`` sweeps the total length with the config's placement rule,
    ``ratio`` sweeps ``l1/L`` for two users at ``total_distance``, ``users``
    sweeps the user count at ``total_distance`` and ``variance`` evaluates
    the ``grid x grid2`` plane of ``(V_U1, V_U2)``.
    """

    parameter: str
    grid: tuple[float, ...]
    config: SystemConfig = field(default_factory=SystemConfig)
    grid2: tuple[float, ...] | None = None
    total_distance: float | None = None
    optimize_reference: bool = True
    tolerable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if self.grid2 is not None:
            object.__setattr__(self, "grid2", tuple(float(g) for g in self.grid2))
        if self.parameter not in SCAN_PARAMETERS:
            raise InvalidArgumentError(f"unknown scan parameter {self.parameter!r}")
        for g in (self.grid, self.grid2):
            if g is None:
                continue
            d = np.diff(g)
            if not g or not (np.all(d > 0) or np.all(d < 0)):
                raise InvalidArgumentError("scan grid must be non-empty and strictly monotone")
        if self.parameter == "variance" and self.grid2 is None:
            raise InvalidArgumentError("variance scans need grid2 for V_U2")
        if self.parameter != "distance" and self.total_distance is None:
            raise InvalidArgumentError(f"{self.parameter} scans need total_distance")

    @property
    def columns(self) -> tuple[str, ...]:
        return {"distance": ("L_km",), "ratio": ("l1_over_L",), "users": ("n_users",),
                "variance": ("V_U1", "V_U2")}[self.parameter]

    def points(self):
        if self.parameter == "variance":
            return [(a, b) for a in self.grid for b in self.grid2]
        return [(g,) for g in self.grid]

    def config_at(self, point) -> SystemConfig:
        cfg, L = self.config, self.total_distance
        if self.parameter == "distance":
            return cfg.with_distance(point[0])
        if self.parameter == "users":
            n = int(point[0])
            if n != point[0] or n < 1:
                raise InvalidArgumentError("user counts must be positive integers")
            return cfg.with_distance(L, n)
        cfg = cfg.with_distance(L, 2)
        if self.parameter == "ratio":
            r = point[0]
            if not 0 <= r <= 1:
                raise InvalidArgumentError("distance ratio must lie in [0, 1]")
            return cfg.replace(geometry=ChannelGeometry(cfg.alpha, (r * L, (1 - r) * L)))
        return cfg.replace(modulation_variances=point, max_amplitudes=None)


@dataclass(frozen=True)
class ScanRow:
    point: tuple[float, ...]
    rate: float
    budget: NoiseBudget
    ref_intensity: float
    eps_tolerable: float = float("nan")
    t1: float = float("nan")


def run_scan(spec: ScanSpec) -> list[ScanRow]:
    rows = []
    for point in spec.points():
        cfg = spec.config_at(point)
        res, a = rate_at(cfg, spec.optimize_reference)
        tol = float("nan")
        if spec.tolerable:
            try:
                tol = tolerable_excess_noise(cfg)
            except NoPositiveRateError:
                pass
        rows.append(ScanRow(point, res.rate, res.budget, a, tol,
                            float(cfg.transmittances()[0])))
    return rows


def positive_region(spec: ScanSpec) -> set[tuple[float, ...]]:
    """Grid points with a strictly positive system key rate."""
    return {r.point for r in run_scan(spec) if r.rate > 0}
