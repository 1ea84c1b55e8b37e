"""System parameters: channel geometry, detector and the full configuration.

Defaults are the global simulation parameters of the protocol (0.2 dB/km
fibre, beta = 0.95, 10-bit ADC, 60 dB extinction ratio, 40 dB AM dynamic,
modulation variance 4 per user).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

PLACEMENTS = ("symmetric", "asymmetric")


def transmittance(alpha: float, length: float) -> float:
    """Fibre transmittance ``10**(-alpha * length / 10)``."""
    if not (alpha >= 0 and length >= 0):
        raise InvalidArgumentError(
            f"attenuation and length must be non-negative, got {alpha}, {length}")
    return 10.0 ** (-alpha * length / 10.0)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class DetectorParams:
    """Heterodyne detector at the dealer."""

    eta: float = 1.0
    v_el: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise InvalidArgumentError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.v_el >= 0:
            raise InvalidArgumentError(f"v_el must be >= 0, got {self.v_el}")


IDEAL_DETECTOR = DetectorParams(1.0, 0.0)
PRACTICAL_DETECTOR = DetectorParams(0.6, 0.01)


@dataclass(frozen=True)
class ChannelGeometry:
    """Users chained along one fibre towards the dealer.

    ``segments[k]`` is the fibre length (km) between user ``k + 1`` and the
    next hop; the last segment ends at the dealer.  For two users this is
    ``(l1, l2)``.  User 1 is always the farthest.
    """

    alpha: float = 0.2
    segments: tuple[float, ...] = (10.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(float(s) for s in self.segments))
        if self.alpha < 0:
            raise InvalidArgumentError("attenuation must be non-negative")
        if not self.segments or any(not (s >= 0 and math.isfinite(s)) for s in self.segments):
            raise InvalidArgumentError("segment lengths must be finite and non-negative")

    @property
    def n_users(self) -> int:
        return len(self.segments)

    @property
    def l1(self) -> float:
        return self.segments[0]

    @property
    def l2(self) -> float:
        return self.segments[1] if len(self.segments) > 1 else 0.0

    @property
    def total(self) -> float:
        return float(sum(self.segments))

    def distances(self) -> np.ndarray:
        """Fibre length from each user to the dealer, user 1 first."""
        return np.cumsum(self.segments[::-1])[::-1]

    def transmittances(self) -> np.ndarray:
        return 10.0 ** (-self.alpha * self.distances() / 10.0)

    @classmethod
    def from_distances(cls, distances: Sequence[float], alpha: float = 0.2) -> "ChannelGeometry":
        d = np.asarray(distances, dtype=float)
        if np.any(np.diff(d) > 0):
            raise InvalidArgumentError("user distances must be non-increasing")
        segs = np.append(d[:-1] - d[1:], d[-1])
        return cls(alpha, tuple(segs))


def symmetric_geometry(total: float, n_users: int, alpha: float = 0.2) -> ChannelGeometry:
    """Users at equal intervals spanning ``total`` km."""
    if n_users < 1 or total < 0:
        raise InvalidArgumentError("need n_users >= 1 and total >= 0")
    return ChannelGeometry(alpha, (total / n_users,) * n_users)


def asymmetric_geometry(total: float, n_users: int, alpha: float = 0.2,
                        spacing: float = 1.0) -> ChannelGeometry:
    """Users 2..n packed behind user 1 at ``spacing`` km intervals.

    When ``n_users`` intervals of ``spacing`` do not fit into ``total`` the
    interval shrinks to ``total / n_users``, so packed users never spread
    wider than the symmetric layout.
    """
    if n_users < 1 or total < 0 or spacing < 0:
        raise InvalidArgumentError("need n_users >= 1, total >= 0, spacing >= 0")
    step = min(spacing, total / n_users)
    d = total - step * np.arange(n_users)
    return ChannelGeometry.from_distances(d, alpha)


def place_users(total: float, n_users: int, placement: str = "symmetric",
                alpha: float = 0.2, spacing: float = 1.0) -> ChannelGeometry:
    if placement == "symmetric":
        return symmetric_geometry(total, n_users, alpha)
    if placement == "asymmetric":
        return asymmetric_geometry(total, n_users, alpha, spacing)
    raise InvalidArgumentError(f"unknown placement {placement!r}")


@dataclass(frozen=True)
class SystemConfig:
    """All protocol and hardware parameters for one operating point.

    ``modulation_variances`` has one entry per user (user 1 first) and must
    match the number of geometry segments.  ``max_amplitudes`` defaults to
    ``sqrt(10 * V_U)`` per user.  Ratios given in dB are converted to linear
    scale where they are used.
    """

    beta: float = 0.95
    eps_ch: float = 0.002
    adc_bits: int = 10
    extinction_ratio_db: float = 60.0
    am_dynamic_db: float = 40.0
    modulation_variances: tuple[float, ...] = (4.0, 4.0)
    max_amplitudes: tuple[float, ...] | None = None
    ref_intensity: float = 2000.0
    v_slow: float = 0.0
    eps_rest: float = 0.0
    detector: DetectorParams = field(default_factory=DetectorParams)
    geometry: ChannelGeometry = field(default_factory=ChannelGeometry)
    placement: str = "symmetric"
    spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "modulation_variances",
                           tuple(float(v) for v in self.modulation_variances))
        if self.max_amplitudes is not None:
            object.__setattr__(self, "max_amplitudes",
                               tuple(float(a) for a in self.max_amplitudes))
        if not 0 <= self.beta <= 1:
            raise InvalidArgumentError(f"beta must lie in [0, 1], got {self.beta}")
        if self.adc_bits < 1:
            raise InvalidArgumentError("adc_bits must be >= 1")
        if not (self.extinction_ratio_db > 0 and self.am_dynamic_db > 0):
            raise InvalidArgumentError("extinction ratio and AM dynamic must be positive (dB)")
        if any(not (v >= 0 and math.isfinite(v)) for v in self.modulation_variances):
            raise InvalidArgumentError("modulation variances must be finite and >= 0")
        if len(self.modulation_variances) != self.geometry.n_users:
            raise InvalidArgumentError(
                f"{len(self.modulation_variances)} modulation variances for "
                f"{self.geometry.n_users} users")
        if self.max_amplitudes is not None and len(self.max_amplitudes) != self.n_users:
            raise InvalidArgumentError("one max amplitude per user is required")
        if not self.ref_intensity > 0:
            raise InvalidArgumentError("reference intensity must be positive")
        if self.v_slow < 0 or self.eps_rest < 0 or self.eps_ch < 0:
            raise InvalidArgumentError("v_slow, eps_rest and eps_ch must be >= 0")
        if self.placement not in PLACEMENTS:
            raise InvalidArgumentError(f"placement must be one of {PLACEMENTS}")

    @property
    def n_users(self) -> int:
        return self.geometry.n_users

    @property
    def alpha(self) -> float:
        return self.geometry.alpha

    @property
    def extinction_ratio(self) -> float:
        return db_to_linear(self.extinction_ratio_db)

    @property
    def am_dynamic(self) -> float:
        return db_to_linear(self.am_dynamic_db)

    def amplitudes_sq(self) -> np.ndarray:
        """``|alpha_Smax_j|^2`` per user."""
        if self.max_amplitudes is None:
            return 10.0 * np.asarray(self.modulation_variances)
        return np.asarray(self.max_amplitudes) ** 2

    def transmittances(self) -> np.ndarray:
        return self.geometry.transmittances()

    def with_distance(self, total: float, n_users: int | None = None) -> "SystemConfig":
        """Same parameters with users re-placed over ``total`` km.

        Modulation variances are kept when the user count is unchanged and
        otherwise filled with user 1's value.
        """
        n = self.n_users if n_users is None else n_users
        geom = place_users(total, n, self.placement, self.alpha, self.spacing)
        if n == self.n_users:
            vu, amps = self.modulation_variances, self.max_amplitudes
        else:
            vu = (self.modulation_variances[0],) * n
            amps = None if self.max_amplitudes is None else (self.max_amplitudes[0],) * n
        return replace(self, geometry=geom, modulation_variances=vu, max_amplitudes=amps)

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)
