"""Excess-noise budget referred to the channel input of user 1.

Each noise source of user ``j >= 2`` is weighted by ``T_j / T_1``: noise
added downstream of user 1 reaches the dealer attenuated by ``T_j`` and is
referred back through user 1's transmittance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .config import SystemConfig
from .errors import InvalidArgumentError

BUDGET_COLUMNS = ("eps_am", "eps_le", "eps_adc", "eps_error", "eps_slow",
                  "eps_phase", "eps_rest", "eps_total")


def chi_ref(T: float, eta: float, v_el: float, eps_ch: float) -> float:
    """Total noise on the phase reference seen through transmittance ``T``."""
    if not (0 < T <= 1 and 0 < eta <= 1):
        raise InvalidArgumentError(f"need 0 < T <= 1 and 0 < eta <= 1, got T={T}, eta={eta}")
    return (2.0 - eta * T + 2.0 * v_el) / (eta * T) + eps_ch


def default_slow_noise(v_slow: float, variances: np.ndarray, weights: np.ndarray) -> float:
    """Small-angle phase noise ``V_slow * sum_j w_j V_Uj``."""
    return float(v_slow * np.dot(weights, variances))


SlowNoiseModel = Callable[[float, np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class NoiseBudget:
    eps_am: float
    eps_le: float
    eps_adc: float
    eps_error: float
    eps_slow: float
    eps_phase: float
    eps_rest: float
    eps_total: float
    chi: tuple[float, ...]  # reference noise per user: chi_D for user 1, chi_j for relays

    @property
    def chi_d(self) -> float:
        return self.chi[0]

    @property
    def chi_2(self) -> float:
        return self.chi[1]

    def as_row(self) -> dict[str, float]:
        d = asdict(self)
        return {k: d[k] for k in BUDGET_COLUMNS}


def user_weights(cfg: SystemConfig) -> np.ndarray:
    """``T_j / T_1`` per user (1 for user 1)."""
    t = cfg.transmittances()
    return t / t[0]


def reference_chis(cfg: SystemConfig) -> np.ndarray:
    d = cfg.detector
    return np.array([chi_ref(t, d.eta, d.v_el, cfg.eps_ch) for t in cfg.transmittances()])


def reference_error_numerator(cfg: SystemConfig) -> float:
    """``sum_j w_j V_Uj (chi_j + 1)``; dividing by ``|alpha_R1|^2`` gives eps_error."""
    w = user_weights(cfg)
    return float(np.sum(w * np.asarray(cfg.modulation_variances) * (reference_chis(cfg) + 1.0)))


def leakage_per_photon(cfg: SystemConfig) -> float:
    """``eps_LE / |alpha_R1|^2``."""
    return float(2.0 * np.sum(user_weights(cfg)) / cfg.extinction_ratio)


def noise_budget(cfg: SystemConfig, slow_noise: SlowNoiseModel = default_slow_noise,
                 ref_intensity: float | None = None) -> NoiseBudget:
    """Itemised excess noise of the system.

    ``ref_intensity`` overrides ``cfg.ref_intensity`` (reference photon
    number ``|alpha_R1|^2``).
    """
    a_r = cfg.ref_intensity if ref_intensity is None else float(ref_intensity)
    if not a_r > 0:
        raise InvalidArgumentError("reference intensity must be positive")
    w = user_weights(cfg)
    amp_sq = cfg.amplitudes_sq()
    chis = reference_chis(cfg)

    eps_am = float(np.sum(w * amp_sq)) / cfg.am_dynamic
    eps_le = leakage_per_photon(cfg) * a_r
    eps_adc = float(np.sum(w * amp_sq)) / (12.0 * 2.0 ** cfg.adc_bits)
    eps_error = reference_error_numerator(cfg) / a_r
    eps_slow = slow_noise(cfg.v_slow, np.asarray(cfg.modulation_variances), w)
    eps_phase = eps_error + eps_slow  # no drift term: signal and reference share a laser
    total = eps_am + eps_le + eps_adc + eps_phase + cfg.eps_rest
    return NoiseBudget(eps_am, eps_le, eps_adc, eps_error, eps_slow, eps_phase,
                       cfg.eps_rest, total, tuple(float(c) for c in chis))

