"""Asymptotic secret key rate of one dealer-user link and of the system.

Collective-attack bound with reverse reconciliation and heterodyne
detection at the dealer: ``R = beta * I_UD - chi_DE`` where the Holevo
quantity is built from the symplectic eigenvalues of the Gaussian state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import InvalidArgumentError, NumericalDomainError
from .noise import NoiseBudget, noise_budget

RADICAND_TOL = 1e-9


def g_function(x: float) -> float:
    """``G(x) = (x+1) log2(x+1) - x log2 x`` with ``G(0) = 0``."""
    if x < 0 or not math.isfinite(x):
        raise InvalidArgumentError(f"G is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def _sqrt_nonneg(value: float, what: str) -> float:
    if value < 0:
        if value < -RADICAND_TOL:
            raise NumericalDomainError(f"negative {what}: {value!r}")
        return 0.0
    return math.sqrt(value)


def _symplectic_pair(total: float, prod_sq: float, what: str) -> tuple[float, float]:
    """Pair ``(l_a, l_b)`` with ``l_a^2 + l_b^2 = total`` and ``(l_a l_b)^2 = prod_sq``.

    Built from the sum and difference ``sqrt(total +- 2 l_a l_b)`` rather than
    the quadratic formula, whose inner square root turns rounding dust into
    ~1e-8 errors when the two eigenvalues coincide.
    """
    prod = _sqrt_nonneg(prod_sq, f"{what} product")
    sum_sq = total + 2.0 * prod
    diff_sq = total - 2.0 * prod
    if abs(diff_sq) <= 16 * np.finfo(float).eps * sum_sq:
        diff_sq = 0.0
    s = _sqrt_nonneg(sum_sq, f"{what} sum")
    d = _sqrt_nonneg(diff_sq, f"{what} difference")
    hi = (s + d) / 2.0
    lo = prod / hi if hi > 0 else 0.0
    return hi, lo


def _entropy_term(lam: float) -> float:
    x = (lam - 1.0) / 2.0
    if x < 0:
        if x < -RADICAND_TOL:
            raise NumericalDomainError(f"symplectic eigenvalue below 1: {lam!r}")
        x = 0.0
    return g_function(x)


@dataclass(frozen=True)
class KeyRateInputs:
    """One link: total variance ``V = V_U + 1``, transmittance and noise."""

    V: float
    T: float
    eps: float
    eta: float = 1.0
    v_el: float = 0.0
    beta: float = 0.95

    def __post_init__(self):
        if not self.V >= 1:
            raise InvalidArgumentError(f"V must be >= 1, got {self.V}")
        if not 0 < self.T <= 1:
            raise InvalidArgumentError(f"T must lie in (0, 1], got {self.T}")
        if not 0 < self.eta <= 1:
            raise InvalidArgumentError(f"eta must lie in (0, 1], got {self.eta}")
        if self.eps < 0 or self.v_el < 0 or not 0 <= self.beta <= 1:
            raise InvalidArgumentError("eps and v_el must be >= 0, beta in [0, 1]")

    @classmethod
    def from_variance(cls, v_u: float, T: float, eps: float, eta: float = 1.0,
                      v_el: float = 0.0, beta: float = 0.95) -> "KeyRateInputs":
        return cls(v_u + 1.0, T, eps, eta, v_el, beta)


@dataclass(frozen=True)
class KeyRateReport:
    chi_line: float
    chi_het: float
    chi_tot: float
    i_ud: float
    eigenvalues: tuple[float, float, float, float, float]
    chi_de: float
    rate: float
    inputs: KeyRateInputs


def link_key_rate(inp: KeyRateInputs) -> KeyRateReport:
    """Key rate of a single link; ``rate`` is signed, never clamped."""
    V, T, eta = inp.V, inp.T, inp.eta
    chi_line = 1.0 / T - 1.0 + inp.eps
    chi_het = (2.0 - eta + 2.0 * inp.v_el) / eta
    chi_tot = chi_line + chi_het / T
    i_ud = math.log2((V + chi_tot) / (1.0 + chi_tot))

    A = V**2 * (1 - 2 * T) + 2 * T + T**2 * (V + chi_line) ** 2
    B = T**2 * (V * chi_line + 1) ** 2
    lam1, lam2 = _symplectic_pair(A, B, "lambda_1,2")

    sqrt_b = math.sqrt(B)
    norm = (T * (V + chi_tot)) ** 2
    C = (A * chi_het**2 + B + 1 + 2 * chi_het * (V * sqrt_b + T * (V + chi_line))
         + 2 * T * (V**2 - 1)) / norm
    D = (V + sqrt_b * chi_het) ** 2 / norm
    lam3, lam4 = _symplectic_pair(C, D, "lambda_3,4")
    lam5 = 1.0

    chi_de = (_entropy_term(lam1) + _entropy_term(lam2)
              - _entropy_term(lam3) - _entropy_term(lam4) - _entropy_term(lam5))
    rate = inp.beta * i_ud - chi_de
    return KeyRateReport(chi_line, chi_het, chi_tot, i_ud,
                         (lam1, lam2, lam3, lam4, lam5), chi_de, rate, inp)


@dataclass(frozen=True)
class SystemKeyRate:
    rate: float
    links: tuple[KeyRateReport, ...]
    budget: NoiseBudget

    @property
    def limiting_link(self) -> int:
        """0-based index of the link that sets the rate."""
        return int(np.argmin([r.rate for r in self.links]))


def system_key_rate(cfg: SystemConfig, eps: float | None = None,
                    budget: NoiseBudget | None = None,
                    transmittances=None) -> SystemKeyRate:
    """Minimum over all dealer-user links.

    Every link is charged the full system excess noise.  ``eps`` replaces
    the budgeted total (used by the tolerable-noise search) and
    ``transmittances`` replaces the geometric ones (estimated values).
    """
    if budget is None:
        budget = noise_budget(cfg)
    e = budget.eps_total if eps is None else eps
    ts = cfg.transmittances() if transmittances is None else np.asarray(transmittances)
    d = cfg.detector
    links = tuple(
        link_key_rate(KeyRateInputs.from_variance(v, float(t), e, d.eta, d.v_el, cfg.beta))
        for v, t in zip(cfg.modulation_variances, ts)
    )
    return SystemKeyRate(min(r.rate for r in links), links, budget)


def plob_bound(T: float) -> float:
    """Repeaterless secret-key capacity ``-log2(1 - T)`` of a pure-loss channel."""
    if not 0 < T < 1:
        raise InvalidArgumentError(f"T must lie in (0, 1), got {T}")
    return -math.log1p(-T) / math.log(2.0)
