"""Monte Carlo simulation of (2, 2) protocol frames.

Each frame carries one Gaussian-modulated coherent state per user, the
dealer's composite heterodyne outcome and the two measured reference
phases.  Laser phases drift in two ways: every frame redraws each laser's
initial phase (fast drift), while the cumulative delay phases follow a slow
Gaussian random walk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import DetectorParams, SystemConfig
from .errors import DegenerateDataError, InvalidArgumentError
from .noise import reference_chis
from .quadrature import QuadPair, mean_product, rotate, sample_gaussian_pair

TWO_PI = 2.0 * np.pi

FRAME_COLUMNS = ("frame", "x1", "p1", "x2", "p2", "xD", "pD",
                 "theta2R", "thetaDR", "phi1_true", "phi2_true")


@dataclass(frozen=True)
class PhaseState:
    """Initial and cumulative-delay phases of the three lasers.

    Fields may be scalars (one frame) or arrays (one entry per frame).
    """

    theta1_init: float | np.ndarray = 0.0
    theta2_init: float | np.ndarray = 0.0
    thetaD_init: float | np.ndarray = 0.0
    theta1_delay: float | np.ndarray = 0.0
    theta2_delay: float | np.ndarray = 0.0
    thetaD_delay: float | np.ndarray = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidArgumentError(f"{name} must be finite")

    def delay_differences(self):
        """Cumulative phase differences dealer-user 1 and dealer-user 2."""
        return (self.thetaD_delay - self.theta1_delay,
                self.thetaD_delay - self.theta2_delay)


def reference_phases(s: PhaseState):
    """Noise-free reference phases measured by user 2 and by the dealer."""
    lead = s.theta1_init + s.theta1_delay
    return lead - (s.theta2_init + s.theta2_delay), lead - (s.thetaD_init + s.thetaD_delay)


def signal_drifts(s: PhaseState):
    """Phase drifts of the two quantum signals relative to the dealer's LO."""
    return s.theta1_init - s.thetaD_init, s.theta2_init - s.thetaD_init


def detection_noise_variance(T1: float, detector: DetectorParams, eps_sim: float = 0.0) -> float:
    """Per-quadrature noise of the dealer's heterodyne outcome (SNU)."""
    return 1.0 + detector.v_el + detector.eta * T1 / 2.0 * eps_sim


def dealer_measure(s1: QuadPair, s2: QuadPair, phi1, phi2, T1: float, T2: float,
                   detector: DetectorParams, noise_variance: float,
                   rng: np.random.Generator) -> QuadPair:
    """Composite heterodyne outcome of both users' signals plus Gaussian noise."""
    if not 0 < T1 <= T2 <= 1:
        raise InvalidArgumentError(f"need 0 < T1 <= T2 <= 1, got T1={T1}, T2={T2}")
    eta = detector.eta
    size = None if np.ndim(s1.x) == 0 else np.size(s1.x)
    out = (rotate(s1, phi1).scale(np.sqrt(eta * T1 / 2))
           + rotate(s2, phi2).scale(np.sqrt(eta * T2 / 2)))
    noise = sample_gaussian_pair(noise_variance, rng, size)
    res = out + noise
    if size is None:
        return QuadPair(float(res.x), float(res.p))
    return res


@dataclass(frozen=True)
class SimulationParams:
    """Knobs of the Monte Carlo model that the analytic model does not need.

    ``subtraction`` selects the prefactor with which the dealer removes
    user 2's announced data: ``"matched"`` uses ``sqrt(eta T2 / 2)``, the
    gain user 2's signal actually has in the dealer's outcome, and
    ``"literal"`` uses ``sqrt(T2)``.  ``estimator`` picks the cumulative-phase
    estimator: ``"correlation"`` (per-user correlations) or ``"joint"``
    (one least-squares fit over both users).
    """

    walk_step: float = 1e-3
    initial_delays: tuple[float, float, float] = (0.0, 0.0, 0.0)
    fast_drift: bool = True
    reference_noise: bool = True
    detection_noise: bool = True
    eps_sim: float = 0.0
    subtraction: str = "matched"
    estimator: str = "correlation"
    phase_fraction: float = 0.1
    transmittance_fraction: float = 0.1
    subtraction_fraction: float = 0.1

    def __post_init__(self):
        if self.walk_step < 0 or self.eps_sim < 0:
            raise InvalidArgumentError("walk_step and eps_sim must be >= 0")
        if self.subtraction not in ("matched", "literal"):
            raise InvalidArgumentError("subtraction must be 'matched' or 'literal'")
        if self.estimator not in ("correlation", "joint"):
            raise InvalidArgumentError("estimator must be 'correlation' or 'joint'")
        fr = (self.phase_fraction, self.transmittance_fraction, self.subtraction_fraction)
        if any(f <= 0 for f in fr) or sum(fr) >= 1:
            raise InvalidArgumentError("disclosure fractions must be positive and sum below 1")


class FrameRecord(NamedTuple):
    frame: int
    user1: QuadPair
    user2: QuadPair
    dealer: QuadPair
    theta2R: float
    thetaDR: float
    phi1_true: float
    phi2_true: float


@dataclass
class FrameBlock:
    """A simulated block stored column-wise, one array entry per frame."""

    frame: np.ndarray
    user1: QuadPair
    user2: QuadPair
    dealer: QuadPair
    theta2R: np.ndarray
    thetaDR: np.ndarray
    phases: PhaseState
    T1: float
    T2: float
    eta: float
    consumed: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.consumed is None:
            self.consumed = np.zeros(len(self.frame), dtype=bool)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def phi_true(self):
        return signal_drifts(self.phases)

    @property
    def delta_true(self):
        return self.phases.delay_differences()

    def record(self, i: int) -> FrameRecord:
        phi1, phi2 = self.phi_true
        return FrameRecord(int(self.frame[i]), self.user1.take(i), self.user2.take(i),
                           self.dealer.take(i), float(self.theta2R[i]), float(self.thetaDR[i]),
                           float(np.broadcast_to(phi1, self.frame.shape)[i]),
                           float(np.broadcast_to(phi2, self.frame.shape)[i]))

    def records(self):
        return [self.record(i) for i in range(len(self))]

    def consume(self, idx) -> None:
        """Mark frames as disclosed; they no longer count as key material."""
        self.consumed[idx] = True

    def key_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.consumed)


def simulate_block(cfg: SystemConfig, n_frames: int, rng: np.random.Generator,
                   params: SimulationParams = SimulationParams(),
                   first_frame: int = 0) -> FrameBlock:
    """Simulate ``n_frames`` consecutive frames of a two-user system."""
    if cfg.n_users != 2:
        raise InvalidArgumentError("frame simulation covers the two-user protocol only")
    if n_frames < 1:
        raise InvalidArgumentError("n_frames must be >= 1")
    T1, T2 = (float(t) for t in cfg.transmittances())
    det = cfg.detector
    v1, v2 = cfg.modulation_variances

    s1 = sample_gaussian_pair(v1, rng, n_frames)
    s2 = sample_gaussian_pair(v2, rng, n_frames)
    if params.fast_drift:
        init = rng.uniform(0.0, TWO_PI, (3, n_frames))
    else:
        init = np.zeros((3, n_frames))
    delay = np.repeat(np.asarray(params.initial_delays, dtype=float)[:, None], n_frames, axis=1)
    if params.walk_step > 0:
        steps = rng.normal(0.0, params.walk_step, (3, n_frames))
        steps[:, 0] = 0.0
        delay = delay + np.cumsum(steps, axis=1)
    state = PhaseState(init[0], init[1], init[2], delay[0], delay[1], delay[2])

    phi1, phi2 = signal_drifts(state)
    noise_var = (detection_noise_variance(T1, det, params.eps_sim)
                 if params.detection_noise else 0.0)
    dealer = dealer_measure(s1, s2, phi1, phi2, T1, T2, det, noise_var, rng)

    theta2R, thetaDR = reference_phases(state)
    if params.reference_noise:
        chi_d, chi_2 = reference_chis(cfg)
        a_r = cfg.ref_intensity
        theta2R = theta2R + rng.normal(0.0, np.sqrt((chi_2 + 1) / a_r), n_frames)
        thetaDR = thetaDR + rng.normal(0.0, np.sqrt((chi_d + 1) / a_r), n_frames)

    frames = np.arange(first_frame, first_frame + n_frames)
    return FrameBlock(frames, s1, s2, dealer, theta2R, thetaDR, state, T1, T2, det.eta)


def partition_frames(n_frames: int, params: SimulationParams, rng: np.random.Generator):
    """Random disjoint disclosure subsets and the remaining key frames."""
    perm = rng.permutation(n_frames)
    sizes = [int(round(f * n_frames)) for f in
             (params.phase_fraction, params.transmittance_fraction, params.subtraction_fraction)]
    cuts = np.cumsum(sizes)
    phase, trans, sub, key = np.split(perm, cuts)
    return {"phase": np.sort(phase), "transmittance": np.sort(trans),
            "subtraction": np.sort(sub), "key": np.sort(key)}


def transmittance_from_moments(cross: float, power: float, eta: float) -> float:
    """Invert ``<x x_D> = sqrt(eta T / 2) <x^2>`` for ``T``."""
    if not power > 1e-12:
        raise DegenerateDataError("user data has (near) zero power")
    return 2.0 * (cross / power) ** 2 / eta


def estimate_transmittance(user: QuadPair, dealer: QuadPair, eta: float) -> float:
    """Transmittance of one user from phase-compensated disclosed data.

    Both quadratures are pooled.
    """
    cross = mean_product(user.x, dealer.x) + mean_product(user.p, dealer.p)
    power = mean_product(user.x, user.x) + mean_product(user.p, user.p)
    return transmittance_from_moments(cross, power, eta)


def estimate_transmittances(user1: QuadPair, user2: QuadPair, dealer: QuadPair,
                            eta: float, min_samples: int = 1000):
    if user1.size < min_samples:
        raise DegenerateDataError(f"need at least {min_samples} disclosed frames")
    return (estimate_transmittance(user1, dealer, eta),
            estimate_transmittance(user2, dealer, eta))


def dealer_subtract(dealer: QuadPair, u2: QuadPair, T2: float,
                    eta: float | None = None) -> QuadPair:
    """Remove user 2's announced contribution from the dealer's data.

    Without ``eta`` the prefactor is ``sqrt(T2)``; with it, ``sqrt(eta T2 / 2)``.
    """
    if not 0 < T2 <= 1:
        raise InvalidArgumentError(f"T2 must lie in (0, 1], got {T2}")
    gain = np.sqrt(T2) if eta is None else np.sqrt(eta * T2 / 2)
    return dealer - u2.scale(gain)


def write_frames_csv(fh, block: FrameBlock) -> None:
    phi1, phi2 = (np.broadcast_to(p, block.frame.shape) for p in block.phi_true)
    w = csv.writer(fh)
    w.writerow(FRAME_COLUMNS)
    cols = (block.frame, block.user1.x, block.user1.p, block.user2.x, block.user2.p,
            block.dealer.x, block.dealer.p, block.theta2R, block.thetaDR, phi1, phi2)
    for row in zip(*cols):
        w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
