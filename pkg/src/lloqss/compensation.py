"""Two-stage phase compensation.

Stage one removes the per-frame laser offsets using the measured reference
phases: user 2 and the dealer each rotate their own data by ``-theta_R``
while user 1 leaves his untouched.  Stage two removes the slowly varying
cumulative phase differences, which are estimated from correlations with a
disclosed part of the dealer's data; here only the users rotate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, IndeterminateAngleError, InvalidArgumentError
from .quadrature import QuadPair, mean_product, rotate
from .simulation import FrameBlock


def first_rotation(data: QuadPair, theta_r) -> QuadPair:
    return rotate(data, np.negative(theta_r))


def second_rotation(data: QuadPair, delta_hat: float) -> QuadPair:
    return rotate(data, delta_hat)


def angle_from_correlations(c_x: float, c_p: float) -> float:
    """Full-circle angle of the correlation pair ``(<x x_D'>, <p x_D'>)``."""
    return float(np.arctan2(c_p, c_x))


def estimate_cumulative_phase(user_x, user_p, dealer_x, min_samples: int = 1000) -> float:
    """Estimate a user's cumulative phase difference with the dealer.

    For user 2 the inputs must already carry the stage-one rotation.
    Raises :class:`IndeterminateAngleError` when neither correlation clears
    five standard errors.
    """
    user_x = np.asarray(user_x, dtype=float)
    user_p = np.asarray(user_p, dtype=float)
    dealer_x = np.asarray(dealer_x, dtype=float)
    n = user_x.size
    if n < min_samples:
        raise DegenerateDataError(f"need at least {min_samples} samples, got {n}")
    c_x = mean_product(user_x, dealer_x)
    c_p = mean_product(user_p, dealer_x)
    floor_x = 5.0 * np.std(user_x * dealer_x) / np.sqrt(n)
    floor_p = 5.0 * np.std(user_p * dealer_x) / np.sqrt(n)
    if abs(c_x) <= floor_x and abs(c_p) <= floor_p:
        raise IndeterminateAngleError("correlations are indistinguishable from zero")
    return angle_from_correlations(c_x, c_p)


def estimate_joint_phases(user1: QuadPair, user2_s1: QuadPair, dealer_x,
                          min_samples: int = 1000) -> tuple[float, float]:
    """Both cumulative phases from one least-squares fit of ``x_D'``.

    Regresses the dealer's stage-one-corrected ``x`` on ``(x1, p1, x2', p2')``.
    Agrees with the correlation estimator as the sample grows, but the sample
    moments cancel exactly, so noiseless data is inverted to rounding error.
    """
    dealer_x = np.asarray(dealer_x, dtype=float)
    n = dealer_x.size
    if n < min_samples:
        raise DegenerateDataError(f"need at least {min_samples} samples, got {n}")
    design = np.column_stack([user1.x, user1.p, user2_s1.x, user2_s1.p])
    coef, _, rank, _ = np.linalg.lstsq(design, dealer_x, rcond=None)
    if rank < 4:
        raise IndeterminateAngleError("user quadratures are linearly dependent")
    return (float(np.arctan2(coef[1], coef[0])), float(np.arctan2(coef[3], coef[2])))


ESTIMATORS = ("correlation", "joint")


@dataclass(frozen=True)
class CompensationEstimate:
    delta1: float
    delta2: float
    n_samples: int
    v_slow: float = 0.0
    n_blocks: int = 1


@dataclass
class CompensatedData:
    """Fully compensated quadratures of the three parties."""

    user1: QuadPair
    user2: QuadPair
    dealer: QuadPair
    estimate: CompensationEstimate
    log: list[tuple[str, str]] = field(default_factory=list)

    def take(self, idx) -> "CompensatedData":
        return CompensatedData(self.user1.take(idx), self.user2.take(idx),
                               self.dealer.take(idx), self.estimate, list(self.log))


def stage_one(block: FrameBlock, log: list) -> tuple[QuadPair, QuadPair]:
    u2 = first_rotation(block.user2, block.theta2R)
    log.append(("stage1", "user2"))
    d = first_rotation(block.dealer, block.thetaDR)
    log.append(("stage1", "dealer"))
    return u2, d


def estimate_block(user1: QuadPair, user2_s1: QuadPair, dealer_s1: QuadPair, idx=None,
                   min_samples: int = 1000, method: str = "correlation") -> CompensationEstimate:
    if method not in ESTIMATORS:
        raise InvalidArgumentError(f"unknown estimator {method!r}")
    if idx is not None:
        user1, user2_s1, dealer_s1 = user1.take(idx), user2_s1.take(idx), dealer_s1.take(idx)
    if method == "joint":
        d1, d2 = estimate_joint_phases(user1, user2_s1, dealer_s1.x, min_samples)
    else:
        d1 = estimate_cumulative_phase(user1.x, user1.p, dealer_s1.x, min_samples)
        d2 = estimate_cumulative_phase(user2_s1.x, user2_s1.p, dealer_s1.x, min_samples)
    return CompensationEstimate(d1, d2, user1.size)


def compensate(block: FrameBlock, estimation_idx=None, min_samples: int = 1000,
               method: str = "correlation") -> CompensatedData:
    """Apply both stages to a whole block.

    The cumulative phases are estimated on ``estimation_idx`` (all frames
    when omitted) and the estimates are applied to every frame.
    """
    log: list[tuple[str, str]] = []
    u2, d = stage_one(block, log)
    est = estimate_block(block.user1, u2, d, estimation_idx, min_samples, method)
    u1 = second_rotation(block.user1, est.delta1)
    log.append(("stage2", "user1"))
    u2 = second_rotation(u2, est.delta2)
    log.append(("stage2", "user2"))
    return CompensatedData(u1, u2, d, est, log)


def compensate_blocks(block: FrameBlock, estimation_idx, block_size: int,
                      min_samples: int = 100, method: str = "correlation") -> CompensatedData:
    """Compensate consecutive blocks, each with its own cumulative-phase estimate.

    Block ``k`` is estimated from the frames of ``estimation_idx`` that fall
    inside it; the reported estimate belongs to the last block.  A trailing
    partial block is merged into its predecessor.
    """
    n = len(block)
    n_blocks = max(n // block_size, 1)
    edges = np.append(np.arange(n_blocks) * block_size, n)
    log: list[tuple[str, str]] = []
    u2_s1, d = stage_one(block, log)
    est_idx = np.asarray(estimation_idx)
    per_frame = np.empty((n, 2))
    for lo, hi in zip(edges[:-1], edges[1:]):
        idx = est_idx[(est_idx >= lo) & (est_idx < hi)]
        est = estimate_block(block.user1, u2_s1, d, idx, min_samples, method)
        per_frame[lo:hi] = est.delta1, est.delta2
    u1 = second_rotation(block.user1, per_frame[:, 0])
    log.append(("stage2", "user1"))
    u2 = second_rotation(u2_s1, per_frame[:, 1])
    log.append(("stage2", "user2"))
    final = CompensationEstimate(est.delta1, est.delta2, int(est_idx.size), 0.0, n_blocks)
    return CompensatedData(u1, u2, d, final, log)


def blockwise_compensation(block: FrameBlock, block_size: int, min_samples: int = 1000,
                           method: str = "correlation") -> tuple[CompensatedData, np.ndarray]:
    """Track a drifting cumulative phase block by block.

    The estimate from block ``k`` compensates block ``k + 1``; the first
    block uses its own estimate.  ``v_slow`` in the returned estimate is the
    sample variance of successive estimate differences.  Also returns the
    per-block estimates, shape ``(n_blocks, 2)``.
    """
    n_blocks = len(block) // block_size
    if n_blocks < 3:
        raise DegenerateDataError("need at least three estimation blocks")
    log: list[tuple[str, str]] = []
    u2_s1, d = stage_one(block, log)
    ests = np.empty((n_blocks, 2))
    for k in range(n_blocks):
        sl = slice(k * block_size, (k + 1) * block_size)
        e = estimate_block(block.user1.take(sl), u2_s1.take(sl), d.take(sl),
                           min_samples=min_samples, method=method)
        ests[k] = e.delta1, e.delta2
    applied = np.vstack([ests[:1], ests[:-1]])
    n_used = n_blocks * block_size
    per_frame = np.repeat(applied, block_size, axis=0)
    u1 = second_rotation(block.user1.take(slice(0, n_used)), per_frame[:, 0])
    log.append(("stage2", "user1"))
    u2 = second_rotation(u2_s1.take(slice(0, n_used)), per_frame[:, 1])
    log.append(("stage2", "user2"))
    diffs = np.diff(np.unwrap(ests, axis=0), axis=0)
    v_slow = float(np.mean(np.var(diffs, axis=0, ddof=1)))
    est = CompensationEstimate(float(ests[-1, 0]), float(ests[-1, 1]), block_size,
                               v_slow, n_blocks)
    return CompensatedData(u1, u2, d.take(slice(0, n_used)), est, log), ests
