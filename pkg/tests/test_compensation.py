import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lloqss.compensation import (angle_from_correlations, blockwise_compensation, compensate,
                                 compensate_blocks, estimate_cumulative_phase, first_rotation,
                                 second_rotation, stage_one)
from lloqss.config import SystemConfig
from lloqss.errors import DegenerateDataError, IndeterminateAngleError
from lloqss.quadrature import QuadPair, mean_product, random_stream, rotate
from lloqss.simulation import SimulationParams, simulate_block

CFG = SystemConfig().with_distance(50)  # T1 = 0.1
STATIC = SimulationParams(walk_step=0.0, initial_delays=(0.0, 0.0, 0.3))


def _band(a, b):
    """Five standard errors of ``mean(a * b)``."""
    prod = np.asarray(a) * np.asarray(b)
    return 5.0 * np.std(prod) / math.sqrt(prod.size)


def test_first_rotation_examples():
    assert first_rotation(QuadPair(1.0, 0.0), 0.0) == pytest.approx((1.0, 0.0))
    out = first_rotation(QuadPair(1.0, 0.0), math.pi / 2)
    assert out == pytest.approx((0.0, 1.0), abs=1e-15)


def test_second_rotation_examples():
    assert second_rotation(QuadPair(0.4, -0.2), 0.0) == pytest.approx((0.4, -0.2))
    assert second_rotation(QuadPair(1.0, 0.0), math.pi) == pytest.approx((-1.0, 0.0), abs=1e-15)


def test_angle_full_circle():
    assert angle_from_correlations(-1.0, 0.0) == pytest.approx(math.pi)
    assert angle_from_correlations(-1.0, -1.0) == pytest.approx(-3 * math.pi / 4)
    assert angle_from_correlations(2.0, 2.0) == pytest.approx(math.pi / 4)


def test_estimate_on_noiseless_rotation():
    # finite-sample <x p> and <x^2> - <p^2> are the only error sources
    rng = random_stream(3)
    x, p = rng.normal(0, 2, (2, 5000))
    for true in (0.3, -2.9, 3.0):
        xd = 0.2 * rotate(QuadPair(x, p), true).x
        assert estimate_cumulative_phase(x, p, xd) == pytest.approx(true, abs=0.05)


def test_estimate_exact_with_balanced_quadratures():
    # orthonormalised quadratures make both correlations exact
    rng = random_stream(3)
    q, _ = np.linalg.qr(rng.normal(size=(5000, 2)))
    x, p = q.T
    for true in (0.3, -2.9, 3.0):
        xd = 0.2 * rotate(QuadPair(x, p), true).x
        assert estimate_cumulative_phase(x, p, xd) == pytest.approx(true, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_estimator_rescaling_invariant(c, seed):
    rng = random_stream(seed)
    x, p, n = rng.normal(0, 1, (3, 2000))
    xd = 0.5 * x + 0.3 * p + n
    base = estimate_cumulative_phase(x, p, xd)
    assert estimate_cumulative_phase(x, p, c * xd) == pytest.approx(base, abs=1e-12)


def test_estimator_indeterminate_on_uncorrelated():
    rng = random_stream(4)
    x, p, xd = rng.normal(0, 1, (3, 10_000))
    with pytest.raises(IndeterminateAngleError):
        estimate_cumulative_phase(x, p, xd)


def test_estimator_needs_samples():
    with pytest.raises(DegenerateDataError):
        estimate_cumulative_phase(np.ones(10), np.ones(10), np.ones(10))


def test_stage_separation_log():
    block = simulate_block(CFG, 2000, random_stream(0), STATIC)
    out = compensate(block)
    assert out.log == [("stage1", "user2"), ("stage1", "dealer"),
                       ("stage2", "user1"), ("stage2", "user2")]
    stage1 = {who for stage, who in out.log if stage == "stage1"}
    stage2 = {who for stage, who in out.log if stage == "stage2"}
    assert "user1" not in stage1 and "dealer" not in stage2


def test_stage_one_leaves_user1_alone():
    block = simulate_block(CFG, 500, random_stream(1), STATIC)
    before = block.user1.x.copy()
    stage_one(block, [])
    np.testing.assert_array_equal(block.user1.x, before)


def test_dealer_unchanged_by_stage_two():
    block = simulate_block(CFG, 2000, random_stream(2), STATIC)
    _, d = stage_one(block, [])
    out = compensate(block)
    np.testing.assert_array_equal(out.dealer.x, d.x)


def test_user2_total_rotation_composes():
    block = simulate_block(CFG, 2000, random_stream(5), STATIC)
    out = compensate(block)
    direct = rotate(block.user2, -block.theta2R + out.estimate.delta2)
    np.testing.assert_allclose(out.user2.x, direct.x, atol=1e-12)
    np.testing.assert_allclose(out.user2.p, direct.p, atol=1e-12)


@pytest.fixture(scope="module")
def identity_block():
    p = SimulationParams(walk_step=0.0, initial_delays=(0.1, -0.4, 0.3), reference_noise=False)
    return simulate_block(CFG, 200_000, random_stream(21), p)


def test_user1_correlation_identities(identity_block):
    b = identity_block
    _, d = stage_one(b, [])
    d1 = 0.3 - 0.1
    g1 = math.sqrt(b.eta * b.T1 / 2)
    x1, p1 = b.user1
    for u, trig in ((x1, math.cos), (p1, math.sin)):
        lhs = mean_product(u, d.x)
        rhs = g1 * trig(d1) * mean_product(x1, x1)
        resid = d.x - g1 * (math.cos(d1) * x1 + math.sin(d1) * p1)
        assert abs(lhs - rhs) <= _band(u, resid) + 5 * g1 * np.std(x1 * x1) / math.sqrt(x1.size)


def test_user2_correlation_identities(identity_block):
    b = identity_block
    u2, d = stage_one(b, [])
    d2 = 0.3 + 0.4
    g2 = math.sqrt(b.eta * b.T2 / 2)
    for u, trig in ((u2.x, math.cos), (u2.p, math.sin)):
        lhs = mean_product(u, d.x)
        rhs = g2 * trig(d2) * mean_product(u2.x, u2.x)
        resid = d.x - g2 * (math.cos(d2) * u2.x + math.sin(d2) * u2.p)
        assert abs(lhs - rhs) <= _band(u, resid) + 5 * g2 * np.std(u2.x ** 2) / math.sqrt(u2.size)


def test_cross_terms_vanish(identity_block):
    b = identity_block
    u2, d = stage_one(b, [])
    g1 = math.sqrt(b.eta * b.T1 / 2)
    g2 = math.sqrt(b.eta * b.T2 / 2)
    noise = d.x - g1 * rotate(b.user1, 0.2).x - g2 * rotate(u2, 0.7).x
    pairs = [(b.user1.x, u2.x), (b.user1.x, u2.p), (b.user1.x, noise), (b.user1.p, noise)]
    for a, c in pairs:
        assert abs(mean_product(a, c)) <= _band(a, c)


def test_residual_vanishes_on_estimation_frames():
    block = simulate_block(CFG, 100_000, random_stream(0), STATIC)
    out = compensate(block)
    c_x = mean_product(out.user1.x, out.dealer.x)
    c_p = mean_product(out.user1.p, out.dealer.x)
    assert abs(math.atan2(c_p, c_x)) < 1e-12


def test_residual_on_disjoint_frames():
    block = simulate_block(CFG, 200_000, random_stream(1), STATIC)
    est_idx = np.arange(100_000)
    out = compensate(block, est_idx)
    rest = out.take(slice(100_000, None))
    c_p = mean_product(rest.user1.p, rest.dealer.x)
    assert abs(c_p) <= _band(rest.user1.p, rest.dealer.x)


def test_noiseless_recovery_both_users():
    p = SimulationParams(walk_step=0.0, initial_delays=(0.0, 0.2, -0.5),
                         detection_noise=False, reference_noise=False)
    block = simulate_block(CFG, 100_000, random_stream(7), p)
    out = compensate(block)
    assert out.estimate.delta1 == pytest.approx(-0.5, abs=0.03)
    assert out.estimate.delta2 == pytest.approx(-0.7, abs=0.03)


def test_compensate_blocks_tracks_walk():
    p = SimulationParams(walk_step=1e-3)
    block = simulate_block(CFG, 200_000, random_stream(8), p)
    idx = np.arange(0, 200_000, 5)
    out = compensate_blocks(block, idx, 20_000)
    assert out.estimate.n_blocks == 10
    # the last block's estimate tracks that block's mean cumulative phase
    assert abs(out.estimate.delta1 - block.delta_true[0][-20_000:].mean()) < 0.15


def test_blockwise_v_slow():
    p = SimulationParams(walk_step=1e-3)
    block = simulate_block(CFG, 300_000, random_stream(9), p)
    out, ests = blockwise_compensation(block, 30_000)
    assert ests.shape == (10, 2)
    # walk variance per block for a difference of two walks plus estimator jitter
    assert 0.5 * 30_000 * 2e-6 < out.estimate.v_slow < 4 * 30_000 * 2e-6
    with pytest.raises(DegenerateDataError):
        blockwise_compensation(block, 200_000)


def test_error_scaling_with_samples():
    rms = []
    ns = (1_000, 10_000, 100_000)
    for n in ns:
        errs = [compensate(simulate_block(CFG, n, random_stream(s, n), STATIC)).estimate.delta1 - 0.3
                for s in range(40)]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log10(ns), np.log10(rms), 1)[0]
    assert -0.6 <= slope <= -0.4


NOISELESS = SimulationParams(walk_step=0.0, initial_delays=(0.05, 0.2, -0.5),
                             detection_noise=False, reference_noise=False)


def test_joint_estimator_inverts_noiseless_data():
    block = simulate_block(CFG, 5000, random_stream(12), NOISELESS)
    out = compensate(block, method="joint")
    assert out.estimate.delta1 == pytest.approx(-0.55, abs=1e-9)
    assert out.estimate.delta2 == pytest.approx(-0.7, abs=1e-9)


def test_correlation_estimator_finite_sample_error_on_noiseless_data():
    # the per-user correlation estimator is only consistent, not exact
    block = simulate_block(CFG, 5000, random_stream(12), NOISELESS)
    err = compensate(block).estimate.delta1 + 0.55
    assert 1e-9 < abs(err) < 0.1


def test_estimators_agree_on_large_samples():
    block = simulate_block(CFG, 100_000, random_stream(13), STATIC)
    a = compensate(block).estimate
    b = compensate(block, method="joint").estimate
    assert a.delta1 == pytest.approx(b.delta1, abs=0.03)
    assert a.delta2 == pytest.approx(b.delta2, abs=0.03)


def test_joint_estimator_needs_both_users():
    cfg = CFG.replace(modulation_variances=(4.0, 0.0))
    block = simulate_block(cfg, 5000, random_stream(14), NOISELESS)
    with pytest.raises(IndeterminateAngleError):
        compensate(block, method="joint")
