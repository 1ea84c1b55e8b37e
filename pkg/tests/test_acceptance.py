"""Acceptance gate.

One test per criterion; each prints a single ``criterion N: PASS|FAIL`` line
(shown even under output capture) before asserting.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from lloqss.broadcast import decode_broadcast, encode_broadcast, random_key
from lloqss.compensation import compensate, stage_one
from lloqss.config import SystemConfig
from lloqss.keyrate import KeyRateInputs, link_key_rate, plob_bound
from lloqss.noise import noise_budget
from lloqss.optimize import (ScanSpec, max_distance, optimal_reference_intensity,
                             optimal_reference_intensity_bisect, positive_region, rate_at,
                             run_scan, tolerable_excess_noise)
from lloqss.protocol import run_protocol
from lloqss.quadrature import QuadPair, mean_product, random_stream, rotate
from lloqss.simulation import SimulationParams, estimate_transmittance, simulate_block

DEFAULT = SystemConfig()  # global parameters, ideal detector, V_slow = 0


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail, started):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; "
                  f"{time.perf_counter() - started:.2f} s)")
        assert ok, detail
    return _report


def test_criterion_01_lossless_oracle(report):
    t0 = time.perf_counter()
    r = link_key_rate(KeyRateInputs.from_variance(4.0, 1.0, 0.0, 1.0, 0.0, 0.95))
    ok = abs(r.chi_de) < 1e-9 and abs(r.rate - 0.95 * math.log2(3)) <= 1e-5
    report(1, ok, f"chi_DE={r.chi_de:.3e}, R={r.rate:.6f}", t0)


@pytest.fixture(scope="module")
def l_max():
    return max_distance(DEFAULT)


def test_criterion_02_symmetric_max_distance(report, l_max):
    t0 = time.perf_counter()
    again = max_distance(DEFAULT)
    ok = 70 <= l_max <= 95 and abs(again - l_max) <= 0.1
    report(2, ok, f"max distance {l_max:.3f} km, rerun {again:.3f} km, band [70, 95]", t0)


def test_criterion_03_tolerable_identity(report, l_max):
    t0 = time.perf_counter()
    cfg = DEFAULT.with_distance(l_max)
    res, _ = rate_at(cfg)
    tol = tolerable_excess_noise(cfg)
    gap = abs(res.budget.eps_total - tol)
    report(3, gap < 1e-3, f"L={l_max:.3f} km, eps_total={res.budget.eps_total:.6f}, "
                          f"eps_tolerable={tol:.6f}", t0)


def test_criterion_04_reference_optimum(report):
    t0 = time.perf_counter()
    worst_gap = worst_rel = 0.0
    for L in (10, 20, 40, 60):
        cfg = DEFAULT.with_distance(L)
        a = optimal_reference_intensity(cfg)
        b = noise_budget(cfg, ref_intensity=a)
        worst_gap = max(worst_gap, abs(b.eps_error - b.eps_le) / b.eps_le)
        worst_rel = max(worst_rel, abs(optimal_reference_intensity_bisect(cfg) / a - 1))
    a50 = optimal_reference_intensity(DEFAULT.with_distance(50))
    ok = worst_gap < 1e-9 and worst_rel < 1e-6 and abs(a50 - 4384.6) <= 0.5
    report(4, ok, f"max |eps_error-eps_LE|/eps_LE={worst_gap:.1e}, closed vs bisection "
                  f"{worst_rel:.1e}, optimum at 50 km {a50:.2f}", t0)


def test_criterion_05_variance_region(report):
    t0 = time.perf_counter()
    g1 = tuple(np.linspace(0, 15, 52)[1:-1])
    g2 = tuple(np.linspace(0, 25, 52)[1:-1])
    regions = [positive_region(ScanSpec("variance", g1, grid2=g2, total_distance=L))
               for L in (5, 20, 40)]
    ok = bool(regions[0]) and regions[0] >= regions[1] >= regions[2]
    sizes = "/".join(str(len(r)) for r in regions)
    report(5, ok, f"positive points at 5/20/40 km: {sizes} of 2500, nested={ok}", t0)


def test_criterion_06_ratio_monotone(report):
    t0 = time.perf_counter()
    ok = True
    for L in (55, 80):
        rows = run_scan(ScanSpec("ratio", np.linspace(0, 1, 20), total_distance=L))
        rates = np.array([r.rate for r in rows])
        eps = np.array([r.budget.eps_total for r in rows])
        ok &= bool(np.all(np.diff(rates) <= 0) and np.all(np.diff(eps) >= 0))
    report(6, ok, "R nonincreasing and eps_total nondecreasing in l1/L at 55 and 80 km", t0)


def test_criterion_07_user_capacity(report):
    t0 = time.perf_counter()
    asym = max_distance(DEFAULT, "asymmetric", 30)
    sym25 = max_distance(DEFAULT, "symmetric", 25)
    sym30 = max_distance(DEFAULT, "symmetric", 30)
    below_plob = True
    for placement in ("symmetric", "asymmetric"):
        for n in (25, 30):
            for L in np.arange(1.0, 131.0, 5.0):
                cfg = DEFAULT.replace(placement=placement).with_distance(L, n)
                r = rate_at(cfg)[0].rate
                below_plob &= r < plob_bound(float(cfg.transmittances()[0]))
    ok = 95 <= asym <= 130 and sym25 > 0 and sym30 < sym25 and below_plob
    report(7, ok, f"asymmetric n=30 max distance {asym:.2f} km (band [95, 130]), "
                  f"symmetric n=25 {sym25:.2f} km, n=30 {sym30:.2f} km, "
                  f"all below PLOB={below_plob}", t0)


T01 = DEFAULT.with_distance(50)  # T1 = 0.1
STATIC = SimulationParams(walk_step=0.0, initial_delays=(0.0, 0.0, 0.3))


def test_criterion_08_estimator(report):
    t0 = time.perf_counter()
    block = simulate_block(T01, 100_000, random_stream(0), STATIC)
    out = compensate(block)
    est = out.estimate.delta1
    theta_res = math.atan2(mean_product(out.user1.p, out.dealer.x),
                           mean_product(out.user1.x, out.dealer.x))
    ns = (1_000, 10_000, 100_000)
    rms = []
    for n in ns:
        errs = [compensate(simulate_block(T01, n, random_stream(s, 1), STATIC)).estimate.delta1
                - 0.3 for s in range(40)]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log10(ns), np.log10(rms), 1)[0]
    ok = abs(est - 0.3) <= 0.02 and -0.6 <= slope <= -0.4 and abs(theta_res) < 0.01
    report(8, ok, f"estimate {est:.4f} rad, error slope {slope:.3f}, "
                  f"residual angle {theta_res:.1e} rad", t0)


def test_criterion_09_correlation_identities(report):
    t0 = time.perf_counter()
    d1, d2 = 0.3 - 0.1, 0.3 + 0.4
    p = SimulationParams(walk_step=0.0, initial_delays=(0.1, -0.4, 0.3), reference_noise=False)
    b = simulate_block(T01, 200_000, random_stream(0, 9), p)
    u2, d = stage_one(b, [])
    n = b.user1.size
    g1, g2 = math.sqrt(b.eta * b.T1 / 2), math.sqrt(b.eta * b.T2 / 2)

    def within(sample, predicted):
        # five standard errors of the difference of the two sample means
        return abs(np.mean(sample - predicted)) <= 5 * np.std(sample - predicted) / math.sqrt(n)

    x1, p1 = b.user1
    checks = {
        "x1 xD'": within(x1 * d.x, g1 * math.cos(d1) * x1 * x1),
        "p1 xD'": within(p1 * d.x, g1 * math.sin(d1) * x1 * x1),
        "x2' xD'": within(u2.x * d.x, g2 * math.cos(d2) * u2.x * u2.x),
        "p2' xD'": within(u2.p * d.x, g2 * math.sin(d2) * u2.x * u2.x),
    }
    noise = d.x - g1 * rotate(b.user1, d1).x - g2 * rotate(u2, d2).x
    for name, a, c in (("x1 x2", x1, u2.x), ("x1 p2", x1, u2.p), ("x1 xN'", x1, noise)):
        checks[name] = within(a * c, np.zeros(n))
    failed = [k for k, v in checks.items() if not v]
    report(9, not failed, f"{len(checks) - len(failed)}/{len(checks)} identities within 5 sigma"
                          + (f", failed {failed}" if failed else ""), t0)


def test_criterion_10_transmittance(report):
    t0 = time.perf_counter()
    res = run_protocol(T01, 1_000_000, random_stream(0, 10))
    n_disclosed = res.partition["transmittance"].size
    rng = random_stream(1, 10)
    u = QuadPair(*rng.normal(0, 2, (2, 10_000)))
    exact = estimate_transmittance(u, u.scale(math.sqrt(0.1 / 2)), 1.0)
    ok = abs(res.t_hat[0] - 0.1) <= 0.01 and abs(exact - 0.1) < 1e-12 and n_disclosed == 100_000
    report(10, ok, f"T1_hat={res.t_hat[0]:.5f} from {n_disclosed} frames, noiseless "
                   f"error {abs(exact - 0.1):.1e}", t0)


def test_criterion_11_broadcast(report):
    t0 = time.perf_counter()
    rng = random_stream(0, 11)
    n = 1_000_000
    message = (b"all users must cooperate " * (n // 25 + 1))[:n]
    keys = [random_key(n, rng) for _ in range(3)]
    e = encode_broadcast(message, keys)
    roundtrip = decode_broadcast(e, keys) == message
    p_min = 1.0
    for withheld in range(3):
        partial = np.frombuffer(decode_broadcast(e, keys[:withheld] + keys[withheld + 1:]),
                                np.uint8)
        p_min = min(p_min, stats.chisquare(np.bincount(partial, minlength=256)).pvalue)
        bits = np.unpackbits(partial).reshape(-1, 8).sum(axis=0)
        for ones in bits:
            p_min = min(p_min, stats.chisquare([ones, n - ones]).pvalue)
    ok = roundtrip and p_min > 1e-3
    report(11, ok, f"roundtrip={roundtrip}, smallest chi-square p-value {p_min:.3f}", t0)
