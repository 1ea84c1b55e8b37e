"""
Key rate against distance
=========================

Noise budget, key rate and tolerable excess noise of a symmetric two-user
system, with the reference intensity re-optimised at every distance.
"""

import numpy as np

from lloqss import SystemConfig, max_distance, plob_bound, tolerable_excess_noise
from lloqss.optimize import rate_at

cfg = SystemConfig()  # global parameters, ideal detector

print(f"{'L km':>6} {'a_opt':>8} {'eps':>8} {'eps_tol':>8} {'R':>10} {'PLOB':>8}")
for L in np.arange(5.0, 61.0, 5.0):
    at = cfg.with_distance(L)
    res, a = rate_at(at)
    t1 = float(at.transmittances()[0])
    print(f"{L:6.1f} {a:8.1f} {res.budget.eps_total:8.4f} "
          f"{tolerable_excess_noise(at):8.4f} {res.rate:10.5f} {plob_bound(t1):8.4f}")

# the rate edge is where the budget meets the tolerable noise
L_max = max_distance(cfg)
print(f"\nmaximum distance: {L_max:.2f} km")

# a detector with losses and electronic noise
from lloqss import DetectorParams

practical = cfg.replace(detector=DetectorParams(eta=0.6, v_el=0.01))
print(f"practical detector: {max_distance(practical):.2f} km")
