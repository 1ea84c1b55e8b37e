"""
Choosing the reference intensity
================================

A brighter reference pulse measures the phase better but leaks more
photons into the signal slots.  The two noise terms cross at the optimum.
"""

import numpy as np

from lloqss import SystemConfig, noise_budget, optimal_reference_intensity
from lloqss.optimize import optimal_reference_intensity_bisect

cfg = SystemConfig().with_distance(50)
a_opt = optimal_reference_intensity(cfg)
print(f"closed form {a_opt:.2f}, bisection {optimal_reference_intensity_bisect(cfg):.2f}")

for a in (500, 2000, a_opt, 6500, 20000):
    b = noise_budget(cfg, ref_intensity=a)
    print(f"|alpha_R1|^2={a:8.1f}  eps_error={b.eps_error:.5f}  eps_LE={b.eps_le:.5f}  "
          f"sum={b.eps_error + b.eps_le:.5f}")

# the optimum grows with distance: chi_D rises as T1 falls
for L in (10, 20, 40, 60):
    print(L, "km:", round(optimal_reference_intensity(cfg.with_distance(L)), 1))

# the product of the two terms never depends on the intensity
prods = [noise_budget(cfg, ref_intensity=a).eps_error * noise_budget(cfg, ref_intensity=a).eps_le
         for a in np.geomspace(100, 1e5, 5)]
print("eps_error * eps_LE:", np.round(prods, 10))
