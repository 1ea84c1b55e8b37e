"""
Adding users
============

Every extra relay adds its own modulation, quantisation and reference noise.
Compare the symmetric layout (equal spacing) with users packed behind user 1.
"""

from lloqss import SystemConfig, max_distance

cfg = SystemConfig()
print(f"{'n':>3} {'symmetric km':>13} {'asymmetric km':>14}")
for n in (1, 2, 3, 5, 8, 10, 12, 15):
    sym = max_distance(cfg, "symmetric", n)
    asym = max_distance(cfg, "asymmetric", n)
    print(f"{n:3d} {sym:13.2f} {asym:14.2f}")
