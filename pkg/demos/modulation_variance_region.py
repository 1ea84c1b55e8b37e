"""
Which modulation variances give a key?
======================================

Scan the (V_U1, V_U2) plane and count the grid points with positive key
rate.  The region narrows as the distance grows.
"""

import numpy as np

from lloqss import ScanSpec
from lloqss.optimize import positive_region

g1 = np.linspace(0.5, 14.5, 15)
g2 = np.linspace(0.5, 24.5, 25)

regions = {}
for L in (5, 20, 40):
    regions[L] = positive_region(ScanSpec("variance", g1, grid2=g2, total_distance=L))
    print(f"{L:3d} km: {len(regions[L]):4d} of {g1.size * g2.size} points positive")

print("nested:", regions[5] >= regions[20] >= regions[40])

# crude picture of the 20 km region: rows are V_U1, columns V_U2
for v1 in g1:
    print(f"{v1:5.1f} " + "".join("#" if (v1, v2) in regions[20] else "." for v2 in g2))
