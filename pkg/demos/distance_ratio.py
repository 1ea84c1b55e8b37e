"""
Where user 2 sits
=================

Moving user 2 toward the dealer (larger l1/L) raises its weight T2/T1 in
the noise budget, so the rate falls.
"""

import numpy as np

from lloqss import ScanSpec, run_scan

for L in (20, 40):
    rows = run_scan(ScanSpec("ratio", np.linspace(0.05, 0.95, 10), total_distance=L))
    print(f"L = {L} km")
    for r in rows:
        print(f"  l1/L={r.point[0]:.2f}  eps={r.budget.eps_total:.4f}  R={r.rate:+.5f}")
