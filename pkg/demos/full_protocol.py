"""
End-to-end (2,2) run
====================

Simulate, compensate, estimate the transmittances from disclosed frames,
compute the per-link rates and share a message by XOR broadcast.
"""

from lloqss import SystemConfig, random_stream, run_protocol

cfg = SystemConfig().with_distance(20)
res = run_protocol(cfg, 1_000_000, random_stream(0))

print("true T:     ", cfg.transmittances())
print("estimated T:", res.t_hat)
print("gain after removing the other user's data:", res.subtraction_gain)
print(f"rate from estimates {res.rate:.5f}, analytic {res.analytic.rate:.5f} bits/pulse")
print("frames left for the key:", res.block.key_indices().size)

if res.ciphertext is not None:
    print("broadcast:", res.ciphertext[:16].hex(), "...")
    print("decoded:  ", res.decoded)
