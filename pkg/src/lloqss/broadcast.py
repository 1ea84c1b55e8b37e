"""XOR encoding of the dealer's broadcast message.

The dealer publishes ``E = M ^ K_1 ^ ... ^ K_n``; only the coalition of all
users holding every ``K_j`` can strip the mask.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from .errors import InvalidArgumentError


def encode_broadcast(message: bytes, keys) -> bytes:
    """Bytewise XOR of ``message`` with every key (decoding is the same call)."""
    keys = list(keys)
    n = len(message)
    if any(len(k) != n for k in keys):
        raise InvalidArgumentError("every key must be as long as the message")
    arrays = [np.frombuffer(bytes(b), dtype=np.uint8) for b in (message, *keys)]
    return reduce(np.bitwise_xor, arrays).tobytes()


decode_broadcast = encode_broadcast


def random_key(n_bytes: int, rng: np.random.Generator) -> bytes:
    return rng.integers(0, 256, n_bytes, dtype=np.uint8).tobytes()
