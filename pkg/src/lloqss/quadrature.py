"""Quadrature-plane helpers: rotations, Gaussian draws and second moments.

Quadratures are in shot-noise units (vacuum variance 1).  A :class:`QuadPair`
holds either two scalars or two equally shaped arrays, so a whole block of
frames can be rotated or sampled in one call.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError


class QuadPair(NamedTuple):
    """An ``(x, p)`` quadrature sample, or a series of them."""

    x: np.ndarray | float
    p: np.ndarray | float

    @property
    def size(self) -> int:
        return int(np.size(self.x))

    def take(self, idx) -> "QuadPair":
        return QuadPair(np.asarray(self.x)[idx], np.asarray(self.p)[idx])

    def scale(self, c: float) -> "QuadPair":
        return QuadPair(c * np.asarray(self.x), c * np.asarray(self.p))

    def __add__(self, other):  # type: ignore[override]
        if not isinstance(other, QuadPair):
            return NotImplemented
        return QuadPair(self.x + other.x, self.p + other.p)

    def __sub__(self, other):
        if not isinstance(other, QuadPair):
            return NotImplemented
        return QuadPair(self.x - other.x, self.p - other.p)


def _require_finite(name, *values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError(f"{name} must be finite")


def rotate(v: QuadPair, phi) -> QuadPair:
    """Rotate by ``phi`` with the matrix ``[[cos, sin], [-sin, cos]]``.

    ``phi`` may be a scalar or an array broadcasting against ``v``.
    """
    _require_finite("quadrature", v.x, v.p)
    _require_finite("angle", phi)
    c, s = np.cos(phi), np.sin(phi)
    x = v.x * c + v.p * s
    p = -v.x * s + v.p * c
    if np.ndim(x) == 0:
        return QuadPair(float(x), float(p))
    return QuadPair(x, p)


def random_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, stream_id)``.

    Streams with the same seed and different ids are statistically
    independent (``SeedSequence`` spawn keys).
    """
    if seed < 0 or stream_id < 0:
        raise InvalidArgumentError("seed and stream id must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def sample_gaussian_pair(variance: float, rng: np.random.Generator,
                         size: int | None = None) -> QuadPair:
    """Independent zero-mean normal ``x`` and ``p`` with the given variance."""
    if not np.isfinite(variance) or variance < 0:
        raise InvalidArgumentError(f"variance must be >= 0, got {variance}")
    sd = float(np.sqrt(variance))
    if size is None:
        x, p = rng.normal(0.0, 1.0, 2) * sd
        return QuadPair(float(x), float(p))
    draws = rng.normal(0.0, 1.0, (2, size)) * sd
    return QuadPair(draws[0], draws[1])


def mean_product(a, b) -> float:
    """Arithmetic mean of the elementwise product ``<a b>``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvalidArgumentError("series must be one-dimensional and of equal length")
    if a.size < 2:
        raise InvalidArgumentError("series must hold at least two samples")
    return float(np.dot(a, b) / a.size)
