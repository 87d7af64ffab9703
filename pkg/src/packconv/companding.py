"""Uniform companding of real blocks onto bounded integer ranges, and back.

A block ``x`` with peak ``p = max|x|`` is mapped to integers in ``[-Q, Q]``
through ``q = round(c * x)`` with ``c = Q / p``.  Rounding is half away
from zero so the quantizer stays odd-symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def round_half_away(x):
    """Round to nearest integer, ties away from zero.

    Uses the truncated part explicitly; ``floor(|x| + 0.5)`` misrounds
    0.49999999999999994.
    """
    x = np.asarray(x, dtype=np.float64)
    whole = np.trunc(x)
    frac = x - whole
    return whole + np.where(np.abs(frac) >= 0.5, np.sign(x), 0.0)


@dataclass(frozen=True)
class CompandingSpec:
    s_q: int
    k_q: int

    def __post_init__(self):
        if int(self.s_q) < 1 or int(self.k_q) < 1:
            raise ValueError(f"companding half-ranges must be >= 1, got {self.s_q}, {self.k_q}")


@dataclass(frozen=True)
class QuantizedSignal:
    """Integer samples together with the factor and peak that produced them."""

    samples: np.ndarray
    c: float
    peak: float
    q: int

    @property
    def length(self) -> int:
        return len(self.samples)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class MarginalStats:
    sigma: float
    peak: float


def compand(block, Q: int) -> QuantizedSignal:
    x = np.asarray(block, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot compand an empty block")
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    peak = float(np.max(np.abs(x)))
    if peak == 0:
        # all-zero block: keep c = 1 instead of dividing by zero
        return QuantizedSignal(samples=np.zeros(x.shape, dtype=np.int64), c=1.0, peak=0.0,
                               q=int(Q))
    c = Q / peak
    if not np.isfinite(c) or not np.isfinite(peak):
        raise ValueError(f"block peak {peak!r} gives no finite companding factor")
    # scale by the peak first so the extremes land exactly on +-Q
    samples = round_half_away(Q * (x / peak)).astype(np.int64)
    return QuantizedSignal(samples=samples, c=c, peak=peak, q=int(Q))


def from_integers(samples, Q: int | None = None) -> QuantizedSignal:
    """Wrap already-integer data (companding factor 1).

    ``Q`` defaults to the peak magnitude; a larger value can be given to
    declare more headroom than the data uses.
    """
    arr = np.asarray(samples)
    ints = np.rint(arr).astype(np.int64)
    if not np.array_equal(ints, arr):
        raise ValueError("from_integers expects integer-valued samples")
    peak = int(np.max(np.abs(ints))) if ints.size else 0
    if Q is None:
        Q = max(peak, 1)
    if peak > Q:
        raise ValueError(f"samples reach {peak}, above the declared range {Q}")
    return QuantizedSignal(samples=ints, c=1.0, peak=float(peak), q=int(Q))


def inverse_compand(result, c_s: float, c_k: float) -> np.ndarray:
    if c_s <= 0 or c_k <= 0:
        raise ValueError("companding factors must be positive")
    return np.asarray(result, dtype=np.float64) / (c_s * c_k)


def estimate_stats(samples) -> MarginalStats:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot estimate statistics of an empty sample set")
    return MarginalStats(sigma=float(np.std(x)), peak=float(np.max(np.abs(x))))
