"""Tight packing of companded integers into double-precision values.

Two packings are provided:

* symmetric: consecutive signal samples are paired as ``a + eps*b`` and
  kernel taps as ``a + b/eps``, so one packed product carries the two
  cross terms of a pair of outputs;
* asymmetric(M): ``M`` segments of a block are stacked at ``eps**0 ..
  eps**(M-1)`` and convolved with the plain integer kernel.

``eps = 1 / (2 * r_max)`` where ``r_max`` bounds every integer carried in a
packed slot.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .companding import QuantizedSignal
from .errors import BoundExceeded, IndexOverrun

log = logging.getLogger(__name__)

SYMMETRIC_LIMIT = 97667
ASYM2_LIMIT = 43165096
ASYM3_LIMIT = 97667


class PackingMode(enum.Enum):
    FULL = "full"
    SYMMETRIC = "sym"
    ASYM2 = "asym2"
    ASYM3 = "asym3"

    @property
    def m(self) -> int | None:
        """Number of stacked segments for asymmetric modes."""
        return {PackingMode.ASYM2: 2, PackingMode.ASYM3: 3}.get(self)

    @property
    def is_asymmetric(self) -> bool:
        return self.m is not None

    @property
    def label(self) -> str:
        return {
            PackingMode.FULL: "full-precision",
            PackingMode.SYMMETRIC: "symmetric",
            PackingMode.ASYM2: "asymmetric(M=2)",
            PackingMode.ASYM3: "asymmetric(M=3)",
        }[self]

    @property
    def limit(self) -> int | None:
        """Largest companding range with guaranteed error-free unpacking."""
        return {
            PackingMode.SYMMETRIC: SYMMETRIC_LIMIT,
            PackingMode.ASYM2: ASYM2_LIMIT,
            PackingMode.ASYM3: ASYM3_LIMIT,
        }.get(self)

    @classmethod
    def parse(cls, name: str) -> "PackingMode":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown packing mode {name!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None


def asymmetric(m: int) -> PackingMode:
    if m == 2:
        return PackingMode.ASYM2
    if m == 3:
        return PackingMode.ASYM3
    raise ValueError(f"asymmetric packing supports M in {{2, 3}}, got {m}")


@dataclass(frozen=True)
class PackedSignal:
    values: np.ndarray
    epsilon: float
    r_max: int
    mode: PackingMode
    source_len: int
    segment_len: int | None = None

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class PackedKernel:
    values: np.ndarray
    mode: PackingMode
    n_original: int

    def __len__(self):
        return len(self.values)


def companding_range(N: int, s_q: float, k_q: float) -> int:
    if N < 1 or s_q < 1 or k_q < 1:
        raise ValueError("companding_range arguments must all be >= 1")
    # floor kept for non-integer companding factors
    return int(math.floor(N * s_q * k_q))


def packing_coefficient(r_max: int) -> float:
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    return 1.0 / (2 * r_max)


def packing_range(r_max: int) -> int:
    """Smallest power of two strictly above ``r_max``, used as the packing radix.

    A radix of exactly ``r_max`` packs ``2*r_max + 1`` values per slot into a
    ``2*r_max`` wide digit, so ``(t, +r_max)`` and ``(t + 1, -r_max)`` collide.
    A power of two also makes ``eps`` dyadic: packed values, products and
    partial sums are then exact binary multiples of ``eps``, which keeps
    direct-form convolution exact up to the mode limits.
    """
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    return 1 << int(r_max).bit_length()


def check_bound(mode: PackingMode, r_max: int, policy: str = "strict") -> bool:
    """Return True if ``r_max`` is within the mode's limit.

    A violation raises ``BoundExceeded`` under ``policy="strict"``; under
    ``policy="warn"`` it emits a ``RuntimeWarning`` and returns False.
    """
    if mode is PackingMode.FULL:
        raise ValueError("full-precision mode has no companding-range bound")
    if policy not in ("strict", "warn"):
        raise ValueError(f"unknown bound policy {policy!r}")
    limit = mode.limit
    if r_max <= limit:
        return True
    if policy == "strict":
        raise BoundExceeded(mode, r_max, limit)
    warnings.warn(str(BoundExceeded(mode, r_max, limit)), RuntimeWarning, stacklevel=2)
    return False


def _radix(epsilon: float) -> float | None:
    """``1/eps`` when it is an integer (the usual case), else None."""
    inv = 1.0 / epsilon
    r = round(inv)
    return float(r) if abs(inv - r) <= 1e-9 * inv else None


def _samples(q) -> np.ndarray:
    if isinstance(q, QuantizedSignal):
        return q.samples
    return np.asarray(q, dtype=np.int64)


def pack_symmetric_signal(q, epsilon: float, r_max: int | None = None) -> PackedSignal:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    s = _samples(q).astype(np.float64)
    n = len(s)
    if n % 2:
        s = np.append(s, 0.0)
    radix = _radix(epsilon)
    if radix is not None:
        # exact integer numerator, one rounding
        values = (radix * s[0::2] + s[1::2]) / radix
    else:
        values = s[0::2] + epsilon * s[1::2]
    if r_max is None:
        r_max = round(1.0 / (2 * epsilon))
    return PackedSignal(values=values, epsilon=epsilon, r_max=r_max,
                        mode=PackingMode.SYMMETRIC, source_len=n)


def pack_symmetric_kernel(q, epsilon: float) -> PackedKernel:
    """Pair taps as ``k[2n] + k[2n+1]/eps``; a trailing unpaired tap gets a zero partner."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    k = _samples(q).astype(np.float64)
    n = len(k)
    if n % 2:
        k = np.append(k, 0.0)
    values = k[0::2] + (1.0 / epsilon) * k[1::2]
    return PackedKernel(values=values, mode=PackingMode.SYMMETRIC, n_original=n)


def pack_symmetric_kernel_for_convolution(q, epsilon: float) -> PackedKernel:
    """Packed kernel in the orientation a convolution core consumes.

    The pairing of ``pack_symmetric_kernel`` is defined on the kernel as it
    slides over the signal, i.e. time-reversed.  Packing the reversed
    kernel (padded to even length) and reversing the packed taps back gives
    ``K[b] = k[2b+1] + k[2b]/eps``: the base slot of ``sum s_packed[m-b] K[b]``
    is then the exact output ``r[2m+1]`` and the two side slots are the
    even- and odd-tap halves of ``r[2m]``.
    """
    k = _samples(q)
    n = len(k)
    if n % 2 == 0:
        raise ValueError("symmetric packing expects an odd-length kernel; pad it first")
    reoriented = np.append(k, 0)[::-1]
    packed = pack_symmetric_kernel(reoriented, epsilon)
    return PackedKernel(values=packed.values[::-1].copy(), mode=PackingMode.SYMMETRIC,
                        n_original=n)


def pack_asymmetric_signal(q, epsilon: float, M: int, W: int,
                           length: int | None = None,
                           r_max: int | None = None) -> PackedSignal:
    """Stack ``M`` segments spaced ``W // M`` apart at powers of ``eps``.

    ``length`` is the number of packed values; it defaults to
    ``len(q) // M``.  Overlap-save callers pass ``W // M + N + 1`` so that
    each segment carries its own kernel overlap.
    """
    if M not in (2, 3):
        raise ValueError(f"asymmetric packing supports M in {{2, 3}}, got {M}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    s = _samples(q).astype(np.float64)
    w_block = len(s)
    stride = W // M
    if length is None:
        length = w_block // M
    if w_block < length + (M - 1) * stride:
        raise IndexOverrun(
            f"block of {w_block} samples cannot supply {M} segments of {length} "
            f"at stride {stride}"
        )
    segments = [s[seg * stride: seg * stride + length] for seg in range(M)]
    radix = _radix(epsilon)
    peak = float(np.max(np.abs(s))) if s.size else 0.0
    if radix is not None and 2.0 * peak * radix ** (M - 1) < 2.0 ** 53:
        # Horner on integers is exact; divide once
        acc = segments[0].copy()
        for seg in segments[1:]:
            acc = acc * radix + seg
        values = acc / radix ** (M - 1)
    else:
        values = segments[0].copy()
        scale = 1.0
        for seg in segments[1:]:
            scale *= epsilon
            values += scale * seg
    if r_max is None:
        r_max = round(1.0 / (2 * epsilon))
    return PackedSignal(values=values, epsilon=epsilon, r_max=r_max,
                        mode=asymmetric(M), source_len=w_block, segment_len=stride)
