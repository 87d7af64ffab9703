"""Closed-form arithmetic and memory cost per block at the minimum block size.

Counts assume ``W = 2N`` (so ``W_block = 3N + 1``) and include companding,
packing and unpacking additions and multiplications.  Frequency-domain
counts use the usual ``~5 n log2 n`` real-FFT approximation folded into the
coefficients below.
"""

from __future__ import annotations

import math
from enum import Enum

from .packing import PackingMode


class Domain(str, Enum):
    TIME = "time"
    FREQUENCY = "frequency"


def _domain(domain) -> Domain:
    try:
        return Domain(domain.value if isinstance(domain, Domain) else str(domain).lower())
    except ValueError:
        raise ValueError(f"unknown domain {domain!r}; expected 'time' or 'frequency'") from None


def flop_count(mode: PackingMode, domain, N: int) -> float:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    d = _domain(domain)
    if d is Domain.TIME:
        return {
            PackingMode.FULL: lambda: 4 * N * N,
            PackingMode.SYMMETRIC: lambda: N * N + N,
            PackingMode.ASYM2: lambda: 2.5 * N * N - N,
            PackingMode.ASYM3: lambda: 2 * N * N - 2 * N / 3,
        }[mode]()
    log2 = math.log2
    return {
        PackingMode.FULL: lambda: (45 * N + 15) * log2(3 * N + 1) + 3 * N + 1,
        PackingMode.SYMMETRIC: lambda: (22.5 * N + 7.5) * log2(3 * N + 1) + 5 * N + 1,
        PackingMode.ASYM2: lambda: (30 * N + 15) * log2(2 * N + 1) + 39 * N / 2 + 13 / 2,
        PackingMode.ASYM3: lambda: (25 * N + 15) * log2(5 * N / 3 + 1) + 62 * N / 3 + 7,
    }[mode]()


def memory_samples(mode: PackingMode, domain, N: int) -> int:
    """Working-set size in samples."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    time = _domain(domain) is Domain.TIME
    if mode is PackingMode.FULL:
        return 4 * N + 1 if time else 6 * N + 2
    if mode is PackingMode.SYMMETRIC:
        return 2 * N + 1 if time else 3 * N + 1
    if mode is PackingMode.ASYM2:
        return -(-5 * N // 2) if time else 3 * N + 1
    return 2 * N + 1


def theoretical_throughput(mode: PackingMode, domain, N: int) -> float:
    """Output samples per FLOP for one minimum-size block (``W = 2N`` outputs)."""
    return 2 * N / flop_count(mode, domain, N)
