"""Overlap-save block planning and the convolution backends.

Each block yields ``W`` outputs (``W + N - 1`` for the first) from
``W_block = W + N + 1`` input samples.  Block ``w > 0`` starts at source
offset ``w*W - 2`` so that packed sample pairs stay aligned with even
source indices; its outputs ``j`` in ``[N + 1, W + N]`` land at
``N - 1 + w*W + (j - N - 1)`` in the full result.

Backends treat packed doubles as opaque operands.  Both provided backends
are stateless apart from the FFT backend's record of flagged regimes, so
one instance per worker is the safe pattern for that one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import BackendPrecisionFailure
from .packing import (
    PackingMode,
    pack_symmetric_kernel_for_convolution,
    pack_symmetric_signal,
    packing_coefficient,
    packing_range,
)

U_SYS_DEFAULT = 3.1193e-11


@dataclass(frozen=True)
class BlockPlan:
    L: int
    N: int
    n_original: int
    W: int
    W_block: int
    P: int
    mode: PackingMode
    tail_pad: int

    def w_start(self, w: int) -> int:
        return 0 if w == 0 else (self.N - 1) // 2

    def block_start(self, w: int) -> int:
        """Source offset of block ``w``'s first sample."""
        return 0 if w == 0 else w * self.W - 2

    def output_offset(self, w: int) -> int:
        """Where block ``w``'s first kept output lands in the full result."""
        return 0 if w == 0 else self.N - 1 + w * self.W

    def keep_from(self, w: int) -> int:
        """Index of block ``w``'s first kept output, ``2*W_start + 2`` for w > 0."""
        return 0 if w == 0 else 2 * self.w_start(w) + 2

    def keep_count(self, w: int) -> int:
        return self.W + self.N - 1 if w == 0 else self.W

    @property
    def padded_len(self) -> int:
        """Source length after the final block's zero padding."""
        return self.L + self.tail_pad

    @property
    def output_len(self) -> int:
        return self.L + self.n_original - 1


def plan_blocks(L: int, N: int, W_requested: int | None = None,
                mode: PackingMode = PackingMode.FULL) -> BlockPlan:
    if L < 1 or N < 1:
        raise ValueError(f"need L >= 1 and N >= 1, got L={L}, N={N}")
    n_odd = N if N % 2 else N + 1
    W = 2 * n_odd if W_requested is None else max(int(W_requested), 2 * n_odd)
    step = 2 * mode.m if mode.is_asymmetric else 2
    W = -(-W // step) * step
    P = -(-L // W)
    # last block reads up to block_start(P-1) + W_block
    last_start = 0 if P == 1 else (P - 1) * W - 2
    padded = last_start + W + n_odd + 1
    return BlockPlan(L=L, N=n_odd, n_original=N, W=W, W_block=W + n_odd + 1, P=P,
                     mode=mode, tail_pad=padded - L)


@dataclass(frozen=True)
class BackendInfo:
    algorithm: str
    exact_integer_limit: float | None


class DirectBackend:
    """Time-domain convolution; exact on integer operands below 2**53."""

    info = BackendInfo(algorithm="direct", exact_integer_limit=2.0 ** 53)

    def check(self, N: int, r_max: int) -> None:
        pass

    def convolve(self, signal, kernel, region: str = "full") -> np.ndarray:
        return np.convolve(signal, kernel, mode=region)


@dataclass
class FFTBackend:
    """Real-FFT convolution at the next 2/3/5-smooth transform length.

    Keeps the set of ``(N, r_max)`` regimes that failed validation; using
    the backend in such a regime raises ``BackendPrecisionFailure``.
    """

    flagged: set = field(default_factory=set)
    info = BackendInfo(algorithm="fft", exact_integer_limit=None)

    def check(self, N: int, r_max: int) -> None:
        if (N, r_max) in self.flagged:
            raise BackendPrecisionFailure(
                f"fft backend failed validation at N={N}, r_max={r_max}"
            )

    def convolve(self, signal, kernel, region: str = "full") -> np.ndarray:
        signal = np.asarray(signal, dtype=np.float64)
        kernel = np.asarray(kernel, dtype=np.float64)
        n_full = len(signal) + len(kernel) - 1
        nfft = scipy.fft.next_fast_len(n_full, real=True)
        prod = scipy.fft.rfft(signal, nfft) * scipy.fft.rfft(kernel, nfft)
        full = scipy.fft.irfft(prod, nfft)[:n_full]
        if region == "full":
            return full
        if region == "valid":
            lo, hi = sorted((len(signal), len(kernel)))
            return full[lo - 1: hi]
        raise ValueError(f"unknown region {region!r}")


def get_backend(name: str):
    if name == "direct":
        return DirectBackend()
    if name == "fft":
        return FFTBackend()
    raise ValueError(f"unknown backend {name!r}")


def convolve_block(backend, signal, kernel, region: str = "full") -> np.ndarray:
    signal = np.asarray(signal, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.size == 0:
        raise ValueError("kernel must be nonempty")
    if signal.size < kernel.size:
        raise ValueError("signal must be at least as long as the kernel")
    return backend.convolve(signal, kernel, region)


@dataclass(frozen=True)
class ValidationResult:
    passed: bool
    max_abs_error: float
    N: int
    r_max: int
    algorithm: str

    def __bool__(self):
        return self.passed


def _worst_case_operands(rng, N: int, r_max: int, length: int):
    """Saturated symmetric-packed operands for the regime ``(N, r_max)``."""
    n_odd = N if N % 2 else N + 1
    side = max(1, int(math.isqrt(max(r_max // N, 1))))
    eps = packing_coefficient(packing_range(r_max))
    s = side * rng.choice([-1, 1], size=length)
    k = side * rng.choice([-1, 1], size=n_odd)
    if n_odd != N:
        k[-1] = 0
    return (pack_symmetric_signal(s, eps).values,
            pack_symmetric_kernel_for_convolution(k, eps).values)


def validate_backend(backend, N: int, r_max: int, u_sys: float = U_SYS_DEFAULT,
                     trials: int = 100, seed: int = 0,
                     signal_len: int | None = None) -> ValidationResult:
    """Compare ``backend`` to the direct backend on saturated packed operands.

    Fails when the largest absolute deviation exceeds ``0.5 * u_sys``.  A
    failing FFT backend records the regime so later use raises.
    """
    rng = np.random.default_rng(seed)
    reference = DirectBackend()
    if signal_len is None:
        signal_len = 4 * (N if N % 2 else N + 1) + 2
    worst = 0.0
    for _ in range(max(trials, 1)):
        s, k = _worst_case_operands(rng, N, r_max, signal_len)
        got = backend.convolve(s, k, "full")
        want = reference.convolve(s, k, "full")
        worst = max(worst, float(np.max(np.abs(got - want))))
    passed = worst <= 0.5 * u_sys
    flagged = getattr(backend, "flagged", None)
    if flagged is not None:
        if passed:
            flagged.discard((N, r_max))
        else:
            flagged.add((N, r_max))
    return ValidationResult(passed=passed, max_abs_error=worst, N=N, r_max=r_max,
                            algorithm=backend.info.algorithm)


def calibrate_usys(backend, N: int, r_max: int, trials: int = 100, seed: int = 0,
                   safety: float = 4.0) -> float:
    """Measure the backend's worst deviation on integer operands, times ``safety``."""
    rng = np.random.default_rng(seed)
    side = max(1, int(math.isqrt(max(r_max // N, 1))))
    worst = 0.0
    for _ in range(max(trials, 1)):
        s = rng.integers(-side, side + 1, size=4 * N + 2).astype(np.float64)
        k = rng.integers(-side, side + 1, size=N).astype(np.float64)
        got = backend.convolve(s, k, "full")
        exact = np.convolve(s, k)
        worst = max(worst, float(np.max(np.abs(got - exact))))
    return safety * worst if worst > 0 else np.finfo(np.float64).eps
