"""Block-wise companded and packed convolution around an unmodified core.

Per block: compand (per-block peak), pack, convolve with the backend,
unpack to integers, inverse-compand, and place via overlap-save.  The
kernel is companded and packed once per ``(mode, S_q, K_q)``.

The packing radix is the power of two above ``R = N * S_q * K_q``, the
largest output magnitude (see ``packing.packing_range``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .companding import compand, estimate_stats, from_integers
from .conv_core import U_SYS_DEFAULT, BlockPlan, DirectBackend, get_backend, plan_blocks
from .packing import (
    PackingMode,
    check_bound,
    companding_range,
    pack_asymmetric_signal,
    pack_symmetric_kernel_for_convolution,
    pack_symmetric_signal,
    packing_coefficient,
    packing_range,
)
from .precision import DEFAULT_CANDIDATES, SnrModel, select_mode
from .unpacking import UnpackContext, assemble_output, unpack_asymmetric, unpack_symmetric

log = logging.getLogger(__name__)


def _as_mode(mode) -> PackingMode:
    return mode if isinstance(mode, PackingMode) else PackingMode.parse(mode)


def _as_backend(backend):
    if backend is None:
        return DirectBackend()
    if isinstance(backend, str):
        return get_backend(backend)
    return backend


def _odd(k: np.ndarray) -> np.ndarray:
    return k if len(k) % 2 else np.append(k, np.zeros(1, dtype=k.dtype))


@dataclass
class KernelSetup:
    """Companded and packed kernel for one ``(mode, S_q, K_q)``."""

    mode: PackingMode
    s_q: int
    k_q: int
    ints: np.ndarray
    c_k: float
    r_max: int
    radix: int
    epsilon: float
    packed: np.ndarray | None


def prepare_kernel(kernel, mode: PackingMode, s_q: int, k_q: int, integer: bool = False,
                   bound_policy: str = "strict") -> KernelSetup:
    kernel = np.asarray(kernel)
    n = len(kernel)
    if integer:
        qk = from_integers(kernel, k_q)
    else:
        qk = compand(kernel, k_q)
    r_max = companding_range(n, s_q, k_q)
    if mode is not PackingMode.FULL:
        check_bound(mode, r_max, bound_policy)
    radix = packing_range(r_max)
    eps = packing_coefficient(radix)
    ints = _odd(qk.samples)
    packed = None
    if mode is PackingMode.SYMMETRIC:
        packed = pack_symmetric_kernel_for_convolution(ints, eps).values
    return KernelSetup(mode=mode, s_q=s_q, k_q=k_q, ints=ints, c_k=qk.c, r_max=r_max,
                       radix=radix, epsilon=eps, packed=packed)


def _integer_block(s_int: np.ndarray, ks: KernelSetup, plan: BlockPlan, w: int,
                   backend, u_sys: float) -> np.ndarray:
    """Integer convolution outputs of one block, indexed by block output ``j``."""
    N = plan.N
    region = "full" if w == 0 else "valid"
    r = np.zeros(plan.W_block + N, dtype=np.int64)
    if ks.mode is PackingMode.FULL:
        conv = backend.convolve(s_int.astype(np.float64), ks.ints.astype(np.float64), region)
        lo = 0 if w == 0 else N - 1
        hi = min(len(r), lo + len(conv))
        r[lo:hi] = np.rint(conv[: hi - lo]).astype(np.int64)
        return r

    backend.check(plan.n_original, ks.r_max)
    w_start = plan.w_start(w)
    ctx = UnpackContext(r_max=ks.radix, epsilon=ks.epsilon, u_sys=u_sys,
                        w_start=w_start, mode=ks.mode)
    if ks.mode is PackingMode.SYMMETRIC:
        packed = pack_symmetric_signal(s_int, ks.epsilon, ks.radix).values
        half = plan.W_block // 2
        conv = backend.convolve(packed, ks.packed, region)
        # valid region starts at m = (N-1)/2 = w_start, full at m = 0
        vals = conv[: half - w_start]
        ints = unpack_symmetric(vals, ctx)
        r[2 * w_start: 2 * w_start + len(ints)] = ints
        return r

    M = ks.mode.m
    stride = plan.W // M
    seg_len = stride + N + 1
    packed = pack_asymmetric_signal(s_int, ks.epsilon, M, plan.W, length=seg_len,
                                    r_max=ks.radix).values
    conv = backend.convolve(packed, ks.ints.astype(np.float64), region)
    if w == 0:
        placed = unpack_asymmetric(conv, ctx, M, stride, overlap_start=N - 1)
        n = min(len(placed), len(r))
        r[:n] = placed[:n]
    else:
        placed = unpack_asymmetric(conv, ctx, M, stride)
        n = min(len(placed), len(r) - (N - 1))
        r[N - 1: N - 1 + n] = placed[:n]
    return r


def _blocks(source: np.ndarray, plan: BlockPlan):
    padded = np.zeros(plan.padded_len, dtype=source.dtype)
    padded[: plan.L] = source
    for w in range(plan.P):
        start = plan.block_start(w)
        yield w, padded[start: start + plan.W_block]


def _run(fn, items, workers: int):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda a: fn(*a), items))
    return [fn(*a) for a in items]


def convolve(signal, kernel, mode="full", s_q: int = 16, k_q: int = 16, backend=None,
             block_w: int | None = None, bound_policy: str = "strict",
             u_sys: float = U_SYS_DEFAULT, workers: int = 1, debug: bool = False) -> np.ndarray:
    """Approximate linear convolution of real sequences; ``len = L + N - 1``."""
    mode = _as_mode(mode)
    backend = _as_backend(backend)
    s = np.asarray(signal, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if s.size == 0 or k.size == 0:
        raise ValueError("signal and kernel must be nonempty")
    plan = plan_blocks(len(s), len(k), block_w, mode)

    if mode is PackingMode.FULL:
        kf = _odd(k)

        def full_block(w, block):
            r = np.zeros(plan.W_block + plan.N)
            conv = backend.convolve(block, kf, "full" if w == 0 else "valid")
            lo = 0 if w == 0 else plan.N - 1
            hi = min(len(r), lo + len(conv))
            r[lo:hi] = conv[: hi - lo]
            return r

        results = _run(full_block, _blocks(s, plan), workers)
        return assemble_output(results, plan, 1.0, 1.0, debug=debug)

    ks = prepare_kernel(k, mode, s_q, k_q, bound_policy=bound_policy)

    def packed_block(w, block):
        qs = compand(block, s_q)
        return _integer_block(qs.samples, ks, plan, w, backend, u_sys), qs.c

    out = _run(packed_block, _blocks(s, plan), workers)
    return assemble_output([r for r, _ in out], plan, [c for _, c in out], ks.c_k, debug=debug)


def correlate(signal, kernel, **kwargs) -> np.ndarray:
    """Full cross-correlation: convolution with the time-reversed kernel."""
    return convolve(signal, np.asarray(kernel)[::-1], **kwargs)


def convolve_integers(signal, kernel, mode="full", s_q: int | None = None,
                      k_q: int | None = None, backend=None, block_w: int | None = None,
                      bound_policy: str = "strict", u_sys: float = U_SYS_DEFAULT,
                      workers: int = 1, debug: bool = False) -> np.ndarray:
    """Integer-domain pipeline (companding factors 1); exact within the mode's bound.

    ``s_q`` and ``k_q`` default to the peak magnitudes of the inputs.
    """
    mode = _as_mode(mode)
    backend = _as_backend(backend)
    qs = from_integers(signal, s_q)
    qk = from_integers(kernel, k_q)
    plan = plan_blocks(len(qs), len(qk), block_w, mode)
    ks = prepare_kernel(qk.samples, mode, qs.q, qk.q, integer=True, bound_policy=bound_policy)
    items = list(_blocks(qs.samples, plan))
    results = _run(lambda w, b: _integer_block(b, ks, plan, w, backend, u_sys), items, workers)
    out = assemble_output(results, plan, 1.0, 1.0, debug=debug)
    return np.rint(out).astype(np.int64)


@dataclass
class BlockDecision:
    block: int
    floor_db: float
    decision: object
    sigma_s: float
    peak_s: float


@dataclass
class AdaptiveResult:
    output: np.ndarray
    decisions: list = field(default_factory=list)
    plan: BlockPlan | None = None


def convolve_adaptive(signal, kernel, snr_floor_db, candidates=DEFAULT_CANDIDATES,
                      calibration_offset_db: float = 0.0, ratio: float | None = None,
                      backend=None, block_w: int | None = None, u_sys: float = U_SYS_DEFAULT,
                      workers: int = 1) -> AdaptiveResult:
    """Per-block mode choice under an SNR floor.

    ``snr_floor_db`` is a scalar or one value per block; a short sequence
    holds its last value for the remaining blocks.
    """
    backend = _as_backend(backend)
    s = np.asarray(signal, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    # geometry must suit every candidate: W a multiple of 2*M for asymmetric ones
    step = 1
    for mode in candidates:
        if mode.is_asymmetric:
            step = step * 2 * mode.m // math.gcd(step, 2 * mode.m)
    n_odd = len(k) if len(k) % 2 else len(k) + 1
    w_req = max(block_w or 0, 2 * n_odd)
    w_req = -(-w_req // max(step, 2)) * max(step, 2)
    plan = plan_blocks(len(s), len(k), w_req, PackingMode.FULL)
    floors = np.atleast_1d(np.asarray(snr_floor_db, dtype=np.float64))
    k_stats = estimate_stats(k)
    setups = {}
    kf = _odd(k)

    def block_fn(w, block):
        floor = float(floors[min(w, len(floors) - 1)])
        st = estimate_stats(block)
        model = SnrModel.from_stats(st, k_stats, len(k), calibration_offset_db)
        dec = select_mode(model, floor, candidates, ratio)
        info = BlockDecision(block=w, floor_db=floor, decision=dec, sigma_s=st.sigma,
                             peak_s=st.peak)
        if dec.mode is PackingMode.FULL:
            r = np.zeros(plan.W_block + plan.N)
            conv = backend.convolve(block, kf, "full" if w == 0 else "valid")
            lo = 0 if w == 0 else plan.N - 1
            hi = min(len(r), lo + len(conv))
            r[lo:hi] = conv[: hi - lo]
            return r, 1.0, 1.0, info
        key = (dec.mode, dec.s_q, dec.k_q)
        ks = setups.get(key)
        if ks is None:
            ks = setups[key] = prepare_kernel(k, dec.mode, dec.s_q, dec.k_q)
        qs = compand(block, dec.s_q)
        r = _integer_block(qs.samples, ks, plan, w, backend, u_sys)
        return r, qs.c, ks.c_k, info

    out = _run(block_fn, _blocks(s, plan), workers)
    # c_k can differ per block when K_q does; fold it into the per-block factor
    results = [r for r, *_ in out]
    factors = [c_s * c_k for _, c_s, c_k, _ in out]
    output = assemble_output(results, plan, factors, 1.0)
    decisions = [info for *_, info in out]
    for d in decisions:
        log.info("block %d floor %.1f dB -> %s (S_q=%s, K_q=%s, predicted %.2f dB)",
                 d.block, d.floor_db, d.decision.mode.value, d.decision.s_q,
                 d.decision.k_q, d.decision.predicted_snr_db)
    return AdaptiveResult(output=output, decisions=decisions, plan=plan)
