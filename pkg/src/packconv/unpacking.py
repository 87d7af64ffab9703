"""Disentangling packed convolution outputs and assembling the final result.

Every packed output is a sum of integers sitting at powers of
``eps = 1/(2 R)``, ``R`` being the packing radix.  Unpacking follows the
offset/floor/rescale discipline: shift by ``R`` in the slot being read,
take the floor, add a small guard ``u_sys`` so floating-point noise cannot
push a value below an integer boundary.  The positive offset is never added
in floating point; it is folded into the floor arguments analytically
(``eps * R = 1/2``), which keeps the magnitudes handled at the scale of the
data instead of ``~4 R**2`` where one ulp exceeds ``eps``.

Lower slots contribute at most ``(R - 1)(eps + eps**2 + ...)`` in either
direction, so an offset of exactly ``1/2`` centres them and leaves a margin
of about ``eps/2`` against both neighbouring integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .companding import inverse_compand, round_half_away
from .conv_core import U_SYS_DEFAULT, BlockPlan
from .errors import SeamMismatch, UnpackOverflow
from .packing import PackingMode


@dataclass(frozen=True)
class UnpackContext:
    r_max: int
    epsilon: float
    u_sys: float = U_SYS_DEFAULT
    w_start: int = 0
    mode: PackingMode = PackingMode.SYMMETRIC

    def __post_init__(self):
        if self.u_sys < 0:
            raise ValueError("u_sys must be nonnegative")

    @property
    def inv_epsilon(self) -> float:
        return float(round(1.0 / self.epsilon))

    @property
    def r_safe(self) -> float:
        e = self.epsilon
        return self.r_max * (e + 1 + 1 / e) + self.u_sys / e


def _overflow_check(values, limit, what):
    bad = np.abs(values) > limit
    if np.any(bad):
        worst = int(np.max(np.abs(values)))
        raise UnpackOverflow(f"{what} reached {worst}, above the range {limit}")


def unpack_symmetric(packed_out, ctx: UnpackContext) -> np.ndarray:
    """Recover two integer outputs per packed output.

    ``packed_out[i]`` is the packed result at ``m = ctx.w_start + i``.  The
    returned array holds ``r[2m], r[2m+1]`` interleaved, starting at
    ``r[2*w_start]``.  That first even output needs the side-eps term of
    ``m - 1``, which is not available; it is seeded as zero and is only
    exact when ``w_start == 0``.
    """
    x = np.asarray(packed_out, dtype=np.float64)
    inv = ctx.inv_epsilon
    R = ctx.r_max
    g = ctx.u_sys
    # side-eps^-1: floor(eps*x + 1/2 + u_sys)
    side_inv = np.floor(x / inv + (0.5 + g))
    rest = x - inv * side_inv
    # base: floor(u) - side_inv/eps - R, folded offset is 1/2 + u_sys/eps
    base = np.floor(rest + (0.5 + g * inv))
    # side-eps: (frac(u) - offset)/eps, i.e. the residual below the base slot
    side_eps = (rest - base) * inv
    _overflow_check(side_inv, R, "side-eps^-1 output")
    _overflow_check(base, R, "base output")

    lagged = np.empty_like(side_eps)
    lagged[0] = 0.0
    lagged[1:] = side_eps[:-1]
    out = np.empty(2 * len(x), dtype=np.int64)
    out[0::2] = round_half_away(side_inv + lagged).astype(np.int64)
    out[1::2] = base.astype(np.int64)
    return out


def disentangle(packed_out, ctx: UnpackContext, M: int) -> np.ndarray:
    """Split ``v = sum_q eps**q * t_q`` into integer rows ``t_0 .. t_{M-1}``.

    Digit ``q`` is ``floor(v + 1/2 + u_sys)``, after which the remainder is
    rescaled by ``1/eps``.  A digit that lands one past ``+R`` (possible only
    when the digits fill the whole radix, every lower one at ``+R``) is
    clamped to ``R`` and the unit carried back down.
    """
    if M not in (2, 3):
        raise ValueError(f"asymmetric unpacking supports M in {{2, 3}}, got {M}")
    rem = np.asarray(packed_out, dtype=np.float64).copy()
    inv = ctx.inv_epsilon
    R = ctx.r_max
    digits = np.empty((M, len(rem)), dtype=np.int64)
    for q in range(M - 1):
        t = np.floor(rem + (0.5 + ctx.u_sys))
        _overflow_check(t, R + 1, f"segment {q} output")
        t = np.clip(t, -R, R)
        digits[q] = t.astype(np.int64)
        rem = (rem - t) * inv
    t = round_half_away(rem)
    _overflow_check(t, R + 1, f"segment {M - 1} output")
    digits[M - 1] = np.clip(t, -R, R).astype(np.int64)
    return digits


def unpack_asymmetric(packed_out, ctx: UnpackContext, M: int, segment_len: int,
                      overlap_start: int = 0) -> np.ndarray:
    """Disentangle and place segment ``q`` at offset ``q * segment_len``.

    Segments overlap when each was packed with more than ``segment_len``
    samples.  Position ``i`` is then taken from the segment whose full-overlap
    region contains it, i.e. ``q = (i - overlap_start) // segment_len``
    clipped to ``[0, M-1]``; overlap-save callers pass ``N - 1``.
    """
    digits = disentangle(packed_out, ctx, M)
    n = digits.shape[1]
    total = (M - 1) * segment_len + n
    i = np.arange(total)
    q = np.clip((i - overlap_start) // segment_len, 0, M - 1)
    j = i - q * segment_len
    if np.any(j >= n):
        raise ValueError("segments are too short to tile the output")
    return digits[q, j]


def assemble_output(block_results, plan: BlockPlan, c_s, c_k: float = 1.0,
                    debug: bool = False) -> np.ndarray:
    """Place per-block results into the full output and undo companding.

    ``block_results[w][j]`` is block ``w``'s convolution output at block index
    ``j``.  Block 0 contributes ``j < W + N - 1`` directly; later blocks keep
    ``W`` samples from ``j = 2*W_start + 2`` at ``N - 1 + W*w``.
    """
    if len(block_results) != plan.P:
        raise ValueError(f"expected {plan.P} block results, got {len(block_results)}")
    c_s = np.broadcast_to(np.asarray(c_s, dtype=np.float64), (plan.P,))
    out = np.empty(plan.P * plan.W + plan.N - 1, dtype=np.float64)
    for w, r in enumerate(block_results):
        lo = plan.keep_from(w)
        n = plan.keep_count(w)
        dst = plan.output_offset(w)
        out[dst: dst + n] = inverse_compand(np.asarray(r)[lo: lo + n], c_s[w], c_k)
        if debug and w > 0 and c_s[w] == c_s[w - 1]:
            _check_seam(block_results, plan, w)
    return out[: plan.output_len]


def _check_seam(block_results, plan: BlockPlan, w: int) -> None:
    # block w recomputes output N - 1 + w*W - 1 (its index j = N) that block w-1 kept;
    # j = N - 1 is skipped, it carries the seeded side-eps term under symmetric packing
    prev_start = plan.block_start(w - 1)
    here = plan.block_start(w) + plan.N
    prev = np.asarray(block_results[w - 1])[here - prev_start]
    cur = np.asarray(block_results[w])[plan.N]
    if prev != cur:
        raise SeamMismatch(f"blocks {w - 1} and {w} disagree at output {here}: {prev} vs {cur}")
