"""Analytic companding-noise model and SNR-floor driven mode selection.

With iid zero-mean inputs of standard deviations ``sigma_s``, ``sigma_k``
and uniform rounding noise of standard deviations
``peak_s / (S_q sqrt 12)`` and ``peak_k / (K_q sqrt 12)``, the expected noise
power of each output of an ``N``-tap convolution is::

    D = N * [(sigma_s * nk)**2 + (sigma_k * ns)**2 + (nk * ns)**2]

against a signal power of ``N * (sigma_s * sigma_k)**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import DegenerateSignal
from .packing import PackingMode

DEFAULT_CANDIDATES = (PackingMode.SYMMETRIC, PackingMode.ASYM2, PackingMode.FULL)


@dataclass(frozen=True)
class SnrModel:
    sigma_s: float
    sigma_k: float
    peak_s: float
    peak_k: float
    N: int
    calibration_offset_db: float = 0.0

    def __post_init__(self):
        for name in ("sigma_s", "sigma_k", "peak_s", "peak_k"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not math.isfinite(self.calibration_offset_db):
            raise ValueError("calibration offset must be finite")

    @classmethod
    def from_stats(cls, signal_stats, kernel_stats, N: int, calibration_offset_db: float = 0.0):
        return cls(sigma_s=signal_stats.sigma, sigma_k=kernel_stats.sigma,
                   peak_s=signal_stats.peak, peak_k=kernel_stats.peak, N=N,
                   calibration_offset_db=calibration_offset_db)

    def quantization_sigmas(self, s_q: int, k_q: int) -> tuple[float, float]:
        root12 = math.sqrt(12.0)
        return self.peak_s / (s_q * root12), self.peak_k / (k_q * root12)


@dataclass(frozen=True)
class ModeDecision:
    mode: PackingMode
    s_q: int | None
    k_q: int | None
    predicted_snr_db: float


def noise_power(model: SnrModel, s_q: int, k_q: int) -> float:
    if s_q < 1 or k_q < 1:
        raise ValueError("companding half-ranges must be >= 1")
    ns, nk = model.quantization_sigmas(s_q, k_q)
    return model.N * ((model.sigma_s * nk) ** 2 + (model.sigma_k * ns) ** 2 + (nk * ns) ** 2)


def predicted_snr_db(model: SnrModel, s_q: int, k_q: int) -> float:
    signal = model.N * (model.sigma_s * model.sigma_k) ** 2
    if signal == 0:
        raise DegenerateSignal("signal or kernel has zero variance")
    return 10.0 * math.log10(signal / noise_power(model, s_q, k_q)) + model.calibration_offset_db


def calibrate(model: SnrModel, measured_snr_db: float, at_s_q: int, at_k_q: int,
              recalibrate: bool = False) -> SnrModel:
    """Shift the model so it reproduces one measurement exactly."""
    if model.calibration_offset_db != 0 and not recalibrate:
        raise ValueError("model is already calibrated; pass recalibrate=True to replace the offset")
    raw = predicted_snr_db(replace(model, calibration_offset_db=0.0), at_s_q, at_k_q)
    return replace(model, calibration_offset_db=measured_snr_db - raw)


def max_ranges(mode: PackingMode, N: int, ratio: float | None = None) -> tuple[int, int] | None:
    """Largest ``(S_q, K_q)`` whose companding range stays within the mode's limit.

    Tied ranges by default; ``ratio`` fixes ``K_q ~ ratio * S_q`` and
    maximizes the product.  Returns None if even ``(1, 1)`` is too large.
    """
    limit = mode.limit
    if limit is None:
        raise ValueError("full-precision mode has no companding ranges")
    if ratio is None:
        s = math.isqrt(limit // N) if limit >= N else 0
        return (s, s) if s >= 1 else None
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    s = max(1, int(math.sqrt(limit / (N * ratio))) + 1)
    while s >= 1:
        k = max(1, int(math.floor(ratio * s)))
        if N * s * k <= limit:
            return s, k
        s -= 1
    return None


def select_mode(model: SnrModel, snr_floor_db: float, candidates=DEFAULT_CANDIDATES,
                ratio: float | None = None) -> ModeDecision:
    """Pick the first (fastest) candidate whose best bound-respecting ranges meet the floor."""
    degenerate = model.sigma_s * model.sigma_k == 0
    for mode in candidates:
        if mode is PackingMode.FULL:
            return ModeDecision(PackingMode.FULL, None, None, math.inf)
        ranges = max_ranges(mode, model.N, ratio)
        if ranges is None:
            continue
        s_q, k_q = ranges
        # zero-energy operands give an exactly zero output in every mode
        snr = math.inf if degenerate else predicted_snr_db(model, s_q, k_q)
        if snr >= snr_floor_db:
            return ModeDecision(mode, s_q, k_q, snr)
    return ModeDecision(PackingMode.FULL, None, None, math.inf)


def measured_snr_db(reference, approx) -> float:
    ref = np.asarray(reference, dtype=np.float64)
    app = np.asarray(approx, dtype=np.float64)
    if ref.shape != app.shape:
        raise ValueError(f"length mismatch: {ref.shape} vs {app.shape}")
    energy = float(np.dot(ref, ref))
    if energy == 0:
        raise DegenerateSignal("reference has zero energy")
    err = ref - app
    noise = float(np.dot(err, err))
    if noise == 0:
        return math.inf
    return 10.0 * math.log10(energy / noise)


def fit_laplacian_moments(samples) -> float:
    """Scale ``b`` of a zero-mean Laplacian with the sample variance (``var = 2 b**2``)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 32:
        raise ValueError("need at least 32 samples")
    var = float(np.mean(x ** 2))
    if var == 0 or np.ptp(x) == 0:
        raise DegenerateSignal("constant samples")
    return math.sqrt(var / 2.0)


def laplacian_sigma(b: float) -> float:
    return math.sqrt(2.0) * b


def _weibull_cv2(kappa: float) -> float:
    return math.exp(gammaln(1 + 2 / kappa) - 2 * gammaln(1 + 1 / kappa)) - 1.0


def fit_weibull_moments(samples) -> tuple[float, float]:
    """Scale ``lambda`` and shape ``kappa`` matching the sample mean and variance."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 32:
        raise ValueError("need at least 32 samples")
    if np.any(x < 0):
        raise ValueError("Weibull samples must be nonnegative")
    mean = float(np.mean(x))
    var = float(np.var(x))
    if var == 0 or mean == 0:
        raise DegenerateSignal("constant samples")
    target = var / mean ** 2
    lo, hi = 0.05, 200.0
    target = min(max(target, _weibull_cv2(hi)), _weibull_cv2(lo))
    kappa = brentq(lambda k: _weibull_cv2(k) - target, lo, hi, xtol=1e-12)
    lam = mean / math.exp(gammaln(1 + 1 / kappa))
    return lam, kappa


def weibull_sigma(lam: float, kappa: float) -> float:
    """Square root of the raw second moment of Weibull(lam, kappa)."""
    return lam * math.exp(0.5 * gammaln(1 + 2 / kappa))
