"""Throughput benchmark and SNR grid, both reported as CSV."""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .companding import estimate_stats
from .errors import ConfigError
from .flops import flop_count
from .packing import PackingMode
from .pipeline import convolve
from .precision import SnrModel, calibrate, measured_snr_db, predicted_snr_db

log = logging.getLogger(__name__)

BENCH_COLUMNS = ["mode", "backend", "N", "W", "S_q", "K_q", "msamples_per_s", "gain_pct",
                 "snr_db", "flops"]
GRID_COLUMNS = ["s_q", "k_q", "mode", "predicted_db", "measured_db"]
TIMING_COLUMNS = ("msamples_per_s", "gain_pct")

# companding half-ranges used when a mode has no explicit setting
DEFAULT_RANGES = {PackingMode.SYMMETRIC: 16, PackingMode.ASYM3: 16, PackingMode.ASYM2: 256}


@dataclass
class BenchConfig:
    L: int = 1 << 20
    N: tuple = (800,)
    W: tuple = (32768,)
    modes: tuple = (PackingMode.FULL, PackingMode.SYMMETRIC, PackingMode.ASYM2, PackingMode.ASYM3)
    s_q: int | None = None
    k_q: int | None = None
    backend: str = "direct"
    repetitions: int = 3
    seed: int = 0
    bound_policy: str = "warn"
    workers: int = 1
    amplitude: float = 128.0

    def __post_init__(self):
        self.N = tuple(int(n) for n in np.atleast_1d(self.N))
        self.W = tuple(int(w) for w in np.atleast_1d(self.W))
        self.modes = tuple(m if isinstance(m, PackingMode) else PackingMode.parse(m)
                           for m in self.modes)
        self.validate()

    def validate(self) -> None:
        if self.repetitions < 3:
            raise ConfigError("repetitions must be >= 3 (median-of reporting)")
        if self.L < 1 or not self.N or min(self.N) < 1 or not self.W or min(self.W) < 2:
            raise ConfigError("need L >= 1, N >= 1 and W >= 2")
        if self.backend not in ("direct", "fft"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.bound_policy not in ("strict", "warn"):
            raise ConfigError(f"unknown bound policy {self.bound_policy!r}")
        if not self.modes:
            raise ConfigError("at least one mode is required")

    def ranges(self, mode: PackingMode) -> tuple[int | None, int | None]:
        if mode is PackingMode.FULL:
            return None, None
        d = DEFAULT_RANGES[mode]
        return self.s_q or d, self.k_q or self.s_q or d

    def header(self) -> str:
        d = asdict(self)
        d["modes"] = ",".join(m.value for m in self.modes)
        return "# " + " ".join(f"{k}={v}" for k, v in d.items())


@dataclass
class BenchRow:
    mode: str
    backend: str
    N: int
    W: int
    S_q: int | None
    K_q: int | None
    msamples_per_s: float
    gain_pct: float
    snr_db: float
    flops: float
    seconds: list = field(default_factory=list, repr=False)

    def as_csv(self) -> list:
        return [self.mode, self.backend, self.N, self.W,
                "" if self.S_q is None else self.S_q, "" if self.K_q is None else self.K_q,
                f"{self.msamples_per_s:.4f}", f"{self.gain_pct:.2f}", _fmt_db(self.snr_db),
                f"{self.flops:.6g}"]


def _fmt_db(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return "inf" if math.isinf(x) else f"{x:.4f}"


def time_median(fn, repetitions: int) -> tuple[float, object, list]:
    """Run ``fn`` once to warm up, then ``repetitions`` times; median seconds."""
    out = fn()
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out, times


def run_bench(config: BenchConfig) -> list[BenchRow]:
    rng = np.random.default_rng(config.seed)
    signal = rng.uniform(-config.amplitude, config.amplitude, config.L)
    domain = "frequency" if config.backend == "fft" else "time"
    rows = []
    for N in config.N:
        kernel = rng.uniform(-config.amplitude, config.amplitude, N)
        for W in config.W:
            def run(mode, s_q=None, k_q=None):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    return convolve(signal, kernel, mode, s_q=s_q or 16, k_q=k_q or 16,
                                    backend=config.backend, block_w=W,
                                    bound_policy=config.bound_policy, workers=config.workers)

            t_full, reference, _ = time_median(lambda: run(PackingMode.FULL), config.repetitions)
            n_out = config.L + N - 1
            thr_full = n_out / t_full / 1e6
            for mode in config.modes:
                s_q, k_q = config.ranges(mode)
                if mode is PackingMode.FULL:
                    t, out, times = t_full, reference, []
                else:
                    t, out, times = time_median(lambda: run(mode, s_q, k_q), config.repetitions)
                thr = n_out / t / 1e6
                row = BenchRow(mode=mode.value, backend=config.backend, N=N, W=W, S_q=s_q,
                               K_q=k_q, msamples_per_s=thr, gain_pct=100.0 * (thr / thr_full - 1),
                               snr_db=measured_snr_db(reference, out),
                               flops=flop_count(mode, domain, N), seconds=times)
                log.info("%s N=%d W=%d: %.2f Msamples/s (%+.1f%%), SNR %s dB", row.mode, N, W,
                         thr, row.gain_pct, _fmt_db(row.snr_db))
                rows.append(row)
    return rows


def write_bench_csv(rows, config: BenchConfig, stream) -> None:
    stream.write(config.header() + "\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())


@dataclass
class GridRow:
    s_q: int
    k_q: int
    mode: str
    predicted_db: float
    measured_db: float | None = None


def snr_grid(model: SnrModel, grid, mode="sym", signal=None, kernel=None,
             calibrate_at: tuple[int, int] | None = None, block_w: int | None = None,
             backend="direct") -> list[GridRow]:
    """Predicted SNR per ``(S_q, K_q)``, with measurements when inputs are given.

    ``grid`` holds ``(S_q, K_q)`` pairs or single ints (tied ranges).  When
    ``calibrate_at`` is set and ``signal``/``kernel`` are supplied, the model
    is first calibrated against one measurement there.  Measurements ignore
    the companding-range bound (warn policy).
    """
    mode = mode if isinstance(mode, PackingMode) else PackingMode.parse(mode)
    points = [(int(g), int(g)) if np.isscalar(g) else (int(g[0]), int(g[1])) for g in grid]
    have_inputs = signal is not None and kernel is not None
    reference = None

    def measure(s_q, k_q):
        nonlocal reference
        if reference is None:
            reference = convolve(signal, kernel, "full", block_w=block_w, backend=backend)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out = convolve(signal, kernel, mode, s_q=s_q, k_q=k_q, block_w=block_w,
                           backend=backend, bound_policy="warn")
        return measured_snr_db(reference, out)

    if calibrate_at is not None:
        if not have_inputs:
            raise ValueError("calibration needs a signal and a kernel")
        model = calibrate(model, measure(*calibrate_at), *calibrate_at, recalibrate=True)
    rows = []
    for s_q, k_q in points:
        rows.append(GridRow(s_q=s_q, k_q=k_q, mode=mode.value,
                            predicted_db=predicted_snr_db(model, s_q, k_q),
                            measured_db=measure(s_q, k_q) if have_inputs else None))
    return rows


def model_from_inputs(signal, kernel) -> SnrModel:
    return SnrModel.from_stats(estimate_stats(signal), estimate_stats(kernel), len(kernel))


def uniform_model(amplitude: float, N: int) -> SnrModel:
    """Model of iid uniform signal and kernel on ``[-amplitude, amplitude]``."""
    sigma = amplitude / math.sqrt(3.0)
    return SnrModel(sigma_s=sigma, sigma_k=sigma, peak_s=amplitude, peak_k=amplitude, N=N)


def write_grid_csv(rows, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(GRID_COLUMNS)
    for r in rows:
        w.writerow([r.s_q, r.k_q, r.mode, _fmt_db(r.predicted_db),
                    "" if r.measured_db is None else _fmt_db(r.measured_db)])


def csv_text(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()
