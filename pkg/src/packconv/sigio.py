"""Signal files: raw little-endian float64 (canonical) and 16-bit mono PCM WAV.

WAV samples map to doubles by ``x / 32768``, so full scale is ``[-1, 1)``.
Writing clips to that range (with a warning) and rounds half away from zero.
"""

from __future__ import annotations

import logging
import wave
from pathlib import Path

import numpy as np

from .companding import round_half_away

log = logging.getLogger(__name__)

WAV_SCALE = 32768.0


def _is_wav(path) -> bool:
    return Path(path).suffix.lower() == ".wav"


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % 8:
        raise ValueError(f"{path}: size {len(data)} is not a multiple of 8 bytes")
    return np.frombuffer(data, dtype="<f8").astype(np.float64)


def write_raw(path, samples) -> None:
    Path(path).write_bytes(np.asarray(samples, dtype="<f8").tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1 or f.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit mono PCM is supported")
        rate = f.getframerate()
        frames = f.readframes(f.getnframes())
    return np.frombuffer(frames, dtype="<i2").astype(np.float64) / WAV_SCALE, rate


def write_wav(path, samples, rate: int = 44100) -> None:
    x = np.asarray(samples, dtype=np.float64) * WAV_SCALE
    lo, hi = -WAV_SCALE, WAV_SCALE - 1
    clipped = int(np.count_nonzero((x < lo) | (x > hi)))
    if clipped:
        log.warning("%s: clipping %d of %d samples to 16-bit range", path, clipped, x.size)
    pcm = np.clip(round_half_away(x), lo, hi).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(pcm.tobytes())


def read_signal(path) -> tuple[np.ndarray, int | None]:
    """Samples and sample rate (None for raw files), chosen by extension."""
    if _is_wav(path):
        return read_wav(path)
    return read_raw(path), None


def write_signal(path, samples, rate: int | None = None) -> None:
    if _is_wav(path):
        write_wav(path, samples, rate or 44100)
    else:
        write_raw(path, samples)
