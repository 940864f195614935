"""Signal conditioning: band-pass to the BCG band and resample to 100 Hz."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .io import Signal

MODEL_HZ = 100.0
BAND = (1.0, 10.0)
ORDER = 3


def bandpass(signal: Signal) -> Signal:
    sos = sps.butter(ORDER, list(BAND), btype="bandpass", output="sos",
                     fs=signal.sampling_hz)
    padlen = min(3 * ORDER, len(signal.samples) - 1)
    filtered = sps.sosfiltfilt(sos, signal.samples, padtype="even", padlen=padlen)
    return Signal(filtered, signal.sampling_hz, signal.start_time_ms, signal.label)


def to_model_rate(signal: Signal) -> Signal:
    if signal.sampling_hz == MODEL_HZ:
        return signal
    n = len(signal.samples)
    target_len = int(round(n * MODEL_HZ / signal.sampling_hz))
    ratio = Fraction(MODEL_HZ / signal.sampling_hz).limit_denominator(10000)
    out = sps.resample_poly(signal.samples, ratio.numerator, ratio.denominator,
                            padtype="line")
    if len(out) > target_len:
        out = out[:target_len]
    elif len(out) < target_len:
        out = np.concatenate([out, np.repeat(out[-1], target_len - len(out))])
    return Signal(out, MODEL_HZ, signal.start_time_ms, signal.label)


def prepare(signal: Signal) -> Signal:
    """Band-pass then resample; z-score so amplitude units drop out."""
    conditioned = to_model_rate(bandpass(signal))
    x = conditioned.samples
    std = float(np.std(x))
    if std > 0:
        x = (x - float(np.mean(x))) / std
    return Signal(x, conditioned.sampling_hz, conditioned.start_time_ms,
                  conditioned.label)
