"""Envelope-threshold beat detector.

A deliberately simple second opinion with a different failure profile than
the template matcher: it squares the band-passed signal, smooths over
150 ms and keeps local maxima above an adaptive threshold derived from the
rolling 10 s envelope median, with the 180 bpm refractory spacing.  The
constants are fixed; this detector is meant to be stable, not tunable.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .core import MIN_BEAT_SPACING_MS, BeatAnnotation, SignalTrace, moving_average

_SMOOTH_MS = 150.0
_MEDIAN_WINDOW_MS = 10000.0
_THRESHOLD_FACTOR = 0.4 * 3.0
_MEDIAN_DECIMATE_MS = 50.0


def _rolling_median(envelope: np.ndarray, fs: float) -> np.ndarray:
    """Rolling 10 s median of the envelope, computed on a 20 Hz decimation."""
    step = max(int(round(_MEDIAN_DECIMATE_MS * fs / 1000.0)), 1)
    coarse = envelope[::step]
    win = max(int(round(_MEDIAN_WINDOW_MS / _MEDIAN_DECIMATE_MS)), 1)
    if len(coarse) <= win:
        return np.full_like(envelope, float(np.median(coarse)))
    pad = win // 2
    padded = np.pad(coarse, pad, mode="edge")
    view = np.lib.stride_tricks.sliding_window_view(padded, win)[:len(coarse)]
    med_coarse = np.median(view, axis=1)
    positions = np.arange(len(envelope), dtype=float) / step
    return np.interp(positions, np.arange(len(coarse), dtype=float), med_coarse)


def envelope_detect(trace: SignalTrace) -> BeatAnnotation:
    """Detect beats as envelope peaks above an adaptive threshold."""
    x = trace.samples
    fs = trace.sampling_hz
    envelope = moving_average(x * x, int(round(_SMOOTH_MS * fs / 1000.0)))
    threshold = _THRESHOLD_FACTOR * _rolling_median(envelope, fs)
    distance = max(int(round(MIN_BEAT_SPACING_MS * fs / 1000.0)) + 1, 1)
    peaks, _ = sps.find_peaks(envelope, height=threshold, distance=distance)
    times = trace.start_time_ms + peaks.astype(float) * 1000.0 / fs
    return BeatAnnotation(times, "alternate", trace.label)
