"""Inference: windowed per-sample probabilities to J-peak times.

The signal is conditioned to 100 Hz, scanned with 1200-sample windows at
50% overlap (probabilities averaged where windows overlap), thresholded,
and each surviving run emits the time of its local signal maximum.  Runs
closer than the 180 bpm refractory spacing merge first, and a final sweep
guarantees the spacing on the emitted peaks.
"""

from __future__ import annotations

import numpy as np
import torch

from .io import Signal
from .model import BeatLabeller
from .preprocess import prepare

REFRACTORY_MS = 60000.0 / 180.0
MIN_RUN_MS = 80.0
DEFAULT_THRESHOLD = 0.5


def window_probabilities(model: BeatLabeller, samples: np.ndarray,
                         batch_size: int = 32) -> np.ndarray:
    """Per-sample probability with 50% window overlap averaging."""
    n = len(samples)
    length = model.spec.input_len
    hop = length // 2
    if n < length:
        padded = np.concatenate([samples, np.zeros(length - n)])
        starts = [0]
        samples = padded
    else:
        starts = list(range(0, n - length + 1, hop))
        if starts[-1] + length < n:
            starts.append(n - length)

    prob_sum = np.zeros(len(samples))
    counts = np.zeros(len(samples))
    model.eval()
    with torch.no_grad():
        for chunk_start in range(0, len(starts), batch_size):
            chunk = starts[chunk_start:chunk_start + batch_size]
            x = torch.tensor(np.stack([samples[s:s + length] for s in chunk]),
                             dtype=torch.float32)
            probs = torch.sigmoid(model(x)).numpy()
            for s, p in zip(chunk, probs):
                prob_sum[s:s + length] += p
                counts[s:s + length] += 1.0
    counts[counts == 0] = 1.0
    return (prob_sum / counts)[:n]


def probabilities_to_peaks(probabilities: np.ndarray, samples: np.ndarray,
                           sampling_hz: float, start_time_ms: float,
                           threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Run extraction: threshold, length gate, merge, per-run signal maximum."""
    above = probabilities >= threshold
    if not above.any():
        return np.empty(0)
    idx = np.flatnonzero(above)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = []
    start = idx[0]
    for b in breaks:
        runs.append((int(start), int(idx[b])))
        start = idx[b + 1]
    runs.append((int(start), int(idx[-1])))

    ms_per_sample = 1000.0 / sampling_hz
    min_run = MIN_RUN_MS / ms_per_sample
    refractory = REFRACTORY_MS / ms_per_sample

    merged = []
    for lo, hi in runs:
        if merged and lo - merged[-1][1] < refractory:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))

    peaks = []
    for lo, hi in merged:
        if hi - lo + 1 < min_run:
            continue
        peak_idx = lo + int(np.argmax(samples[lo:hi + 1]))
        peaks.append((peak_idx, float(samples[peak_idx])))

    kept = []
    for peak_idx, amp in peaks:
        if kept and peak_idx - kept[-1][0] < refractory:
            if amp > kept[-1][1]:
                kept[-1] = (peak_idx, amp)
        else:
            kept.append((peak_idx, amp))
    return start_time_ms + np.asarray([p for p, _ in kept], dtype=float) * ms_per_sample


def infer(model: BeatLabeller, signal: Signal,
          threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """J-peak times (ms) for a raw protocol signal."""
    conditioned = prepare(signal)
    probabilities = window_probabilities(model, conditioned.samples)
    return probabilities_to_peaks(probabilities, conditioned.samples,
                                  conditioned.sampling_hz,
                                  conditioned.start_time_ms, threshold)
