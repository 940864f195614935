"""Per-sample training targets: 1 inside the IJK complex window of a beat."""

from __future__ import annotations

import numpy as np

from .io import Signal

DEFAULT_HALFWIDTH_MS = 150.0


def make_labels(signal: Signal, peak_times_ms, halfwidth_ms: float = DEFAULT_HALFWIDTH_MS):
    """Binary mask over the signal's samples.

    A sample is 1 when it lies within +-halfwidth_ms of any beat time;
    overlapping beat windows simply merge.
    """
    n = len(signal.samples)
    mask = np.zeros(n, dtype=np.float32)
    fs = signal.sampling_hz
    t0 = signal.start_time_ms
    for t in np.asarray(peak_times_ms, dtype=float):
        lo = int(np.ceil((t - halfwidth_ms - t0) * fs / 1000.0))
        hi = int(np.floor((t + halfwidth_ms - t0) * fs / 1000.0))
        if hi < 0 or lo >= n:
            continue
        mask[max(lo, 0):min(hi, n - 1) + 1] = 1.0
    return mask
