"""Core signal types, band-pass preprocessing and interval arithmetic.

All beat times are carried in milliseconds as floats; sample indices only
appear at the serialization boundary.  Every operation here is a pure
function on immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .errors import InsufficientBeatsError, InvalidInputError, InvalidParameterError

#: Admissible detector provenance values for annotations.
BEAT_SOURCES = ("ground_truth", "tm", "dl", "alternate", "hybrid")

#: Structural spacing limit implied by the 180 bpm ceiling (ms).
MIN_BEAT_SPACING_MS = 60000.0 / 180.0


@dataclass(frozen=True, eq=False)
class SignalTrace:
    """Uniformly sampled amplitude series.

    Parameters
    ----------
    samples : array
        Amplitude sequence in arbitrary sensor units, length >= 1.
    sampling_hz : float
        Sampling rate in Hz, > 0.
    start_time_ms : float
        Absolute time of the first sample (ms), >= 0.
    label : str
        Free-text subject/recording identifier.
    """

    samples: np.ndarray
    sampling_hz: float
    start_time_ms: float = 0.0
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise InvalidParameterError("samples must be a non-empty 1-D sequence")
        if not self.sampling_hz > 0:
            raise InvalidParameterError(f"sampling_hz must be > 0, got {self.sampling_hz}")
        if self.start_time_ms < 0:
            raise InvalidParameterError(f"start_time_ms must be >= 0, got {self.start_time_ms}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sampling_hz", float(self.sampling_hz))
        object.__setattr__(self, "start_time_ms", float(self.start_time_ms))

    @property
    def duration_ms(self) -> float:
        return len(self.samples) / self.sampling_hz * 1000.0

    @property
    def end_time_ms(self) -> float:
        return self.start_time_ms + self.duration_ms

    def time_to_index(self, t_ms: float) -> int:
        """Nearest sample index for an absolute time in ms (clipped to range)."""
        idx = int(round((t_ms - self.start_time_ms) * self.sampling_hz / 1000.0))
        return min(max(idx, 0), len(self.samples) - 1)

    def index_to_time(self, idx: int) -> float:
        return self.start_time_ms + idx * 1000.0 / self.sampling_hz

    def with_samples(self, samples: np.ndarray) -> "SignalTrace":
        return SignalTrace(samples, self.sampling_hz, self.start_time_ms, self.label)


@dataclass(frozen=True, eq=False)
class BeatAnnotation:
    """Ordered heartbeat peak times (ms) with detector provenance."""

    peak_times_ms: np.ndarray
    source: str
    trace_label: str = ""

    def __post_init__(self):
        times = np.asarray(self.peak_times_ms, dtype=float).reshape(-1)
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise InvalidParameterError("peak times must be strictly increasing")
        if self.source not in BEAT_SOURCES:
            raise InvalidParameterError(
                f"unknown source {self.source!r}, expected one of {BEAT_SOURCES}"
            )
        object.__setattr__(self, "peak_times_ms", times)

    def __len__(self) -> int:
        return len(self.peak_times_ms)

    def within(self, start_ms: float, end_ms: float) -> "BeatAnnotation":
        """Beats falling in the half-open window [start_ms, end_ms)."""
        t = self.peak_times_ms
        kept = t[(t >= start_ms) & (t < end_ms)]
        return BeatAnnotation(kept, self.source, self.trace_label)

    def check_bounds(self, trace: SignalTrace) -> None:
        """Raise unless every peak lies within the trace's time span."""
        t = self.peak_times_ms
        if len(t) and (t[0] < trace.start_time_ms or t[-1] > trace.end_time_ms):
            raise InvalidInputError(
                f"annotation exceeds trace bounds [{trace.start_time_ms}, {trace.end_time_ms}] ms"
            )


@dataclass(frozen=True, eq=False)
class IntervalSeries:
    """Consecutive peak differences in ms together with their mean."""

    intervals_ms: np.ndarray
    mean_ms: float

    def __post_init__(self):
        intervals = np.asarray(self.intervals_ms, dtype=float).reshape(-1)
        if intervals.size < 1 or not np.all(intervals > 0):
            raise InvalidParameterError("intervals must be a non-empty positive sequence")
        if abs(float(np.mean(intervals)) - self.mean_ms) > 1e-9 * max(1.0, abs(self.mean_ms)):
            raise InvalidParameterError("mean_ms inconsistent with intervals")
        object.__setattr__(self, "intervals_ms", intervals)
        object.__setattr__(self, "mean_ms", float(self.mean_ms))

    def __len__(self) -> int:
        return len(self.intervals_ms)


def bandpass_filter(trace: SignalTrace, low_hz: float = 1.0, high_hz: float = 10.0,
                    order: int = 3) -> SignalTrace:
    """Zero-phase Butterworth band-pass.

    The filter is realized as cascaded second-order sections and applied
    forward-backward, so the passband gain is the squared magnitude of the
    one-way response and peak latencies are not shifted.  The input is
    reflect-padded by 3x the filter order before the two passes.

    Parameters
    ----------
    trace : SignalTrace
        Input signal; all samples must be finite.
    low_hz, high_hz : float
        Band edges; 0 < low_hz < high_hz < sampling_hz / 2.
    order : int
        Butterworth order (>= 1) of the one-way filter.
    """
    nyquist = trace.sampling_hz / 2.0
    if not (0 < low_hz < high_hz < nyquist):
        raise InvalidParameterError(
            f"need 0 < low ({low_hz}) < high ({high_hz}) < Nyquist ({nyquist})"
        )
    if order < 1:
        raise InvalidParameterError(f"order must be >= 1, got {order}")
    x = trace.samples
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("trace contains non-finite samples")

    sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", output="sos",
                     fs=trace.sampling_hz)
    padlen = min(3 * order, len(x) - 1)
    filtered = sps.sosfiltfilt(sos, x, padtype="even", padlen=padlen)
    return trace.with_samples(filtered)


def resample(trace: SignalTrace, target_hz: float) -> SignalTrace:
    """Band-limited resampling to a new rate.

    Output length is round(duration_s * target_hz).  Annotations are not
    touched: beat times are stored in ms and stay valid across rates.
    """
    if not target_hz > 0:
        raise InvalidParameterError(f"target_hz must be > 0, got {target_hz}")
    if target_hz == trace.sampling_hz:
        return SignalTrace(trace.samples.copy(), trace.sampling_hz,
                           trace.start_time_ms, trace.label)

    n = len(trace.samples)
    target_len = int(round(n * target_hz / trace.sampling_hz))
    if target_len < 1:
        raise InvalidParameterError("target rate yields an empty trace")
    ratio = Fraction(target_hz / trace.sampling_hz).limit_denominator(10000)
    out = sps.resample_poly(trace.samples, ratio.numerator, ratio.denominator,
                            padtype="line")
    # Polyphase length is ceil(n * up / down); pin it to the rounded target.
    if len(out) > target_len:
        out = out[:target_len]
    elif len(out) < target_len:
        out = np.concatenate([out, np.repeat(out[-1], target_len - len(out))])
    return SignalTrace(out, target_hz, trace.start_time_ms, trace.label)


def intervals_of(annotation: BeatAnnotation) -> IntervalSeries:
    """Consecutive peak differences of an annotation."""
    if len(annotation) < 2:
        raise InsufficientBeatsError("need at least 2 peaks to form intervals")
    intervals = np.diff(annotation.peak_times_ms)
    return IntervalSeries(intervals, float(np.mean(intervals)))


def normalized_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation of two equal-length sequences.

    Returns NaN when either sequence has zero variance; callers decide how
    the degenerate case propagates.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean()
    db = b - b.mean()
    denom = float(np.sqrt(np.dot(da, da) * np.dot(db, db)))
    if denom == 0.0:
        return float("nan")
    return float(np.dot(da, db) / denom)


def moving_average(x: np.ndarray, window_samples: int) -> np.ndarray:
    """Centered moving average with edge shrinkage, same length as input."""
    w = max(int(window_samples), 1)
    if w == 1:
        return np.asarray(x, dtype=float).copy()
    csum = np.cumsum(np.concatenate([[0.0], np.asarray(x, dtype=float)]))
    n = len(x)
    idx = np.arange(n)
    lo = np.maximum(idx - w // 2, 0)
    hi = np.minimum(idx + (w - w // 2), n)
    return (csum[hi] - csum[lo]) / (hi - lo)
