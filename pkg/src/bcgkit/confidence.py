"""Epoch segmentation and the two confidence indices used for fusion.

Morphological confidence (c1) is the mean Pearson correlation between each
beat's signal segment and the epoch template (the pointwise mean of those
segments).  Rhythmic confidence (c2) is the normalized standard deviation
of the epoch's beat intervals:

    c2 = (1 / mean(d)) * sqrt( sum_i (d_i - mean(d))^2 / (M - 2) )

with d the M-1 intervals of the epoch's M beats.  An epoch is acceptable
when c1 >= t_mc, c2 <= t_rc and its mean heart rate lies inside the
configured band; the comprehensive index F = w1*c1 - w2*c2 ranks acceptable
candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BeatAnnotation, SignalTrace
from .errors import (
    DegenerateEpochError,
    InsufficientBeatsError,
    InvalidParameterError,
)


@dataclass(frozen=True)
class Thresholds:
    """Acceptability thresholds, index weights and epoch geometry."""

    t_mc: float = 0.75
    t_rc: float = 0.20
    w1: float = 1.0
    w2: float = 3.0
    epoch_ms: float = 12000.0
    hr_min_bpm: float = 30.0
    hr_max_bpm: float = 180.0

    def __post_init__(self):
        if not (0.0 <= self.t_mc <= 1.0):
            raise InvalidParameterError("t_mc must lie in [0, 1]")
        if self.t_rc < 0:
            raise InvalidParameterError("t_rc must be >= 0")
        if self.w1 <= 0 or self.w2 <= 0:
            raise InvalidParameterError("weights must be positive")
        if self.epoch_ms <= 0:
            raise InvalidParameterError("epoch_ms must be > 0")
        if not (0 < self.hr_min_bpm < self.hr_max_bpm):
            raise InvalidParameterError("need 0 < hr_min_bpm < hr_max_bpm")


@dataclass(frozen=True, eq=False)
class Epoch:
    """A fixed-length window of a recording plus the beats inside it.

    ``trace`` is the full recording: beat segments may reach across epoch
    boundaries, so segment extraction needs more than the slice itself.
    """

    trace: SignalTrace
    start_ms: float
    end_ms: float
    beats: BeatAnnotation

    @property
    def M(self) -> int:
        return len(self.beats)

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    @property
    def trace_slice(self) -> SignalTrace:
        i0 = self.trace.time_to_index(self.start_ms)
        i1 = self.trace.time_to_index(self.end_ms - 1e-9) + 1
        return SignalTrace(self.trace.samples[i0:i1], self.trace.sampling_hz,
                           self.trace.index_to_time(i0), self.trace.label)

    def mean_hr_bpm(self) -> float:
        """Mean heart rate over the epoch's intervals; NaN when M < 2."""
        if self.M < 2:
            return float("nan")
        return 60000.0 / float(np.mean(np.diff(self.beats.peak_times_ms)))


@dataclass(frozen=True)
class ConfidenceScore:
    """Confidence of one (epoch, detector) pair; NaN marks undefined values."""

    c1: float
    c2: float
    f: float
    acceptable: bool
    detector: str


def segment_epochs(trace: SignalTrace, beats: BeatAnnotation,
                   epoch_ms: float = 12000.0) -> list:
    """Tile the recording into contiguous epochs and assign beats to them.

    Epochs are half-open [start, end); a beat exactly on a boundary belongs
    to the later epoch.  The final epoch may be shorter than ``epoch_ms``.
    """
    if epoch_ms <= 0:
        raise InvalidParameterError("epoch_ms must be > 0")
    epochs = []
    t0 = trace.start_time_ms
    end = trace.end_time_ms
    n = max(1, int(math.ceil((end - t0) / epoch_ms - 1e-12)))
    for k in range(n):
        s = t0 + k * epoch_ms
        e = min(s + epoch_ms, end)
        inside = beats.within(s, e)
        if k == n - 1:
            # A beat allowed to sit exactly at the recording end joins the
            # final epoch rather than falling off the grid.
            t = beats.peak_times_ms
            at_end = t[t == end]
            if len(at_end):
                inside = BeatAnnotation(
                    np.concatenate([inside.peak_times_ms, at_end]),
                    beats.source, beats.trace_label,
                )
        epochs.append(Epoch(trace, s, e, inside))
    return epochs


def hr_gate(epoch: Epoch, hr_min_bpm: float = 30.0, hr_max_bpm: float = 180.0) -> bool:
    """True iff the epoch has M >= 3 beats and a plausible mean heart rate."""
    if epoch.M < 3:
        return False
    hr = epoch.mean_hr_bpm()
    return hr_min_bpm <= hr <= hr_max_bpm


def default_segment_ms(epoch: Epoch, cap_ms: float = 1000.0) -> float:
    """Per-beat segment window: median epoch interval capped at 1 s."""
    if epoch.M < 2:
        raise InsufficientBeatsError("need >= 2 beats to derive a segment window")
    return float(min(np.median(np.diff(epoch.beats.peak_times_ms)), cap_ms))


def beat_segments(epoch: Epoch, segment_ms: float):
    """Per-beat segments centered on each peak, as a (n, L) matrix.

    Beats whose window would cross the recording edge are excluded; the
    returned index array identifies which beats contributed.
    """
    trace = epoch.trace
    fs = trace.sampling_hz
    length = max(int(round(segment_ms * fs / 1000.0)), 2)
    half = length // 2
    rows, kept = [], []
    for b, t in enumerate(epoch.beats.peak_times_ms):
        center = int(round((t - trace.start_time_ms) * fs / 1000.0))
        lo = center - half
        hi = lo + length
        if lo < 0 or hi > len(trace.samples):
            continue
        rows.append(trace.samples[lo:hi])
        kept.append(b)
    if not rows:
        return np.empty((0, length)), np.asarray(kept, dtype=int)
    return np.vstack(rows), np.asarray(kept, dtype=int)


def morphological_confidence(epoch: Epoch, segment_ms: float | None = None) -> float:
    """Mean normalized correlation of beat segments against their mean.

    Degenerate epochs (no in-bounds beats, or any zero-variance segment)
    raise; a zero-variance *template* with valid segments returns 0, the
    limit of the antisymmetric case.
    """
    if segment_ms is None:
        segment_ms = default_segment_ms(epoch)
    segments, _ = beat_segments(epoch, segment_ms)
    if len(segments) == 0:
        raise DegenerateEpochError("no beat segment lies fully inside the recording")
    centered = segments - segments.mean(axis=1, keepdims=True)
    seg_var = np.einsum("ij,ij->i", centered, centered)
    if np.any(seg_var == 0.0):
        raise DegenerateEpochError("zero-variance beat segment")
    template = segments.mean(axis=0)
    dt = template - template.mean()
    t_var = float(np.dot(dt, dt))
    if t_var <= 1e-15 * float(np.mean(seg_var)):
        return 0.0
    corr = (centered @ dt) / np.sqrt(seg_var * t_var)
    return float(np.mean(corr))


def rhythmic_confidence(epoch: Epoch) -> float:
    """Normalized SDNN of the epoch's intervals (divisor M - 2)."""
    m = epoch.M
    if m < 3:
        raise InsufficientBeatsError(f"need >= 3 beats, epoch has {m}")
    d = np.diff(epoch.beats.peak_times_ms)
    d_bar = float(np.mean(d))
    sdnn = math.sqrt(float(np.sum((d - d_bar) ** 2)) / (m - 2))
    return sdnn / d_bar


def comprehensive_index(c1: float, c2: float, w1: float = 1.0, w2: float = 3.0) -> float:
    """Weighted confidence combination w1*c1 - w2*c2."""
    if w1 <= 0 or w2 <= 0:
        raise InvalidParameterError("weights must be positive")
    return w1 * c1 - w2 * c2


@dataclass(frozen=True)
class EpochMetrics:
    """Threshold-free per-epoch quantities, reusable across threshold sweeps."""

    start_ms: float
    end_ms: float
    m: int
    mean_hr_bpm: float
    c1: float
    c2: float


def epoch_metrics(epoch: Epoch, hr_min_bpm: float = 30.0, hr_max_bpm: float = 180.0,
                  segment_ms: float | None = None) -> EpochMetrics:
    """Raw c1/c2 for one epoch; NaN where gates or degeneracy apply."""
    c1 = c2 = float("nan")
    if hr_gate(epoch, hr_min_bpm, hr_max_bpm):
        try:
            c1 = morphological_confidence(epoch, segment_ms)
            c2 = rhythmic_confidence(epoch)
        except (DegenerateEpochError, InsufficientBeatsError):
            c1 = c2 = float("nan")
    return EpochMetrics(epoch.start_ms, epoch.end_ms, epoch.M,
                        epoch.mean_hr_bpm(), c1, c2)


def score_from_metrics(metrics: EpochMetrics, thresholds: Thresholds,
                       detector: str) -> ConfidenceScore:
    defined = math.isfinite(metrics.c1) and math.isfinite(metrics.c2)
    if not defined:
        return ConfidenceScore(metrics.c1, metrics.c2, float("nan"), False, detector)
    f = comprehensive_index(metrics.c1, metrics.c2, thresholds.w1, thresholds.w2)
    acceptable = metrics.c1 >= thresholds.t_mc and metrics.c2 <= thresholds.t_rc
    return ConfidenceScore(metrics.c1, metrics.c2, f, acceptable, detector)


def score_epoch(epoch: Epoch, thresholds: Thresholds) -> ConfidenceScore:
    """Full confidence score for one epoch (gate, c1, c2, F, acceptability)."""
    metrics = epoch_metrics(epoch, thresholds.hr_min_bpm, thresholds.hr_max_bpm)
    return score_from_metrics(metrics, thresholds, epoch.beats.source)


def score_to_record(score: ConfidenceScore, start_ms: float, end_ms: float) -> dict:
    """JSON-safe record for the score serialization format (NaN -> null)."""
    def _num(v):
        return float(v) if math.isfinite(v) else None

    return {
        "epoch_start_ms": start_ms,
        "epoch_end_ms": end_ms,
        "detector": score.detector,
        "c1": _num(score.c1),
        "c2": _num(score.c2),
        "F": _num(score.f),
        "acceptable": bool(score.acceptable),
    }
