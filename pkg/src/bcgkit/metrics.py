"""Evaluation against ground truth: interval pairing, error metrics, strata.

Detected beats are matched one-to-one to their nearest reference beat
inside half the median reference interval.  Interval pairs (RR, JJ) are
formed only between consecutively matched beats whose reference beats are
adjacent, so missed beats and reporting gaps never produce spliced
intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .confidence import Epoch, beat_segments, default_segment_ms
from .core import BeatAnnotation
from .errors import InvalidInputError, UndefinedMetricError


def pair_intervals(reference: BeatAnnotation, detected: BeatAnnotation,
                   excluded_spans=()) -> list:
    """(rr_ms, jj_ms) tuples for matched consecutive beats.

    Pairs whose reference interval overlaps any excluded span (e.g. a
    discarded epoch) are dropped.
    """
    if len(reference) == 0:
        raise InvalidInputError("reference annotation is empty")
    ref = reference.peak_times_ms
    det = detected.peak_times_ms
    if len(ref) < 2 or len(det) < 2:
        return []

    window = 0.5 * float(np.median(np.diff(ref)))
    claimed = {}
    matches = []  # (det_idx, ref_idx)
    for i, t in enumerate(det):
        j = int(np.searchsorted(ref, t))
        best = None
        for cand in (j - 1, j):
            if 0 <= cand < len(ref) and cand not in claimed:
                dist = abs(ref[cand] - t)
                if dist <= window and (best is None or dist < best[0]):
                    best = (dist, cand)
        if best is not None:
            claimed[best[1]] = i
            matches.append((i, best[1]))

    pairs = []
    for (i0, r0), (i1, r1) in zip(matches, matches[1:]):
        if r1 != r0 + 1:
            continue
        lo, hi = ref[r0], ref[r1]
        if any(lo < e and hi > s for s, e in excluded_spans):
            continue
        pairs.append((float(hi - lo), float(det[i1] - det[i0])))
    return pairs


def e_abs(pairs) -> float:
    """Mean absolute difference between reference and detected intervals (ms)."""
    if len(pairs) == 0:
        raise UndefinedMetricError("no interval pairs")
    arr = np.asarray(pairs, dtype=float)
    return float(np.mean(np.abs(arr[:, 0] - arr[:, 1])))


def precision(pairs, threshold_ms: float = 30.0) -> float:
    """Percentage of interval pairs with absolute error <= threshold (inclusive)."""
    if len(pairs) == 0:
        raise UndefinedMetricError("no interval pairs")
    arr = np.asarray(pairs, dtype=float)
    errors = np.abs(arr[:, 0] - arr[:, 1])
    return 100.0 * float(np.sum(errors <= threshold_ms)) / len(errors)


def coverage(reported_spans, d_total_ms: float) -> float:
    """Percentage of the recording covered by reported spans."""
    if d_total_ms <= 0:
        raise InvalidInputError("d_total_ms must be > 0")
    reported = sum(e - s for s, e in reported_spans)
    return 100.0 * reported / d_total_ms


def rmssd(intervals) -> float:
    """Root mean square of successive interval differences (ms)."""
    values = np.asarray(getattr(intervals, "intervals_ms", intervals), dtype=float)
    if len(values) < 2:
        raise UndefinedMetricError("need >= 2 intervals for RMSSD")
    return float(np.sqrt(np.mean(np.diff(values) ** 2)))


def quality_level(epoch: Epoch, a_threshold: float = 0.85, b_threshold: float = 0.60,
                  window_s: float = 10.0) -> str:
    """Signal-quality level A/B/C of one epoch.

    Each beat segment is correlated against the mean of the segments inside
    a +/- window_s/2 neighbourhood (a moving-average template); the epoch's
    mean correlation is mapped to A (>= a_threshold), B (>= b_threshold)
    or C.  Epochs without usable beats are level C by convention.
    """
    if epoch.M < 2:
        return "C"
    segments, kept = beat_segments(epoch, default_segment_ms(epoch))
    if len(segments) < 2:
        return "C"
    times = epoch.beats.peak_times_ms[kept]
    half_win = window_s * 1000.0 / 2.0
    corrs = []
    for i in range(len(segments)):
        nearby = np.abs(times - times[i]) <= half_win
        template = segments[nearby].mean(axis=0)
        seg = segments[i] - segments[i].mean()
        tpl = template - template.mean()
        denom = math.sqrt(float(np.dot(seg, seg)) * float(np.dot(tpl, tpl)))
        if denom == 0.0:
            continue
        corrs.append(float(np.dot(seg, tpl)) / denom)
    if not corrs:
        return "C"
    mean_corr = float(np.mean(corrs))
    if mean_corr >= a_threshold:
        return "A"
    if mean_corr >= b_threshold:
        return "B"
    return "C"


@dataclass
class EvalReport:
    """E_abs / Pre / Coverage plus the counts they derive from."""

    e_abs_ms: float
    pre_pct: float
    coverage_pct: float
    n_bcg: int
    n_correct: int
    n_incorrect: int
    d_detection_ms: float
    d_total_ms: float
    strata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        def _num(v):
            return float(v) if math.isfinite(v) else None

        rec = {
            "e_abs_ms": _num(self.e_abs_ms),
            "pre_pct": _num(self.pre_pct),
            "coverage_pct": _num(self.coverage_pct),
            "n_bcg": self.n_bcg,
            "n_correct": self.n_correct,
            "n_incorrect": self.n_incorrect,
            "d_detection_ms": float(self.d_detection_ms),
            "d_total_ms": float(self.d_total_ms),
        }
        if self.strata:
            rec["strata"] = {k: v.to_record() for k, v in sorted(self.strata.items())}
        return rec


def evaluate(reference: BeatAnnotation, detected: BeatAnnotation, reported_spans,
             d_total_ms: float, threshold_ms: float = 30.0) -> EvalReport:
    """Build an EvalReport for one detection result.

    ``reported_spans`` are the (start, end) windows the detector reports;
    intervals spanning unreported time are excluded from pairing, and the
    coverage number is the reported fraction of ``d_total_ms``.
    """
    spans = sorted((float(s), float(e)) for s, e in reported_spans)
    gaps = []
    cursor = 0.0
    for s, e in spans:
        if s > cursor:
            gaps.append((cursor, s))
        cursor = max(cursor, e)
    if cursor < d_total_ms:
        gaps.append((cursor, d_total_ms))

    pairs = pair_intervals(reference, detected, excluded_spans=gaps)
    n = len(pairs)
    if n:
        arr = np.asarray(pairs, dtype=float)
        errors = np.abs(arr[:, 0] - arr[:, 1])
        n_correct = int(np.sum(errors <= threshold_ms))
        report_e = float(np.mean(errors))
        report_p = 100.0 * n_correct / n
    else:
        n_correct = 0
        report_e = float("nan")
        report_p = float("nan")
    return EvalReport(
        e_abs_ms=report_e,
        pre_pct=report_p,
        coverage_pct=coverage(spans, d_total_ms),
        n_bcg=n,
        n_correct=n_correct,
        n_incorrect=n - n_correct,
        d_detection_ms=float(sum(e - s for s, e in spans)),
        d_total_ms=float(d_total_ms),
    )


def pooled_report(reports) -> EvalReport:
    """Combine per-recording reports into one corpus-level report.

    Error statistics pool over interval pairs; coverage pools over time.
    """
    reports = list(reports)
    if not reports:
        raise UndefinedMetricError("no reports to pool")
    n = sum(r.n_bcg for r in reports)
    n_correct = sum(r.n_correct for r in reports)
    d_det = sum(r.d_detection_ms for r in reports)
    d_tot = sum(r.d_total_ms for r in reports)
    if n:
        # means of means weighted by pair counts reproduce the pooled mean
        e = sum(r.e_abs_ms * r.n_bcg for r in reports if r.n_bcg) / n
        p = 100.0 * n_correct / n
    else:
        e = float("nan")
        p = float("nan")
    return EvalReport(e, p, 100.0 * d_det / d_tot if d_tot else float("nan"),
                      n, n_correct, n - n_correct, d_det, d_tot)
