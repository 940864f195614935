"""Epoch-level hybrid detection: keep the most confident acceptable candidate.

Per epoch, every detector's result is scored; among acceptable candidates
the one with the largest comprehensive index F wins, ties falling to the
lower rhythmic-variability candidate and then to a fixed priority order.
Epochs with no acceptable candidate are discarded, lowering coverage but
removing unreliable beats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .confidence import (
    Thresholds,
    epoch_metrics,
    score_from_metrics,
    segment_epochs,
)
from .core import MIN_BEAT_SPACING_MS, BeatAnnotation, SignalTrace
from .errors import InvalidInputError

DEFAULT_PRIORITY = ("tm", "dl", "alternate", "hybrid", "ground_truth")


@dataclass(frozen=True)
class FusionOutcome:
    """Decision record for one epoch."""

    start_ms: float
    end_ms: float
    chosen: str | None
    candidates: tuple
    chosen_beats: BeatAnnotation

    def to_record(self) -> dict:
        def _num(v):
            return float(v) if math.isfinite(v) else None

        return {
            "epoch_start_ms": self.start_ms,
            "epoch_end_ms": self.end_ms,
            "chosen": self.chosen,
            "n_beats": len(self.chosen_beats),
            "candidates": [
                {"detector": c.detector, "c1": _num(c.c1), "c2": _num(c.c2),
                 "F": _num(c.f), "acceptable": bool(c.acceptable)}
                for c in self.candidates
            ],
        }


def fuse_epoch(scores, priority=DEFAULT_PRIORITY, start_ms: float = float("nan"),
               end_ms: float = float("nan")) -> FusionOutcome:
    """Pick the acceptable candidate with maximal F for one epoch.

    ``scores`` is a list of (ConfidenceScore, BeatAnnotation) pairs, one per
    detector, acceptable or not.  An empty list is a caller error.
    """
    scores = list(scores)
    if not scores:
        raise InvalidInputError("fuse_epoch needs every detector's score, got none")

    def rank(item):
        score, _ = item
        try:
            prio = priority.index(score.detector)
        except ValueError:
            prio = len(priority)
        return (-score.f, score.c2, prio, score.detector)

    acceptable = [item for item in scores if item[0].acceptable]
    candidates = tuple(score for score, _ in scores)
    if not acceptable:
        empty = BeatAnnotation(np.empty(0), "hybrid",
                               scores[0][1].trace_label)
        return FusionOutcome(start_ms, end_ms, None, candidates, empty)
    best_score, best_beats = min(acceptable, key=rank)
    return FusionOutcome(start_ms, end_ms, best_score.detector, candidates, best_beats)


def fuse_scored(trace: SignalTrace, metrics_by_detector: dict,
                annotations: dict, thresholds: Thresholds,
                priority=DEFAULT_PRIORITY):
    """Fusion from precomputed per-epoch metrics (shared by sweeps).

    ``metrics_by_detector`` maps detector name to the EpochMetrics list of
    its annotation over a common epoch grid.
    """
    if len(annotations) < 2:
        raise InvalidInputError("hybrid fusion needs at least 2 detectors")
    names = sorted(annotations)
    grids = {name: metrics_by_detector[name] for name in names}
    n_epochs = len(grids[names[0]])

    outcomes = []
    hybrid_times = []
    for k in range(n_epochs):
        scored = []
        for name in names:
            m = grids[name][k]
            beats = annotations[name].within(m.start_ms, m.end_ms)
            if m.end_ms >= trace.end_time_ms:
                beats = annotations[name].within(m.start_ms, m.end_ms + 1e-9)
            scored.append((score_from_metrics(m, thresholds, name), beats))
        outcome = fuse_epoch(scored, priority,
                             grids[names[0]][k].start_ms, grids[names[0]][k].end_ms)
        outcomes.append(outcome)
        if outcome.chosen is not None:
            for t in outcome.chosen_beats.peak_times_ms:
                if not hybrid_times or t - hybrid_times[-1] >= MIN_BEAT_SPACING_MS:
                    hybrid_times.append(float(t))
    hybrid = BeatAnnotation(np.asarray(hybrid_times), "hybrid", trace.label)
    return hybrid, outcomes


def fuse_recording(trace: SignalTrace, detector_annotations: dict,
                   thresholds: Thresholds = Thresholds(),
                   priority=DEFAULT_PRIORITY):
    """Score every detector per epoch and fuse the whole recording.

    Returns the hybrid annotation (strictly increasing, seam duplicates
    removed toward the earlier beat) and the per-epoch decision log.
    """
    if len(detector_annotations) < 2:
        raise InvalidInputError("hybrid fusion needs at least 2 detectors")
    metrics_by_detector = {}
    for name in sorted(detector_annotations):
        epochs = segment_epochs(trace, detector_annotations[name], thresholds.epoch_ms)
        metrics_by_detector[name] = [
            epoch_metrics(ep, thresholds.hr_min_bpm, thresholds.hr_max_bpm)
            for ep in epochs
        ]
    return fuse_scored(trace, metrics_by_detector, detector_annotations,
                       thresholds, priority)
