"""Confidence indices: epoch segmentation, gates, c1, c2, F, acceptability."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcgkit import (
    BeatAnnotation,
    SignalTrace,
    Thresholds,
    bandpass_filter,
    comprehensive_index,
    hr_gate,
    morphological_confidence,
    rhythmic_confidence,
    score_epoch,
    segment_epochs,
)
from bcgkit.confidence import Epoch, EpochMetrics, score_from_metrics
from bcgkit.errors import (
    DegenerateEpochError,
    InsufficientBeatsError,
    InvalidParameterError,
)
from bcgkit.synth import CorruptionSpec, SubjectProfile, simulate

FS = 1000.0


def epoch_with_beats(times_ms, trace=None, duration_ms=None):
    if trace is None:
        duration_ms = duration_ms or (max(times_ms) + 2000.0)
        trace = SignalTrace(np.zeros(int(duration_ms)), FS)
    beats = BeatAnnotation(np.asarray(times_ms, dtype=float), "tm", trace.label)
    return Epoch(trace, trace.start_time_ms, trace.end_time_ms, beats)


def epoch_with_segments(segments, spacing_ms=1000.0):
    """Build an epoch whose per-beat windows slice out exactly `segments`."""
    segments = [np.asarray(s, dtype=float) for s in segments]
    length = len(segments[0])
    n = len(segments)
    total = int((n + 1) * spacing_ms + length)
    x = np.zeros(total)
    times = []
    for i, seg in enumerate(segments):
        center = int((i + 1) * spacing_ms)
        lo = center - length // 2
        x[lo:lo + length] = seg
        times.append(float(center))
    trace = SignalTrace(x, FS)
    beats = BeatAnnotation(np.asarray(times), "tm", "")
    return Epoch(trace, 0.0, trace.duration_ms, beats), float(length)


class TestSegmentEpochs:
    def test_60s_into_five(self):
        trace = SignalTrace(np.zeros(60000), FS)
        epochs = segment_epochs(trace, BeatAnnotation(np.empty(0), "tm"), 12000.0)
        assert len(epochs) == 5
        assert all(ep.duration_ms == 12000.0 for ep in epochs)

    def test_61s_has_short_tail(self):
        trace = SignalTrace(np.zeros(61000), FS)
        epochs = segment_epochs(trace, BeatAnnotation(np.empty(0), "tm"), 12000.0)
        assert len(epochs) == 6
        assert epochs[-1].duration_ms == pytest.approx(1000.0)

    def test_boundary_beat_goes_to_later_epoch(self):
        trace = SignalTrace(np.zeros(24000), FS)
        beats = BeatAnnotation([11999.0, 12000.0, 12001.0], "tm")
        epochs = segment_epochs(trace, beats, 12000.0)
        assert list(epochs[0].beats.peak_times_ms) == [11999.0]
        assert list(epochs[1].beats.peak_times_ms) == [12000.0, 12001.0]

    def test_every_beat_assigned_once(self):
        trace = SignalTrace(np.zeros(60000), FS)
        beats = BeatAnnotation(np.arange(500.0, 60000.0, 900.0), "tm")
        epochs = segment_epochs(trace, beats, 12000.0)
        total = sum(ep.M for ep in epochs)
        assert total == len(beats)


class TestHrGate:
    def test_plain_60_bpm(self):
        assert hr_gate(epoch_with_beats([0.0, 1000.0, 2000.0, 3000.0]))

    def test_below_band(self):
        assert not hr_gate(epoch_with_beats([0.0, 2500.0, 5000.0, 7500.0]))

    def test_above_band(self):
        epoch = epoch_with_beats([0.0, 300.0, 600.0, 900.0])
        assert not hr_gate(epoch, 30.0, 180.0)

    def test_two_beats_insufficient(self):
        assert not hr_gate(epoch_with_beats([0.0, 1000.0]))

    def test_bounds_inclusive(self):
        assert hr_gate(epoch_with_beats([0.0, 2000.0, 4000.0]))  # exactly 30 bpm
        times = np.arange(0.0, 2000.0, 60000.0 / 180.0)
        assert hr_gate(epoch_with_beats(list(times)))  # exactly 180 bpm


class TestMorphologicalConfidence:
    def test_identical_segments_give_one(self, rng):
        seg = rng.standard_normal(400)
        epoch, length = epoch_with_segments([seg] * 5)
        assert morphological_confidence(epoch, length) == pytest.approx(1.0, abs=1e-9)

    def test_antisymmetric_pair_gives_zero(self, rng):
        seg = rng.standard_normal(400)
        epoch, length = epoch_with_segments([seg, -seg])
        assert morphological_confidence(epoch, length) == pytest.approx(0.0, abs=1e-9)

    def test_positive_scaling_of_one_segment(self, rng):
        seg = rng.standard_normal(400)
        epoch, length = epoch_with_segments([seg, 2.0 * seg])
        assert morphological_confidence(epoch, length) == pytest.approx(1.0, abs=1e-9)

    def test_affine_invariance(self, rng):
        segs = [rng.standard_normal(300) for _ in range(4)]
        epoch, length = epoch_with_segments(segs)
        base = morphological_confidence(epoch, length)
        shifted = SignalTrace(3.5 * epoch.trace.samples + 11.0, FS)
        epoch2 = Epoch(shifted, epoch.start_ms, epoch.end_ms, epoch.beats)
        assert morphological_confidence(epoch2, length) == pytest.approx(base, abs=1e-9)

    def test_zero_variance_segment_degenerate(self):
        epoch, length = epoch_with_segments([np.zeros(300), np.ones(300)])
        with pytest.raises(DegenerateEpochError):
            morphological_confidence(epoch, length)

    def test_edge_beats_excluded_from_mean_but_kept_in_m(self, rng):
        seg = rng.standard_normal(400)
        epoch, length = epoch_with_segments([seg] * 4)
        # append a beat so close to the recording end its window must clip
        times = np.append(epoch.beats.peak_times_ms,
                          epoch.trace.end_time_ms - 50.0)
        epoch2 = Epoch(epoch.trace, epoch.start_ms, epoch.end_ms,
                       BeatAnnotation(times, "tm", ""))
        assert epoch2.M == 5
        assert morphological_confidence(epoch2, length) == pytest.approx(1.0, abs=1e-9)


class TestRhythmicConfidence:
    def test_hand_arithmetic_case(self):
        # intervals 800 and 1000: mean 900, sum of squares 2*100^2,
        # divisor M-2 = 1 -> sqrt(20000)/900
        epoch = epoch_with_beats([0.0, 800.0, 1800.0])
        expected = math.sqrt((100.0 ** 2 + 100.0 ** 2) / 1.0) / 900.0
        value = rhythmic_confidence(epoch)
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(0.157135, abs=1e-6)

    def test_constant_intervals_zero(self):
        assert rhythmic_confidence(epoch_with_beats([0.0, 900.0, 1800.0, 2700.0])) == 0.0

    def test_scale_invariance(self):
        a = rhythmic_confidence(epoch_with_beats([0.0, 800.0, 1800.0, 2500.0]))
        b = rhythmic_confidence(epoch_with_beats([0.0, 80.0, 180.0, 250.0]))
        assert a == pytest.approx(b, rel=1e-12)

    def test_needs_three_beats(self):
        with pytest.raises(InsufficientBeatsError):
            rhythmic_confidence(epoch_with_beats([0.0, 1000.0]))


class TestComprehensiveIndex:
    def test_extremes(self):
        assert comprehensive_index(1.0, 0.0, 2.5, 7.0) == 2.5

    def test_default_weights_case(self):
        assert comprehensive_index(0.75, 0.20, 1.0, 3.0) == pytest.approx(0.15, abs=1e-12)

    def test_zero_case(self):
        assert comprehensive_index(0.0, 0.0, 1.0, 3.0) == 0.0

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(InvalidParameterError):
            comprehensive_index(0.5, 0.1, 0.0, 3.0)
        with pytest.raises(InvalidParameterError):
            comprehensive_index(0.5, 0.1, 1.0, -1.0)

    @settings(max_examples=100, deadline=None)
    @given(c1=st.floats(-1, 1), c2=st.floats(0, 1),
           delta=st.floats(1e-6, 1.0), w1=st.floats(0.1, 10), w2=st.floats(0.1, 10))
    def test_monotone_in_c1_and_c2(self, c1, c2, delta, w1, w2):
        f = comprehensive_index(c1, c2, w1, w2)
        if c1 + delta <= 1:
            assert comprehensive_index(c1 + delta, c2, w1, w2) > f
        assert comprehensive_index(c1, c2 + delta, w1, w2) < f


class TestScoreEpoch:
    def _clean_epoch(self):
        profile = SubjectProfile(base_hr_bpm=62.0, hrv_rmssd_target_ms=15.0,
                                 morphology_seed=5)
        rec = simulate(profile, CorruptionSpec(snr_db=22.0), 36.0, 1000.0, seed=6,
                       label="c")
        filtered = bandpass_filter(rec.trace)
        return segment_epochs(filtered, rec.beats, 12000.0)[1]

    def test_clean_epoch_accepted_at_defaults(self):
        score = score_epoch(self._clean_epoch(), Thresholds())
        assert score.acceptable
        assert score.c1 >= 0.9
        assert score.c2 <= 0.1
        assert score.f == pytest.approx(score.c1 - 3.0 * score.c2)

    def test_burst_epoch_rejected(self):
        profile = SubjectProfile(base_hr_bpm=62.0, hrv_rmssd_target_ms=15.0,
                                 morphology_seed=5)
        rec = simulate(profile, CorruptionSpec(snr_db=20.0, artifact_burst_rate=1.2,
                                               artifact_gain=5.0),
                       60.0, 1000.0, seed=31, label="b")
        filtered = bandpass_filter(rec.trace)
        from bcgkit import envelope_detect
        detected = envelope_detect(filtered)
        b0, b1 = rec.burst_spans_ms[0]
        epochs = segment_epochs(filtered, detected, 12000.0)
        inside = [ep for ep in epochs if ep.start_ms >= b0 - 1000 and ep.end_ms <= b1 + 1000]
        target = inside[0] if inside else min(
            epochs, key=lambda ep: abs((ep.start_ms + ep.end_ms) / 2 - (b0 + b1) / 2))
        assert not score_epoch(target, Thresholds()).acceptable

    def test_two_beats_unacceptable(self):
        epoch = epoch_with_beats([1000.0, 2000.0])
        score = score_epoch(epoch, Thresholds())
        assert not score.acceptable
        assert math.isnan(score.c1) and math.isnan(score.c2)

    def test_acceptance_matches_invariant(self):
        epoch = self._clean_epoch()
        thr = Thresholds()
        score = score_epoch(epoch, thr)
        expected = (score.c1 >= thr.t_mc and score.c2 <= thr.t_rc
                    and hr_gate(epoch, thr.hr_min_bpm, thr.hr_max_bpm))
        assert score.acceptable == expected


class TestThresholdMonotonicity:
    @settings(max_examples=200, deadline=None)
    @given(c1=st.floats(-1, 1), c2=st.floats(0, 1),
           t_mc=st.floats(0, 0.95), t_rc=st.floats(0.01, 1),
           up=st.floats(0, 0.05), down=st.floats(0, 0.009))
    def test_tightening_never_admits(self, c1, c2, t_mc, t_rc, up, down):
        metrics = EpochMetrics(0.0, 12000.0, 10, 60.0, c1, c2)
        loose = Thresholds(t_mc=t_mc, t_rc=t_rc)
        tight = Thresholds(t_mc=min(t_mc + up, 1.0), t_rc=max(t_rc - down, 0.0))
        loose_ok = score_from_metrics(metrics, loose, "tm").acceptable
        tight_ok = score_from_metrics(metrics, tight, "tm").acceptable
        assert not (tight_ok and not loose_ok)

    def test_thresholds_validation(self):
        with pytest.raises(InvalidParameterError):
            Thresholds(t_mc=1.5)
        with pytest.raises(InvalidParameterError):
            Thresholds(w1=0.0)
        with pytest.raises(InvalidParameterError):
            Thresholds(epoch_ms=-1.0)
        with pytest.raises(InvalidParameterError):
            Thresholds(hr_min_bpm=200.0, hr_max_bpm=100.0)

    def test_accepted_epoch_hr_always_in_band(self):
        # acceptance implies the mean-HR gate held
        rng = np.random.default_rng(3)
        for _ in range(200):
            m = int(rng.integers(0, 12))
            times = np.cumsum(rng.uniform(250, 2600, size=max(m, 1)))
            epoch = epoch_with_beats(list(times), duration_ms=float(times[-1] + 3000))
            score = score_epoch(epoch, Thresholds(t_mc=0.0, t_rc=10.0))
            if score.acceptable:
                assert 30.0 <= epoch.mean_hr_bpm() <= 180.0
