"""Template-matching detector: masking, rhythm search, template, sweep, fusion."""

import numpy as np
import pytest

from bcgkit import (
    BeatAnnotation,
    SignalTrace,
    bandpass_filter,
    build_template,
    dtw_distance,
    fuse_passes,
    initial_detect,
    match_detect,
    tm_detect,
)
from bcgkit.core import MIN_BEAT_SPACING_MS
from bcgkit.errors import (
    InsufficientBeatsError,
    InvalidInputError,
    NoRhythmError,
    TemplateFailureError,
)
from bcgkit.synth import (
    CorruptionSpec,
    SubjectProfile,
    complex_kernel,
    render_trace,
    simulate,
)
from bcgkit.tm import ArtifactMask, detect_artifacts, estimate_period_ms


def make_recording(hr=60.0, rmssd=0.0, snr=np.inf, duration=60.0, seed=7, morph=3,
                   burst_rate=0.0, gain=1.0):
    profile = SubjectProfile(base_hr_bpm=hr, hrv_rmssd_target_ms=rmssd,
                             morphology_seed=morph)
    corruption = CorruptionSpec(snr_db=snr, artifact_burst_rate=burst_rate,
                                artifact_gain=gain)
    return simulate(profile, corruption, duration, 1000.0, seed=seed, label="t")


class TestArtifactMask:
    def test_intervals_must_be_disjoint(self):
        with pytest.raises(InvalidInputError):
            ArtifactMask(((0.0, 100.0), (50.0, 200.0)))
        with pytest.raises(InvalidInputError):
            ArtifactMask(((10.0, 10.0),))

    def test_clean_recording_mostly_unmasked(self):
        rec = make_recording(snr=20.0, rmssd=15.0, duration=300.0, seed=8)
        mask = detect_artifacts(bandpass_filter(rec.trace))
        assert mask.total_ms <= 0.02 * rec.trace.duration_ms

    def test_burst_is_localized(self):
        rec = make_recording(snr=20.0, rmssd=15.0, duration=300.0, seed=9,
                             burst_rate=0.2, gain=5.0)
        assert len(rec.burst_spans_ms) == 1
        b0, b1 = rec.burst_spans_ms[0]
        mask = detect_artifacts(bandpass_filter(rec.trace))
        assert len(mask.intervals) == 1
        m0, m1 = mask.intervals[0]
        # the mask covers the burst; edges within the 1 s dilation plus the
        # energy envelope's half-window of slack
        assert m0 <= b0 and m1 >= b1
        assert b0 - m0 <= 1500.0
        assert m1 - b1 <= 1500.0

    def test_all_zero_trace_empty_mask(self):
        mask = detect_artifacts(SignalTrace(np.zeros(40000), 1000.0))
        assert mask.intervals == ()


class TestInitialDetect:
    def test_period_at_60_bpm(self):
        rec = make_recording(hr=60.0, duration=90.0, seed=3, morph=2)
        period = estimate_period_ms(bandpass_filter(rec.trace), ArtifactMask())
        assert abs(period - 1000.0) <= 20.0

    def test_period_at_lower_hr_bound(self):
        rec = make_recording(hr=36.52, duration=120.0, seed=3, morph=2)
        period = estimate_period_ms(bandpass_filter(rec.trace), ArtifactMask())
        assert abs(period - 60000.0 / 36.52) <= 40.0

    def test_white_noise_has_no_rhythm(self, rng):
        noise = bandpass_filter(SignalTrace(rng.standard_normal(60000), 1000.0))
        with pytest.raises(NoRhythmError):
            initial_detect(noise, ArtifactMask())

    def test_requires_30s_unmasked(self):
        rec = make_recording(duration=40.0)
        filtered = bandpass_filter(rec.trace)
        mask = ArtifactMask(((0.0, 15000.0),))
        with pytest.raises(InvalidInputError):
            initial_detect(filtered, mask)

    def test_coarse_beats_near_truth(self):
        rec = make_recording(hr=60.0, duration=60.0)
        coarse = initial_detect(bandpass_filter(rec.trace), ArtifactMask())
        errs = [np.min(np.abs(coarse.peak_times_ms - t)) for t in rec.beats.peak_times_ms]
        assert np.median(errs) <= 5.0


class TestBuildTemplate:
    def test_recovers_generating_complex(self):
        rec = make_recording(hr=60.0, duration=60.0)
        filtered = bandpass_filter(rec.trace)
        coarse = initial_detect(filtered, ArtifactMask())
        template = build_template(filtered, coarse)
        # oracle: the known generating kernel rendered as a periodic train
        # and band-passed the same way, sliced around a mid-train beat
        times = np.arange(500.0, 59500.0 + 1.0, 1000.0)
        train, snapped = render_trace(times, rec.kernel, rec.kernel_peak_idx,
                                      60000.0, 1000.0)
        ref_filtered = bandpass_filter(train)
        mid = ref_filtered.time_to_index(snapped[30])
        half = len(template.waveform) // 2
        # shape comparison tolerant to the +-1 sample zero-phase timing slack
        corr = max(
            np.corrcoef(
                template.waveform,
                ref_filtered.samples[mid - half + d:mid - half + d + len(template.waveform)],
            )[0, 1]
            for d in range(-2, 3)
        )
        assert corr >= 0.999
        assert 300.0 <= template.length_ms <= 1200.0
        assert template.member_count >= 3

    def test_sign_flipped_segments_fail(self):
        profile = SubjectProfile(base_hr_bpm=65.0, morphology_seed=6)
        kernel, pk = complex_kernel(profile, 1000.0)
        times = np.arange(500.0, 20500.0, 1000.0)  # even count
        x = np.zeros(21000)
        for i, t in enumerate(times):
            idx = int(t)
            sign = 1.0 if i % 2 == 0 else -1.0
            x[idx - pk:idx - pk + len(kernel)] += sign * kernel
        trace = SignalTrace(x, 1000.0, 0.0, "flip")
        with pytest.raises(TemplateFailureError):
            build_template(trace, BeatAnnotation(times, "tm", "flip"))

    def test_noisy_membership_stays_high(self):
        rec = make_recording(snr=20.0, rmssd=15.0, duration=120.0, seed=21)
        filtered = bandpass_filter(rec.trace)
        coarse = initial_detect(filtered, ArtifactMask())
        template = build_template(filtered, coarse)
        assert template.member_count >= 0.8 * len(coarse)

    def test_too_few_coarse_beats(self):
        rec = make_recording(duration=60.0)
        filtered = bandpass_filter(rec.trace)
        coarse = BeatAnnotation(np.array([5000.0, 6000.0, 7000.0]), "tm", "t")
        with pytest.raises(InsufficientBeatsError):
            build_template(filtered, coarse)


class TestMatchDetect:
    def test_noiseless_exact(self):
        rec = make_recording(hr=60.0, duration=60.0)
        filtered = bandpass_filter(rec.trace)
        detected = tm_detect(filtered)
        errs = np.array([np.min(np.abs(detected.peak_times_ms - t))
                         for t in rec.beats.peak_times_ms])
        assert np.all(errs <= 5.0)
        assert np.mean(errs <= 2.0) >= 0.99

    def test_fully_masked_trace_empty(self):
        rec = make_recording(snr=20.0, rmssd=15.0, duration=60.0, seed=4, morph=7)
        filtered = bandpass_filter(rec.trace)
        coarse = initial_detect(filtered, ArtifactMask())
        template = build_template(filtered, coarse)
        full = ArtifactMask(((0.0, filtered.duration_ms),))
        assert len(match_detect(filtered, template, full)) == 0

    def test_hr_ramp_tracked(self):
        profile = SubjectProfile(base_hr_bpm=65.0, morphology_seed=6)
        kernel, pk = complex_kernel(profile, 1000.0)
        times = [800.0]
        while True:
            hr = 55.0 + 20.0 * times[-1] / 120000.0
            nxt = times[-1] + 60000.0 / hr
            if nxt > 119200.0:
                break
            times.append(nxt)
        trace, snapped = render_trace(np.asarray(times), kernel, pk, 120000.0, 1000.0)
        detected = tm_detect(bandpass_filter(trace))
        errs = np.array([np.min(np.abs(detected.peak_times_ms - t)) for t in snapped])
        assert np.mean(errs <= 20.0) >= 0.95

    def test_refractory_and_monotonic(self):
        rec = make_recording(snr=3.0, rmssd=25.0, duration=120.0, seed=17)
        detected = tm_detect(bandpass_filter(rec.trace))
        diffs = np.diff(detected.peak_times_ms)
        assert np.all(diffs > 0)
        assert np.all(diffs >= MIN_BEAT_SPACING_MS - 1e-9)

    def test_deterministic(self):
        rec = make_recording(snr=8.0, rmssd=20.0, duration=90.0, seed=19)
        filtered = bandpass_filter(rec.trace)
        a = tm_detect(filtered)
        b = tm_detect(filtered)
        assert np.array_equal(a.peak_times_ms, b.peak_times_ms)


class TestDtw:
    def test_zero_iff_identical(self, rng):
        x = rng.standard_normal(200)
        assert dtw_distance(x, x) == 0.0
        y = rng.standard_normal(200)
        assert dtw_distance(x, y) > 0.0

    def test_symmetry(self, rng):
        x, y = rng.standard_normal(150), rng.standard_normal(150)
        assert dtw_distance(x, y) == pytest.approx(dtw_distance(y, x), rel=1e-12)

    def test_small_shift_cheaper_than_shuffle(self, rng):
        x = np.sin(np.linspace(0, 6 * np.pi, 200))
        shifted = np.roll(x, 5)
        shuffled = x.copy()
        rng.shuffle(shuffled)
        assert dtw_distance(x, shifted) < dtw_distance(x, shuffled)

    def test_all_zero_sequences(self):
        assert dtw_distance(np.zeros(50), np.zeros(50)) == 0.0


class TestFusePasses:
    def test_identical_passes_idempotent(self):
        ann = BeatAnnotation(np.arange(0.0, 10000.0, 1000.0), "tm", "x")
        fused = fuse_passes(ann, ann)
        assert np.array_equal(fused.peak_times_ms, ann.peak_times_ms)

    def test_offset_passes_meet_at_midpoints(self):
        fwd = BeatAnnotation(np.arange(0.0, 10000.0, 1000.0), "tm", "x")
        bwd = BeatAnnotation(np.arange(10.0, 10010.0, 1000.0), "tm", "x")
        fused = fuse_passes(fwd, bwd)
        assert np.array_equal(fused.peak_times_ms, np.arange(5.0, 10005.0, 1000.0))

    def test_empty_pass_is_neutral(self):
        fwd = BeatAnnotation(np.arange(0.0, 5000.0, 1000.0), "tm", "x")
        empty = BeatAnnotation(np.empty(0), "tm", "x")
        assert np.array_equal(fuse_passes(fwd, empty).peak_times_ms, fwd.peak_times_ms)
        assert np.array_equal(fuse_passes(empty, fwd).peak_times_ms, fwd.peak_times_ms)

    def test_disagreement_resolved_by_score(self):
        fwd = BeatAnnotation(np.array([1000.0]), "tm", "x")
        bwd = BeatAnnotation(np.array([1200.0]), "tm", "x")  # < refractory apart
        keep_b = fuse_passes(fwd, bwd, np.array([0.1]), np.array([0.9]))
        assert np.array_equal(keep_b.peak_times_ms, [1200.0])
        keep_f = fuse_passes(fwd, bwd, np.array([0.9]), np.array([0.1]))
        assert np.array_equal(keep_f.peak_times_ms, [1000.0])

    def test_output_respects_refractory(self, rng):
        times_f = np.sort(rng.uniform(0, 60000, 80))
        times_b = np.sort(rng.uniform(0, 60000, 80))
        fwd = BeatAnnotation(np.unique(times_f), "tm", "x")
        bwd = BeatAnnotation(np.unique(times_b), "tm", "x")
        fused = fuse_passes(fwd, bwd)
        if len(fused) > 1:
            assert np.all(np.diff(fused.peak_times_ms) >= MIN_BEAT_SPACING_MS - 1e-9)
