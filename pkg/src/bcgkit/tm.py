"""Template-matching J-peak detector.

Four stages over a band-passed trace: short-time-energy artifact masking,
autocorrelation-based initial beat detection, iterative template modelling,
and a bidirectional matched sweep that scores candidate peaks with a mix of
normalized cross-correlation and band-limited dynamic time warping while the
template and interval estimate adapt.  The forward and backward sweeps are
merged into one strictly increasing annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    MIN_BEAT_SPACING_MS,
    BeatAnnotation,
    SignalTrace,
    moving_average,
    normalized_correlation,
)
from .errors import (
    InsufficientBeatsError,
    InvalidInputError,
    NoRhythmError,
    TemplateFailureError,
)


@dataclass(frozen=True)
class TmConfig:
    """All tunable constants of the detector, sweepable from the pipeline."""

    refine_gate: float = 0.6          # min member correlation during refinement
    search_band: float = 0.3          # candidate window: [1-b, 1+b] * interval
    score_mix: float = 0.7            # weight of NCC vs DTW in candidate scores
    fuse_window_ms: float = 50.0      # agreement window when merging passes
    interval_alpha: float = 0.2       # EMA factor for the interval estimate
    template_beta: float = 0.1        # EMA factor for the dynamic template
    artifact_k: float = 6.0           # energy threshold, multiples of median
    artifact_window_ms: float = 1000.0
    artifact_dilate_ms: float = 1000.0
    artifact_trim_ms: float = 300.0   # compensates energy-envelope edge smear
    min_period_ms: float = 60000.0 / 180.0
    max_period_ms: float = 60000.0 / 30.0
    acf_threshold: float = 0.15       # min autocorrelation peak for a rhythm
    dtw_band_frac: float = 0.10       # Sakoe-Chiba band, fraction of length
    min_template_ms: float = 300.0
    max_template_ms: float = 1200.0
    refine_max_iter: int = 10
    max_candidates: int = 8


DEFAULT_TM_CONFIG = TmConfig()


@dataclass(frozen=True)
class ArtifactMask:
    """Disjoint, sorted (start_ms, end_ms) intervals marked motion-corrupted."""

    intervals: tuple = ()

    def __post_init__(self):
        iv = tuple((float(s), float(e)) for s, e in self.intervals)
        for s, e in iv:
            if e <= s:
                raise InvalidInputError(f"empty mask interval ({s}, {e})")
        for (a, b), (c, d) in zip(iv, iv[1:]):
            if c < b:
                raise InvalidInputError("mask intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", iv)

    @property
    def total_ms(self) -> float:
        return sum(e - s for s, e in self.intervals)

    def overlaps(self, start_ms: float, end_ms: float) -> bool:
        return any(start_ms < e and end_ms > s for s, e in self.intervals)

    def covers(self, t_ms: float) -> bool:
        return any(s <= t_ms < e for s, e in self.intervals)

    def unmasked_spans(self, trace: SignalTrace):
        spans = []
        cursor = trace.start_time_ms
        for s, e in self.intervals:
            if s > cursor:
                spans.append((cursor, min(s, trace.end_time_ms)))
            cursor = max(cursor, e)
        if cursor < trace.end_time_ms:
            spans.append((cursor, trace.end_time_ms))
        return spans


@dataclass(frozen=True, eq=False)
class Template:
    """Refined ensemble-average beat model used by the matched sweep."""

    waveform: np.ndarray
    length_ms: float
    member_count: int
    sampling_hz: float
    peak_offset_ms: float     # offset of the dominant-peak reference sample
    anchor_time_ms: float     # best-correlated member beat; sweep start
    interval_ms: float        # initial beat-interval estimate

    def __post_init__(self):
        if not (300.0 <= self.length_ms <= 1200.0):
            raise InvalidInputError(f"template length {self.length_ms} ms outside [300, 1200]")
        if self.member_count < 3:
            raise TemplateFailureError(f"template needs >= 3 members, got {self.member_count}")
        object.__setattr__(self, "waveform", np.asarray(self.waveform, dtype=float))

    @property
    def peak_offset_samples(self) -> int:
        return int(round(self.peak_offset_ms * self.sampling_hz / 1000.0))


def detect_artifacts(trace: SignalTrace, config: TmConfig = DEFAULT_TM_CONFIG) -> ArtifactMask:
    """Mask windows whose short-time energy exceeds k x the recording median.

    Super-threshold runs of the 1 s energy envelope are trimmed by the
    envelope's edge smear and then dilated by 1 s on each side.
    """
    x = trace.samples
    fs = trace.sampling_hz
    win = max(int(round(config.artifact_window_ms * fs / 1000.0)), 1)
    energy = moving_average(x * x, win)
    threshold = config.artifact_k * float(np.median(energy))
    above = energy > threshold
    if not above.any():
        return ArtifactMask()

    idx = np.flatnonzero(above)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    run_bounds = []
    start = idx[0]
    for b in breaks:
        run_bounds.append((start, idx[b]))
        start = idx[b + 1]
    run_bounds.append((start, idx[-1]))

    spans = []
    for i0, i1 in run_bounds:
        s = trace.index_to_time(int(i0)) + config.artifact_trim_ms
        e = trace.index_to_time(int(i1)) - config.artifact_trim_ms
        if e <= s:
            continue
        s = max(s - config.artifact_dilate_ms, trace.start_time_ms)
        e = min(e + config.artifact_dilate_ms, trace.end_time_ms)
        if spans and s <= spans[-1][1]:
            spans[-1] = (spans[-1][0], max(spans[-1][1], e))
        else:
            spans.append((s, e))
    return ArtifactMask(tuple(spans))


def estimate_period_ms(trace: SignalTrace, mask: ArtifactMask,
                       config: TmConfig = DEFAULT_TM_CONFIG) -> float:
    """Dominant beat period from windowed autocorrelation of unmasked signal.

    The lag search is restricted to the plausible heart-rate band; the
    smallest lag whose averaged autocorrelation reaches 90% of the band
    maximum wins, which keeps period doublings from shadowing the
    fundamental.  Raises NoRhythmError when no admissible peak clears the
    threshold.
    """
    fs = trace.sampling_hz
    spans = mask.unmasked_spans(trace)
    if sum(e - s for s, e in spans) < 30000.0:
        raise InvalidInputError("need at least 30 s of unmasked signal")

    min_lag = int(round(config.min_period_ms * fs / 1000.0))
    max_lag = int(round(config.max_period_ms * fs / 1000.0))
    win_n = int(round(30000.0 * fs / 1000.0))

    windows = []
    for s, e in spans:
        i0 = trace.time_to_index(s)
        i1 = trace.time_to_index(e - 1e-9) + 1
        pos = i0
        while pos + win_n <= i1 and len(windows) < 8:
            windows.append(trace.samples[pos:pos + win_n])
            pos += win_n
    if not windows:
        # spans are individually shorter than one window; use the longest
        s, e = max(spans, key=lambda se: se[1] - se[0])
        i0 = trace.time_to_index(s)
        i1 = trace.time_to_index(e - 1e-9) + 1
        windows.append(trace.samples[i0:i1])

    periods = []
    for w in windows:
        w = w - w.mean()
        spectrum = np.fft.rfft(w, n=2 * len(w))
        acf = np.fft.irfft(spectrum * np.conj(spectrum))[:max_lag + 1]
        if acf[0] <= 0:
            continue
        band = acf[min_lag:max_lag + 1] / acf[0]
        r_max = float(band.max())
        if r_max < config.acf_threshold:
            continue
        strong = np.flatnonzero(band >= 0.9 * r_max)
        # smallest strong lag that is a local max: period doublings lose
        lag_idx = None
        for i in strong:
            left = band[i - 1] if i > 0 else -np.inf
            right = band[i + 1] if i < len(band) - 1 else -np.inf
            if band[i] >= left and band[i] >= right:
                lag_idx = int(i)
                break
        if lag_idx is None:
            lag_idx = int(np.argmax(band))
        periods.append((min_lag + lag_idx) * 1000.0 / fs)
    if not periods:
        raise NoRhythmError(
            f"no autocorrelation peak above {config.acf_threshold} in the admissible band"
        )
    return float(np.median(periods))


def initial_detect(trace: SignalTrace, mask: ArtifactMask,
                   config: TmConfig = DEFAULT_TM_CONFIG) -> BeatAnnotation:
    """Coarse beats: local maxima near the periodic grid of the estimated period."""
    period_ms = estimate_period_ms(trace, mask, config)
    fs = trace.sampling_hz
    x = trace.samples
    n = len(x)
    period_n = int(round(period_ms * fs / 1000.0))

    masked = np.zeros(n, dtype=bool)
    for s, e in mask.intervals:
        masked[trace.time_to_index(s):trace.time_to_index(e - 1e-9) + 1] = True
    xm = np.where(masked, -np.inf, x)

    anchor = int(np.argmax(xm))
    beats = [anchor]

    def walk(direction: int):
        i = anchor
        while True:
            if direction > 0:
                lo, hi = i + int(0.75 * period_n), i + int(1.25 * period_n)
            else:
                lo, hi = i - int(1.25 * period_n), i - int(0.75 * period_n)
            lo = max(lo, 0)
            hi = min(hi, n - 1)
            if hi <= lo:
                break
            seg = xm[lo:hi + 1]
            if np.isinf(seg).all():
                i += direction * period_n
                if i < 0 or i >= n:
                    break
                continue
            i = lo + int(np.argmax(seg))
            beats.append(i)

    walk(+1)
    walk(-1)
    times = np.sort(np.asarray(sorted(set(beats)), dtype=float)) * 1000.0 / fs + trace.start_time_ms
    return BeatAnnotation(times, "tm", trace.label)


def build_template(trace: SignalTrace, coarse: BeatAnnotation,
                   mask: ArtifactMask = ArtifactMask(),
                   config: TmConfig = DEFAULT_TM_CONFIG) -> Template:
    """Ensemble-average and iteratively refine a beat template.

    Members are segments centered on coarse beats (window = median coarse
    interval clamped to [300, 1200] ms) that avoid the artifact mask.  Each
    round drops members correlating < the refinement gate with the current
    mean and re-averages, until membership stabilizes; fewer than 3
    survivors is a template failure.
    """
    if len(coarse) < 2:
        raise InsufficientBeatsError("coarse annotation needs >= 2 beats")
    fs = trace.sampling_hz
    window_ms = float(np.clip(np.median(np.diff(coarse.peak_times_ms)),
                              config.min_template_ms, config.max_template_ms))
    length = max(int(round(window_ms * fs / 1000.0)), 2)
    half = length // 2

    segments, times = [], []
    for t in coarse.peak_times_ms:
        center = trace.time_to_index(t)
        lo = center - half
        hi = lo + length
        if lo < 0 or hi > len(trace.samples):
            continue
        if mask.overlaps(trace.index_to_time(lo), trace.index_to_time(hi - 1)):
            continue
        segments.append(trace.samples[lo:hi])
        times.append(t)
    if len(segments) < 8:
        raise InsufficientBeatsError(
            f"need >= 8 coarse beats outside the mask, got {len(segments)}"
        )
    segments = np.vstack(segments)
    times = np.asarray(times)

    alive = np.ones(len(segments), dtype=bool)
    corr = np.zeros(len(segments))
    for _ in range(config.refine_max_iter):
        mean = segments[alive].mean(axis=0)
        corr = np.array([
            normalized_correlation(seg, mean) if keep else -np.inf
            for seg, keep in zip(segments, alive)
        ])
        with np.errstate(invalid="ignore"):
            new_alive = alive & (corr >= config.refine_gate)
        if new_alive.sum() < 3:
            raise TemplateFailureError(
                "fewer than 3 segments remain mutually similar; template modelling failed"
            )
        if (new_alive == alive).all():
            break
        alive = new_alive

    waveform = segments[alive].mean(axis=0)
    # J-peak reference: the dominant positive peak (candidates during the
    # matched sweep are local maxima, so the reference must be one too)
    peak_idx = int(np.argmax(waveform))
    anchor_time = float(times[np.argmax(np.where(alive, corr, -np.inf))])
    return Template(
        waveform=waveform,
        length_ms=window_ms,
        member_count=int(alive.sum()),
        sampling_hz=fs,
        peak_offset_ms=peak_idx * 1000.0 / fs,
        anchor_time_ms=anchor_time,
        interval_ms=float(np.median(np.diff(coarse.peak_times_ms))),
    )


@njit(cache=True)
def _dtw_cost(a, b, band):  # pragma: no cover - exercised via dtw_distance
    n = len(a)
    m = len(b)
    big = 1e300
    prev = np.full(m + 1, big)
    curr = np.full(m + 1, big)
    prev[0] = 0.0
    for i in range(1, n + 1):
        for j in range(m + 1):
            curr[j] = big
        j_lo = i - band if i - band > 1 else 1
        j_hi = i + band if i + band < m else m
        for j in range(j_lo, j_hi + 1):
            c = abs(a[i - 1] - b[j - 1])
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if curr[j - 1] < best:
                best = curr[j - 1]
            curr[j] = c + best
        tmp = prev
        prev = curr
        curr = tmp
    return prev[m]


def dtw_distance(a: np.ndarray, b: np.ndarray, band_frac: float = 0.10) -> float:
    """Band-limited DTW distance normalized by path length and magnitude.

    The raw warp cost is divided by the summed absolute magnitude of both
    sequences (their path-length-normalized mean magnitude), making the
    result unit-free: 0 for identical sequences, around 1 for unrelated
    ones.  Symmetric in its arguments.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise InvalidInputError("DTW inputs must be non-empty")
    band = max(int(round(band_frac * max(len(a), len(b)))), abs(len(a) - len(b)), 1)
    cost = float(_dtw_cost(a, b, band))
    denom = float(np.sum(np.abs(a)) + np.sum(np.abs(b)))
    if denom == 0.0:
        return 0.0
    return cost / denom


def _candidate_peaks(x: np.ndarray, lo: int, hi: int, limit: int):
    """Strict local maxima of x in [lo, hi]; falls back to the window argmax."""
    seg = x[lo:hi + 1]
    if len(seg) < 3:
        return [lo + int(np.argmax(seg))]
    interior = np.flatnonzero((seg[1:-1] > seg[:-2]) & (seg[1:-1] >= seg[2:])) + 1
    if len(interior) == 0:
        return [lo + int(np.argmax(seg))]
    if len(interior) > limit:
        order = np.argsort(seg[interior])[::-1][:limit]
        interior = interior[np.sort(order)]
    return [lo + int(i) for i in interior]


def _sweep(trace: SignalTrace, template: Template, mask: ArtifactMask,
           config: TmConfig, direction: int):
    """One directional matched sweep from the template anchor."""
    x = trace.samples
    fs = trace.sampling_hz
    n = len(x)
    tmpl = template.waveform.copy()
    length = len(tmpl)
    peak_off = template.peak_offset_samples
    lam = config.score_mix

    min_iv = MIN_BEAT_SPACING_MS * fs / 1000.0
    max_iv = config.max_period_ms * fs / 1000.0
    iv = float(np.clip(template.interval_ms * fs / 1000.0, min_iv, max_iv))
    min_space = int(math.ceil(min_iv)) + 1

    def segment(center: int):
        """Segment aligned to the template; truncated at trace edges.

        Returns (signal part, template part, full-length flag) or None when
        the overlap is too small or touches the artifact mask.
        """
        lo = center - peak_off
        hi = lo + length
        c_lo, c_hi = max(lo, 0), min(hi, n)
        if c_hi - c_lo < int(0.7 * length):
            return None
        if mask.overlaps(trace.index_to_time(c_lo), trace.index_to_time(c_hi - 1)):
            return None
        return (x[c_lo:c_hi], tmpl[c_lo - lo:c_hi - lo], c_hi - c_lo == length)

    def score(seg, tpl_part):
        ncc = normalized_correlation(seg, tpl_part)
        if math.isnan(ncc):
            return -math.inf
        return lam * ncc - (1.0 - lam) * dtw_distance(seg, tpl_part, config.dtw_band_frac)

    anchor = trace.time_to_index(template.anchor_time_ms)
    anchor_parts = segment(anchor)
    out_idx, out_scores = [], []
    if anchor_parts is not None:
        # a masked anchor still seeds the sweep position but emits no beat
        out_idx.append(anchor)
        out_scores.append(score(anchor_parts[0], anchor_parts[1]))

    i = anchor
    while True:
        if direction > 0:
            lo = i + max(int((1.0 - config.search_band) * iv), min_space)
            hi = min(i + int((1.0 + config.search_band) * iv), n - 1)
            if lo > n - 1:
                break
        else:
            hi = i - max(int((1.0 - config.search_band) * iv), min_space)
            lo = max(i - int((1.0 + config.search_band) * iv), 0)
            if hi < 0:
                break
        if hi < lo:
            i += direction * int(iv)
            if i < 0 or i >= n:
                break
            continue

        best_c, best_s, best_full = None, -math.inf, None
        for c in _candidate_peaks(x, lo, hi, config.max_candidates):
            parts = segment(c)
            if parts is None:
                continue
            seg, tpl_part, full = parts
            s = score(seg, tpl_part)
            if s > best_s:
                best_c, best_s = c, s
                best_full = seg if full else None
        if best_c is None:
            # window unusable (masked or at the edge): skip one period ahead
            i += direction * int(iv)
            if i < 0 or i >= n:
                break
            continue

        iv = float(np.clip((1.0 - config.interval_alpha) * iv
                           + config.interval_alpha * abs(best_c - i), min_iv, max_iv))
        if best_full is not None:
            # only full-length segments feed the dynamic template
            tmpl = (1.0 - config.template_beta) * tmpl + config.template_beta * best_full
        i = best_c
        out_idx.append(i)
        out_scores.append(best_s)

    order = np.argsort(out_idx)
    times = trace.start_time_ms + np.asarray(out_idx, dtype=float)[order] * 1000.0 / fs
    scores = np.asarray(out_scores, dtype=float)[order]
    return times, scores


def fuse_passes(forward: BeatAnnotation, backward: BeatAnnotation,
                forward_scores=None, backward_scores=None,
                eps_ms: float = 50.0) -> BeatAnnotation:
    """Merge two detection passes over the same trace.

    Peaks agreeing within ``eps_ms`` merge to their mean time; among
    remaining conflicts closer than the 180 bpm spacing the peak with the
    higher match score survives.  The result is strictly increasing.
    """
    f_t = forward.peak_times_ms
    b_t = backward.peak_times_ms
    f_s = np.zeros(len(f_t)) if forward_scores is None else np.asarray(forward_scores, float)
    b_s = np.zeros(len(b_t)) if backward_scores is None else np.asarray(backward_scores, float)

    merged = []  # (time, score)
    i = j = 0
    while i < len(f_t) and j < len(b_t):
        if abs(f_t[i] - b_t[j]) <= eps_ms:
            merged.append(((f_t[i] + b_t[j]) / 2.0, max(f_s[i], b_s[j])))
            i += 1
            j += 1
        elif f_t[i] < b_t[j]:
            merged.append((f_t[i], f_s[i]))
            i += 1
        else:
            merged.append((b_t[j], b_s[j]))
            j += 1
    merged.extend(zip(f_t[i:], f_s[i:]))
    merged.extend(zip(b_t[j:], b_s[j:]))
    merged.sort(key=lambda ts: ts[0])

    kept = []
    for t, s in merged:
        if kept and t - kept[-1][0] < MIN_BEAT_SPACING_MS:
            if s > kept[-1][1]:
                kept[-1] = (t, s)
        else:
            kept.append((t, s))

    source = forward.source if len(f_t) else backward.source
    label = forward.trace_label or backward.trace_label
    return BeatAnnotation(np.asarray([t for t, _ in kept]), source, label)


def match_detect(trace: SignalTrace, template: Template, mask: ArtifactMask,
                 config: TmConfig = DEFAULT_TM_CONFIG) -> BeatAnnotation:
    """Bidirectional matched sweep from the template anchor, passes fused."""
    f_times, f_scores = _sweep(trace, template, mask, config, +1)
    b_times, b_scores = _sweep(trace, template, mask, config, -1)
    forward = BeatAnnotation(f_times, "tm", trace.label)
    backward = BeatAnnotation(b_times, "tm", trace.label)
    return fuse_passes(forward, backward, f_scores, b_scores, config.fuse_window_ms)


def tm_detect(trace: SignalTrace, config: TmConfig = DEFAULT_TM_CONFIG) -> BeatAnnotation:
    """Full detector pipeline on a band-passed trace."""
    mask = detect_artifacts(trace, config)
    coarse = initial_detect(trace, mask, config)
    template = build_template(trace, coarse, mask, config)
    return match_detect(trace, template, mask, config)
