"""Synthetic BCG recordings with exact ground-truth beat annotations.

A recording is built from per-beat complexes (five Gaussian lobes H/I/J/K/L
with the J lobe dominant), a heart-rate process (base rate + respiratory
sinus arrhythmia + white jitter calibrated to an RMSSD target, optionally
with ectopic short-beat/compensatory-pause pairs), a respiratory baseline
drift, in-band Gaussian noise at a requested SNR and optional motion-artifact
bursts.  Everything is driven by one seeded generator, so a (profile,
corruption, duration, rate, seed) tuple reproduces a recording bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json
import math

import numpy as np

from .core import (
    MIN_BEAT_SPACING_MS,
    BeatAnnotation,
    SignalTrace,
    bandpass_filter,
)
from .errors import CorpusSpecError, DuplicateLabelError, InvalidParameterError
from . import io as bcgio

#: Default per-wave (amplitude, width_ms, offset_ms) lobes of one complex.
DEFAULT_WAVE_PARAMS = {
    "H": (0.25, 25.0, -120.0),
    "I": (-0.60, 22.0, -60.0),
    "J": (1.00, 20.0, 0.0),
    "K": (-0.70, 24.0, 55.0),
    "L": (0.35, 28.0, 115.0),
}

#: Instantaneous heart-rate band assumed plausible before any gating (bpm).
DEFAULT_HR_BOUNDS = (36.52, 145.81)

_BURST_LEN_MS = 5000.0
_BASELINE_AMP = 0.25
_EDGE_MARGIN_MS = 500.0


@dataclass(frozen=True)
class SubjectProfile:
    """Per-subject generation parameters."""

    base_hr_bpm: float = 60.0
    hrv_rmssd_target_ms: float = 20.0
    arrhythmia_rate: float = 0.0
    morphology_seed: int = 0
    wave_params: dict = field(default_factory=lambda: dict(DEFAULT_WAVE_PARAMS))

    def __post_init__(self):
        lo, hi = DEFAULT_HR_BOUNDS
        if not (lo <= self.base_hr_bpm <= hi):
            raise InvalidParameterError(
                f"base_hr_bpm {self.base_hr_bpm} outside plausible band [{lo}, {hi}]"
            )
        if not (0.0 <= self.arrhythmia_rate <= 1.0):
            raise InvalidParameterError("arrhythmia_rate must be in [0, 1]")
        if self.hrv_rmssd_target_ms < 0:
            raise InvalidParameterError("hrv_rmssd_target_ms must be >= 0")
        amps = {w: abs(p[0]) for w, p in self.wave_params.items()}
        if "J" not in amps or amps["J"] < max(amps.values()):
            raise InvalidParameterError("J wave must carry the largest amplitude")


@dataclass(frozen=True)
class CorruptionSpec:
    """Noise and artifact controls for one recording."""

    snr_db: float = math.inf
    respiration_hz: float = 0.25
    artifact_burst_rate: float = 0.0
    artifact_gain: float = 1.0

    def __post_init__(self):
        if not (0.1 < self.respiration_hz < 0.5):
            raise InvalidParameterError("respiration_hz must be in (0.1, 0.5)")
        if self.artifact_gain < 1.0:
            raise InvalidParameterError("artifact_gain must be >= 1")
        if self.artifact_burst_rate < 0:
            raise InvalidParameterError("artifact_burst_rate must be >= 0")


@dataclass(frozen=True)
class SyntheticRecording:
    """A generated recording plus the ground truth used to build it."""

    trace: SignalTrace
    beats: BeatAnnotation
    burst_spans_ms: tuple
    kernel: np.ndarray
    kernel_peak_idx: int


def complex_kernel(profile: SubjectProfile, sampling_hz: float):
    """Per-subject beat waveform and the index of its dominant peak.

    Lobe amplitudes and widths are perturbed by +/-20% from the profile's
    wave parameters using the morphology seed; non-J lobes are clamped so
    the J peak stays dominant.
    """
    rng = np.random.default_rng(profile.morphology_seed)
    lobes = {}
    for name in sorted(profile.wave_params):
        amp, width, offset = profile.wave_params[name]
        amp_f, width_f = 1.0 + 0.2 * rng.uniform(-1, 1, size=2)
        lobes[name] = (amp * amp_f, width * width_f, offset)
    j_amp = abs(lobes["J"][0])
    for name, (amp, width, offset) in lobes.items():
        if name != "J" and abs(amp) >= 0.85 * j_amp:
            lobes[name] = (math.copysign(0.85 * j_amp, amp), width, offset)

    half_ms = 220.0
    t = np.arange(-half_ms, half_ms + 1e-9, 1000.0 / sampling_hz)
    kernel = np.zeros_like(t)
    for amp, width, offset in lobes.values():
        kernel += amp * np.exp(-0.5 * ((t - offset) / width) ** 2)
    peak_idx = int(np.argmax(kernel))
    return kernel, peak_idx


def _unit_rmssd(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.sqrt(np.mean(np.diff(values) ** 2)))


def beat_times(profile: SubjectProfile, corruption: CorruptionSpec,
               duration_ms: float, rng: np.random.Generator) -> np.ndarray:
    """Ground-truth beat times (ms) for one recording.

    Interval = base interval * (1 + RSA modulation) + white jitter, with the
    RSA amplitude and jitter variance split so the interval RMSSD lands near
    the profile target.  Ectopics replace one interval by 0.7x nominal
    followed by a 1.3x compensatory pause.
    """
    i0 = 60000.0 / profile.base_hr_bpm
    margin = max(i0 / 2.0, _EDGE_MARGIN_MS)
    t0 = margin
    n_max = int(duration_ms / (0.7 * i0)) + 4

    # RSA amplitude: 30% of the RMSSD budget; white jitter covers the rest.
    f_r = corruption.respiration_hz
    t_nominal = t0 + i0 * np.arange(n_max)
    unit_mod = i0 * np.sin(2 * np.pi * f_r * t_nominal / 1000.0)
    rmssd_unit = _unit_rmssd(unit_mod)
    target = profile.hrv_rmssd_target_ms
    a_r = 0.3 * target / rmssd_unit if rmssd_unit > 0 else 0.0
    sigma = math.sqrt(max(target ** 2 - (0.3 * target) ** 2, 0.0) / 2.0)

    jitter = rng.normal(0.0, sigma, size=n_max) if sigma > 0 else np.zeros(n_max)
    ectopic_draws = rng.uniform(size=n_max)

    lo = MIN_BEAT_SPACING_MS + 0.5
    hi = 60000.0 / 36.0 - 0.5
    times = [t0]
    k = 0
    pending_pause = False
    while times[-1] < duration_ms - margin and k < n_max - 1:
        if pending_pause:
            interval = min(1.3 * i0, 2000.0)
            pending_pause = False
        elif profile.arrhythmia_rate > 0 and ectopic_draws[k] < profile.arrhythmia_rate:
            interval = max(0.7 * i0, lo)
            pending_pause = True
        else:
            base = i0 * (1.0 + a_r * np.sin(2 * np.pi * f_r * times[-1] / 1000.0))
            interval = float(np.clip(base + jitter[k], lo, hi))
        k += 1
        nxt = times[-1] + interval
        if nxt > duration_ms - margin:
            break
        times.append(nxt)
    return np.asarray(times)


def render_trace(times_ms: np.ndarray, kernel: np.ndarray, kernel_peak_idx: int,
                 duration_ms: float, sampling_hz: float, label: str = ""):
    """Sum one complex per beat onto a zero baseline; peaks land on the grid.

    Returns the trace and the grid-snapped beat times actually used.
    """
    n = int(round(duration_ms * sampling_hz / 1000.0))
    x = np.zeros(n)
    snapped = []
    for t in np.asarray(times_ms, dtype=float):
        idx = int(round(t * sampling_hz / 1000.0))
        start = idx - kernel_peak_idx
        k_lo = max(0, -start)
        k_hi = min(len(kernel), n - start)
        if k_hi <= k_lo:
            continue
        x[start + k_lo:start + k_hi] += kernel[k_lo:k_hi]
        snapped.append(idx * 1000.0 / sampling_hz)
    trace = SignalTrace(x, sampling_hz, 0.0, label)
    return trace, np.asarray(snapped)


def simulate(profile: SubjectProfile, corruption: CorruptionSpec, duration_s: float,
             sampling_hz: float, seed: int, label: str = "") -> SyntheticRecording:
    """Generate one recording together with all of its ground truth."""
    if duration_s <= 0:
        raise InvalidParameterError(f"duration_s must be > 0, got {duration_s}")
    if sampling_hz <= 0:
        raise InvalidParameterError(f"sampling_hz must be > 0, got {sampling_hz}")

    rng = np.random.default_rng(seed)
    duration_ms = duration_s * 1000.0
    kernel, peak_idx = complex_kernel(profile, sampling_hz)
    times = beat_times(profile, corruption, duration_ms, rng)
    trace, snapped = render_trace(times, kernel, peak_idx, duration_ms, sampling_hz, label)
    x = trace.samples

    # Respiratory baseline drift (suppressed later by the 1-10 Hz band-pass).
    phase = rng.uniform(0, 2 * np.pi)
    t_axis = np.arange(len(x)) / sampling_hz
    x = x + _BASELINE_AMP * np.sin(2 * np.pi * corruption.respiration_hz * t_axis + phase)

    clean_band = bandpass_filter(SignalTrace(trace.samples, sampling_hz), 1.0, 10.0, 3)
    band_power = float(np.mean(clean_band.samples ** 2))

    burst_spans = []
    if corruption.artifact_burst_rate > 0:
        n_bursts = int(round(corruption.artifact_burst_rate * duration_s / 60.0))
        burst_n = int(round(_BURST_LEN_MS * sampling_hz / 1000.0))
        taper = np.hanning(max(burst_n // 5, 2))
        window = np.ones(burst_n)
        window[:len(taper) // 2] = taper[:len(taper) // 2]
        window[-(len(taper) - len(taper) // 2):] = taper[len(taper) // 2:]
        for _ in range(n_bursts):
            for _attempt in range(100):
                start = rng.uniform(0, duration_ms - _BURST_LEN_MS)
                span = (start, start + _BURST_LEN_MS)
                if all(span[1] < s or span[0] > e for s, e in burst_spans):
                    break
            else:
                continue
            raw = rng.standard_normal(burst_n + 2000)
            shaped = bandpass_filter(SignalTrace(raw, sampling_hz), 1.0, 10.0, 3).samples
            shaped = shaped[1000:1000 + burst_n]
            rms = float(np.sqrt(np.mean(shaped ** 2)))
            if rms > 0:
                shaped = shaped / rms * corruption.artifact_gain * math.sqrt(band_power)
            i0 = int(round(span[0] * sampling_hz / 1000.0))
            i1 = min(i0 + burst_n, len(x))
            x[i0:i1] += (shaped * window)[: i1 - i0]
            burst_spans.append(span)
        burst_spans.sort()

    if math.isfinite(corruption.snr_db):
        noise_power = band_power / 10.0 ** (corruption.snr_db / 10.0)
        raw = rng.standard_normal(len(x) + 4000)
        shaped = bandpass_filter(SignalTrace(raw, sampling_hz), 1.0, 10.0, 3).samples
        shaped = shaped[2000:2000 + len(x)]
        rms = float(np.sqrt(np.mean(shaped ** 2)))
        if rms > 0 and noise_power > 0:
            x = x + shaped / rms * math.sqrt(noise_power)

    out = SignalTrace(x, sampling_hz, 0.0, label)
    beats = BeatAnnotation(snapped, "ground_truth", label)
    return SyntheticRecording(out, beats, tuple(burst_spans), kernel, peak_idx)


def generate_recording(profile: SubjectProfile, corruption: CorruptionSpec,
                       duration_s: float, sampling_hz: float, seed: int,
                       label: str = ""):
    """Public entry point: (trace, ground-truth annotation)."""
    rec = simulate(profile, corruption, duration_s, sampling_hz, seed, label)
    return rec.trace, rec.beats


# ---------------------------------------------------------------------------
# Corpus specification files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusEntry:
    label: str
    profile: SubjectProfile
    corruption: CorruptionSpec
    duration_s: float
    sampling_hz: float
    seed: int


_PROFILE_KEYS = {"base_hr_bpm", "hrv_rmssd_target_ms", "arrhythmia_rate", "morphology_seed"}
_CORRUPTION_KEYS = {"snr_db", "respiration_hz", "artifact_burst_rate", "artifact_gain"}
_ENTRY_KEYS = {"label", "duration_s", "sampling_hz", "seed"} | _PROFILE_KEYS | _CORRUPTION_KEYS


def parse_corpus_spec(text: str):
    """Parse a line-oriented key=value corpus spec into entries.

    Blocks are separated by blank lines; ``#`` starts a comment line.  Every
    parse problem reports the offending line number.
    """
    entries = []
    seen = {}
    block = {}
    block_line = None

    def close_block(end_line):
        if not block:
            return
        if "label" not in block:
            raise CorpusSpecError("block is missing a label", line=block_line)
        label = block["label"]
        if label in seen:
            raise DuplicateLabelError(
                f"duplicate label {label!r} (first defined at line {seen[label]})",
                line=block_line,
            )
        seen[label] = block_line
        seed = int(block.get("seed", 0))
        profile_kwargs = {k: float(block[k]) for k in _PROFILE_KEYS - {"morphology_seed"}
                          if k in block}
        profile_kwargs["morphology_seed"] = int(block.get("morphology_seed", seed))
        corruption_kwargs = {k: float(block[k]) for k in _CORRUPTION_KEYS if k in block}
        try:
            entry = CorpusEntry(
                label=label,
                profile=SubjectProfile(**profile_kwargs),
                corruption=CorruptionSpec(**corruption_kwargs),
                duration_s=float(block.get("duration_s", 60.0)),
                sampling_hz=float(block.get("sampling_hz", 1000.0)),
                seed=seed,
            )
        except InvalidParameterError as exc:
            raise CorpusSpecError(str(exc), line=block_line) from exc
        entries.append(entry)
        block.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            close_block(lineno)
            continue
        if "=" not in line:
            raise CorpusSpecError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ENTRY_KEYS:
            raise CorpusSpecError(f"unknown key {key!r}", line=lineno)
        if not block:
            block_line = lineno
        if key != "label":
            try:
                float(value)
            except ValueError:
                raise CorpusSpecError(f"non-numeric value for {key}: {value!r}", line=lineno)
        block[key] = value
    close_block(len(text.splitlines()) + 1)
    return entries


def generate_corpus(spec_file, out_dir):
    """Render every entry of a corpus spec to signal/annotation files.

    Writes ``<label>.csv`` and ``<label>.beats.json`` per entry plus a
    ``manifest.json`` listing them; returns the manifest list.
    """
    spec_path = Path(spec_file)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = parse_corpus_spec(spec_path.read_text(encoding="utf-8"))

    manifest = []
    for entry in entries:
        trace, beats = generate_recording(entry.profile, entry.corruption,
                                          entry.duration_s, entry.sampling_hz,
                                          entry.seed, entry.label)
        signal_name = f"{entry.label}.csv"
        ann_name = f"{entry.label}.beats.json"
        bcgio.write_signal(trace, out_dir / signal_name)
        bcgio.write_annotation(beats, out_dir / ann_name)
        manifest.append({
            "label": entry.label,
            "signal_path": signal_name,
            "annotation_path": ann_name,
            "profile_summary": {
                "base_hr_bpm": entry.profile.base_hr_bpm,
                "hrv_rmssd_target_ms": entry.profile.hrv_rmssd_target_ms,
                "arrhythmia_rate": entry.profile.arrhythmia_rate,
                "morphology_seed": entry.profile.morphology_seed,
                "snr_db": entry.corruption.snr_db if math.isfinite(entry.corruption.snr_db) else None,
                "respiration_hz": entry.corruption.respiration_hz,
                "artifact_burst_rate": entry.corruption.artifact_burst_rate,
                "artifact_gain": entry.corruption.artifact_gain,
                "duration_s": entry.duration_s,
                "sampling_hz": entry.sampling_hz,
                "seed": entry.seed,
            },
        })
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                           encoding="utf-8")
    return manifest
