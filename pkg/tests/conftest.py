"""Shared fixtures: seeded corpora and detections, built once per session."""

from __future__ import annotations

import numpy as np
import pytest

from bcgkit import bandpass_filter, envelope_detect, tm_detect
from bcgkit.corpora import standard_spec, tm_clean_spec
from bcgkit.pipeline import Recording
from bcgkit.synth import parse_corpus_spec, simulate


def _simulate_entries(spec_text):
    recordings = []
    for entry in parse_corpus_spec(spec_text):
        rec = simulate(entry.profile, entry.corruption, entry.duration_s,
                       entry.sampling_hz, entry.seed, entry.label)
        recordings.append(rec)
    return recordings


@pytest.fixture(scope="session")
def standard_corpus():
    """Mixed-quality corpus (SyntheticRecording per entry)."""
    return _simulate_entries(standard_spec())


@pytest.fixture(scope="session")
def standard_bundle(standard_corpus):
    """Standard corpus with filtered traces and detector outputs."""
    import time

    t0 = time.perf_counter()
    filtered, detections, recordings = {}, {}, []
    for rec in standard_corpus:
        f = bandpass_filter(rec.trace)
        filtered[rec.trace.label] = f
        detections[rec.trace.label] = {
            "tm": tm_detect(f),
            "alternate": envelope_detect(f),
        }
        recordings.append(Recording(rec.trace.label, None, rec.trace, rec.beats))
    return {"synthetic": standard_corpus, "filtered": filtered,
            "detections": detections, "recordings": recordings,
            "detect_seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def tm_clean_corpus():
    """Ten clean 10-minute recordings at 20 dB (accuracy regime)."""
    return _simulate_entries(tm_clean_spec())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
