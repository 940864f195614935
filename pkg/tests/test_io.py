"""Detector protocol files: signal CSV and annotation JSON."""

import json

import numpy as np
import pytest

from bcgkit import BeatAnnotation, SignalTrace
from bcgkit.errors import InvalidInputError
from bcgkit.io import (
    read_annotation,
    read_signal,
    write_annotation,
    write_signal,
)


def test_signal_round_trip_bit_exact(tmp_path, rng):
    tr = SignalTrace(rng.standard_normal(500), 1000.0, 250.0, "subj-7 night 2")
    path = tmp_path / "sig.csv"
    write_signal(tr, path)
    back = read_signal(path)
    assert np.array_equal(back.samples, tr.samples)
    assert back.sampling_hz == tr.sampling_hz
    assert back.start_time_ms == tr.start_time_ms
    assert back.label == tr.label
    # writing the parsed trace again reproduces the bytes exactly
    path2 = tmp_path / "sig2.csv"
    write_signal(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_signal_header_format(tmp_path):
    tr = SignalTrace(np.array([1.5, -2.25]), 100.0, 0.0, "abc")
    path = tmp_path / "sig.csv"
    write_signal(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# sampling_hz=100.0 start_time_ms=0.0 label=abc"
    assert lines[1] == "1.5"
    assert lines[2] == "-2.25"


def test_signal_missing_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0\n2.0\n")
    with pytest.raises(InvalidInputError):
        read_signal(path)


def test_signal_malformed_amplitude(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# sampling_hz=100.0 start_time_ms=0.0 label=x\n1.0\npotato\n")
    with pytest.raises(InvalidInputError):
        read_signal(path)


def test_signal_missing_file(tmp_path):
    with pytest.raises(InvalidInputError):
        read_signal(tmp_path / "nope.csv")


def test_annotation_round_trip(tmp_path):
    ann = BeatAnnotation([10.5, 900.0, 1800.25], "tm", "rec1")
    path = tmp_path / "ann.json"
    write_annotation(ann, path)
    back = read_annotation(path)
    assert np.array_equal(back.peak_times_ms, ann.peak_times_ms)
    assert back.source == "tm"
    assert back.trace_label == "rec1"


def test_annotation_json_shape(tmp_path):
    ann = BeatAnnotation([1.0, 2.0], "dl", "r")
    path = tmp_path / "ann.json"
    write_annotation(ann, path)
    payload = json.loads(path.read_text())
    assert set(payload) == {"trace_label", "source", "peak_times_ms"}
    assert payload["peak_times_ms"] == [1.0, 2.0]


def test_annotation_missing_key(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps({"source": "tm", "peak_times_ms": [1.0]}))
    with pytest.raises(InvalidInputError):
        read_annotation(path)


def test_annotation_non_numeric_times(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps({"trace_label": "x", "source": "tm",
                                "peak_times_ms": [1.0, "2.0"]}))
    with pytest.raises(InvalidInputError):
        read_annotation(path)


def test_annotation_invalid_json(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text("{not json")
    with pytest.raises(InvalidInputError):
        read_annotation(path)
