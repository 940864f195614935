"""Detector protocol file formats.

Signal files are UTF-8 CSV: a single header line

    # sampling_hz=<real> start_time_ms=<real> label=<text>

followed by one amplitude per line as decimal text.  Annotation files are
JSON objects with keys ``trace_label``, ``source`` and ``peak_times_ms``.
Both formats are written deterministically (shortest round-tripping float
representation, fixed key order) so identical data yields identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import BeatAnnotation, SignalTrace
from .errors import InvalidInputError

_HEADER_PREFIX = "# "


def format_float(x: float) -> str:
    """Shortest decimal text that round-trips to the same float."""
    return repr(float(x))


def write_signal(trace: SignalTrace, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{_HEADER_PREFIX}sampling_hz={format_float(trace.sampling_hz)} "
        f"start_time_ms={format_float(trace.start_time_ms)} label={trace.label}"
    ]
    lines.extend(format_float(v) for v in trace.samples)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_signal(path) -> SignalTrace:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if not header.startswith(_HEADER_PREFIX):
                raise InvalidInputError(f"{path}: missing signal header line")
            fields = header[len(_HEADER_PREFIX):]
            try:
                sampling_part, rest = fields.split(" ", 1)
                start_part, label_part = rest.split(" ", 1)
                sampling_hz = float(sampling_part.split("=", 1)[1])
                start_time_ms = float(start_part.split("=", 1)[1])
                label = label_part.split("=", 1)[1]
            except (ValueError, IndexError) as exc:
                raise InvalidInputError(f"{path}: malformed signal header: {header!r}") from exc
            try:
                samples = np.loadtxt(fh, dtype=float, ndmin=1)
            except ValueError as exc:
                raise InvalidInputError(f"{path}: malformed amplitude line: {exc}") from exc
    except OSError as exc:
        raise InvalidInputError(f"cannot read signal file {path}: {exc}") from exc
    if samples.size == 0:
        raise InvalidInputError(f"{path}: signal file contains no samples")
    return SignalTrace(samples, sampling_hz, start_time_ms, label)


def annotation_to_json(annotation: BeatAnnotation) -> str:
    payload = {
        "trace_label": annotation.trace_label,
        "source": annotation.source,
        "peak_times_ms": [float(t) for t in annotation.peak_times_ms],
    }
    return json.dumps(payload, indent=2) + "\n"


def write_annotation(annotation: BeatAnnotation, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(annotation_to_json(annotation), encoding="utf-8")


def read_annotation(path) -> BeatAnnotation:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidInputError(f"cannot read annotation file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON: {exc}") from exc
    try:
        times = payload["peak_times_ms"]
        source = payload["source"]
        trace_label = payload["trace_label"]
    except (TypeError, KeyError) as exc:
        raise InvalidInputError(f"{path}: missing annotation key: {exc}") from exc
    if not all(isinstance(t, (int, float)) for t in times):
        raise InvalidInputError(f"{path}: peak_times_ms must be numbers")
    return BeatAnnotation(np.asarray(times, dtype=float), source, trace_label)
