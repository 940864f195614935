"""Detector protocol files, bit-compatible with the bcgkit formats.

Signal CSV: one `# sampling_hz=<real> start_time_ms=<real> label=<text>`
header line, then one amplitude per line.  Annotation JSON: an object with
`trace_label`, `source` and strictly increasing `peak_times_ms`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_HEADER_PREFIX = "# "


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    sampling_hz: float
    start_time_ms: float
    label: str

    @property
    def duration_ms(self) -> float:
        return len(self.samples) / self.sampling_hz * 1000.0


def read_signal(path) -> Signal:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(_HEADER_PREFIX):
            raise ValueError(f"{path}: missing signal header line")
        fields = header[len(_HEADER_PREFIX):]
        sampling_part, rest = fields.split(" ", 1)
        start_part, label_part = rest.split(" ", 1)
        sampling_hz = float(sampling_part.split("=", 1)[1])
        start_time_ms = float(start_part.split("=", 1)[1])
        label = label_part.split("=", 1)[1]
        samples = np.loadtxt(fh, dtype=float, ndmin=1)
    if samples.size == 0:
        raise ValueError(f"{path}: no samples")
    return Signal(samples, sampling_hz, start_time_ms, label)


def read_annotation(path):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    times = np.asarray(payload["peak_times_ms"], dtype=float)
    return times, payload["source"], payload["trace_label"]


def write_annotation(path, peak_times_ms, trace_label: str, source: str = "dl") -> None:
    times = [float(t) for t in peak_times_ms]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("peak times must be strictly increasing")
    payload = {
        "trace_label": trace_label,
        "source": source,
        "peak_times_ms": times,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
