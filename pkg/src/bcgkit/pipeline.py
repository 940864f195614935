"""End-to-end orchestration: generate, detect, score, fuse, evaluate, sweep.

Detection and confidence metrics are content-addressed by (input bytes,
parameters), so threshold sweeps re-use one detection pass.  All outputs are
written deterministically: fixed key order, shortest round-tripping floats,
sorted iteration, no timestamps.
"""

from __future__ import annotations

import hashlib
import json
import math
import shutil
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as bcgio
from .confidence import (
    Thresholds,
    epoch_metrics,
    score_from_metrics,
    score_to_record,
    segment_epochs,
)
from .config import PipelineConfig
from .core import BeatAnnotation, SignalTrace, bandpass_filter, intervals_of
from .envelope import envelope_detect
from .errors import (
    BcgkitError,
    DependencyMissingError,
    InsufficientBeatsError,
    InvalidInputError,
    InvalidParameterError,
    NoRhythmError,
    TemplateFailureError,
)
from .fusion import fuse_scored
from .metrics import EvalReport, evaluate, pooled_report, quality_level, rmssd
from .tm import tm_detect


@dataclass(frozen=True)
class Recording:
    label: str
    signal_path: Path
    trace: SignalTrace
    ground_truth: BeatAnnotation


# ---------------------------------------------------------------------------
# corpus loading and per-recording computations
# ---------------------------------------------------------------------------

def load_corpus(config: PipelineConfig):
    manifest_path = Path(config.corpus_dir) / "manifest.json"
    if not manifest_path.exists():
        raise InvalidInputError(f"corpus manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    recordings = []
    for entry in manifest:
        signal_path = Path(config.corpus_dir) / entry["signal_path"]
        trace = bcgio.read_signal(signal_path)
        gt = bcgio.read_annotation(Path(config.corpus_dir) / entry["annotation_path"])
        gt.check_bounds(trace)
        recordings.append(Recording(entry["label"], signal_path, trace, gt))
    return recordings


def preprocess(config: PipelineConfig, trace: SignalTrace) -> SignalTrace:
    return bandpass_filter(trace, config.filter_low_hz, config.filter_high_hz,
                           config.filter_order)


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _detector_token(config: PipelineConfig, detector: str) -> str:
    filt = f"{config.filter_low_hz}:{config.filter_high_hz}:{config.filter_order}"
    if detector == "tm":
        return f"tm|{filt}|{config.tm!r}"
    if detector == "alternate":
        return f"alternate|{filt}"
    if detector == "dl":
        return f"dl|{config.dl_command}|{config.dl_model}"
    raise InvalidParameterError(f"unknown detector {detector!r}")


def _cache_path(config: PipelineConfig, recording: Recording, detector: str) -> Path:
    key = hashlib.sha256(
        (_detector_token(config, detector) + "|" + _file_digest(recording.signal_path))
        .encode()
    ).hexdigest()
    return Path(config.out_dir) / "cache" / f"{key}.json"


def _run_dl_detector(config: PipelineConfig, recording: Recording,
                     out_path: Path) -> BeatAnnotation:
    if not config.dl_command or not config.dl_model:
        raise DependencyMissingError(
            "detector 'dl' is configured but dl.command/dl.model are not set"
        )
    executable = shutil.which(config.dl_command)
    if executable is None and not Path(config.dl_command).exists():
        raise DependencyMissingError(f"DL detector executable not found: {config.dl_command}")
    cmd = [executable or config.dl_command, "infer", "--model", str(config.dl_model),
           "--signal", str(recording.signal_path), "--out", str(out_path)]
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.returncode != 0:
        raise BcgkitError(
            f"DL detector failed (exit {result.returncode}): {result.stderr.strip()[-500:]}"
        )
    return bcgio.read_annotation(out_path)


def detect_recording(config: PipelineConfig, recording: Recording,
                     use_cache: bool = True) -> dict:
    """Run every configured detector; returns {detector: annotation}.

    Detector failures on degenerate signals (no rhythm, template failure)
    yield an empty annotation rather than aborting the corpus run.
    """
    out: dict[str, BeatAnnotation] = {}
    filtered = None
    for detector in config.detectors:
        cache_file = _cache_path(config, recording, detector)
        if use_cache and cache_file.exists():
            ann = bcgio.read_annotation(cache_file)
            out[detector] = ann
            continue
        if detector in ("tm", "alternate") and filtered is None:
            filtered = preprocess(config, recording.trace)
        if detector == "tm":
            try:
                ann = tm_detect(filtered, config.tm)
            except (NoRhythmError, TemplateFailureError, InsufficientBeatsError):
                ann = BeatAnnotation(np.empty(0), "tm", recording.label)
        elif detector == "alternate":
            ann = envelope_detect(filtered)
        elif detector == "dl":
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            ann = _run_dl_detector(config, recording, cache_file)
        else:
            raise InvalidParameterError(f"unknown detector {detector!r}")
        if use_cache:
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            bcgio.write_annotation(ann, cache_file)
        out[detector] = ann
    return out


def _detect_worker(args):
    config, recording = args
    return recording.label, detect_recording(config, recording)


def detect_corpus(config: PipelineConfig, recordings) -> dict:
    """Detections for every recording, optionally with a process pool."""
    recordings = sorted(recordings, key=lambda r: r.label)
    if config.workers > 1 and len(recordings) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = dict(pool.map(_detect_worker,
                                    [(config, rec) for rec in recordings]))
    else:
        results = {rec.label: detect_recording(config, rec) for rec in recordings}
    return results


def recording_metrics(config: PipelineConfig, recording: Recording,
                      detections: dict) -> dict:
    """Threshold-free epoch metrics per detector over the common grid."""
    filtered = preprocess(config, recording.trace)
    thr = config.thresholds
    metrics = {}
    for detector in sorted(detections):
        epochs = segment_epochs(filtered, detections[detector], thr.epoch_ms)
        metrics[detector] = [
            epoch_metrics(ep, thr.hr_min_bpm, thr.hr_max_bpm) for ep in epochs
        ]
    return metrics


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------

def epoch_spans(trace: SignalTrace, epoch_ms: float):
    bounds = []
    t0, end = trace.start_time_ms, trace.end_time_ms
    n = max(1, int(math.ceil((end - t0) / epoch_ms - 1e-12)))
    for k in range(n):
        bounds.append((t0 + k * epoch_ms, min(t0 + (k + 1) * epoch_ms, end)))
    return bounds


def restrict_annotation(annotation: BeatAnnotation, spans) -> BeatAnnotation:
    if not spans:
        return BeatAnnotation(np.empty(0), annotation.source, annotation.trace_label)
    t = annotation.peak_times_ms
    keep = np.zeros(len(t), dtype=bool)
    for s, e in spans:
        keep |= (t >= s) & (t < e)
    return BeatAnnotation(t[keep], annotation.source, annotation.trace_label)


def evaluate_ungated(recording: Recording, annotation: BeatAnnotation,
                     epoch_ms: float, threshold_ms: float = 30.0,
                     min_beats: int = 3) -> EvalReport:
    """Solo-detector report without confidence gating.

    An epoch counts as reported when the detector placed at least
    ``min_beats`` beats in it.
    """
    spans = [
        (s, e) for s, e in epoch_spans(recording.trace, epoch_ms)
        if len(annotation.within(s, e)) >= min_beats
    ]
    return evaluate(recording.ground_truth, annotation, spans,
                    recording.trace.duration_ms, threshold_ms)


def evaluate_gated(recording: Recording, annotation: BeatAnnotation,
                   metrics, thresholds: Thresholds,
                   threshold_ms: float = 30.0) -> EvalReport:
    """Solo-detector report keeping only epochs acceptable at the thresholds."""
    spans = []
    for m in metrics:
        score = score_from_metrics(m, thresholds, annotation.source)
        if score.acceptable:
            spans.append((m.start_ms, m.end_ms))
    return evaluate(recording.ground_truth, restrict_annotation(annotation, spans),
                    spans, recording.trace.duration_ms, threshold_ms)


def evaluate_hybrid(recording: Recording, hybrid: BeatAnnotation, outcomes,
                    threshold_ms: float = 30.0) -> EvalReport:
    spans = [(o.start_ms, o.end_ms) for o in outcomes if o.chosen is not None]
    return evaluate(recording.ground_truth, hybrid, spans,
                    recording.trace.duration_ms, threshold_ms)


# ---------------------------------------------------------------------------
# deterministic writing
# ---------------------------------------------------------------------------

def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _fmt(v, width=9, digits=2):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return " " * (width - 2) + "--"
    return f"{v:{width}.{digits}f}"


def _report_cells(report: EvalReport):
    return (report.e_abs_ms if report.n_bcg else None,
            report.pre_pct if report.n_bcg else None,
            report.coverage_pct)


# ---------------------------------------------------------------------------
# pipeline commands
# ---------------------------------------------------------------------------

def run_detect(config: PipelineConfig, recordings=None) -> dict:
    """Detect every recording and write one annotation file per detector."""
    if recordings is None:
        recordings = load_corpus(config)
    detections = detect_corpus(config, recordings)
    ann_dir = Path(config.out_dir) / "annotations"
    for rec in sorted(recordings, key=lambda r: r.label):
        for detector in config.detectors:
            bcgio.write_annotation(detections[rec.label][detector],
                                   ann_dir / f"{rec.label}.{detector}.json")
    return detections


def run_score(config: PipelineConfig, recordings=None, detections=None) -> dict:
    """Score every (recording, detector) pair per epoch and write the records."""
    if recordings is None:
        recordings = load_corpus(config)
    if detections is None:
        detections = detect_corpus(config, recordings)
    all_metrics = {}
    score_dir = Path(config.out_dir) / "scores"
    for rec in sorted(recordings, key=lambda r: r.label):
        metrics = recording_metrics(config, rec, detections[rec.label])
        all_metrics[rec.label] = metrics
        for detector in sorted(metrics):
            records = [
                score_to_record(
                    score_from_metrics(m, config.thresholds, detector),
                    m.start_ms, m.end_ms)
                for m in metrics[detector]
            ]
            _write_json(score_dir / f"{rec.label}.{detector}.json", records)
    return all_metrics


def run_fuse(config: PipelineConfig, recordings=None, detections=None,
             all_metrics=None) -> dict:
    """Fuse per recording; writes the hybrid annotation and an audit log."""
    if recordings is None:
        recordings = load_corpus(config)
    if detections is None:
        detections = detect_corpus(config, recordings)
    if all_metrics is None:
        all_metrics = {
            rec.label: recording_metrics(config, rec, detections[rec.label])
            for rec in recordings
        }
    fused = {}
    hybrid_dir = Path(config.out_dir) / "hybrid"
    for rec in sorted(recordings, key=lambda r: r.label):
        filtered = preprocess(config, rec.trace)
        hybrid, outcomes = fuse_scored(filtered, all_metrics[rec.label],
                                       detections[rec.label], config.thresholds,
                                       config.priority)
        fused[rec.label] = (hybrid, outcomes)
        bcgio.write_annotation(hybrid, hybrid_dir / f"{rec.label}.hybrid.json")
        _write_json(hybrid_dir / f"{rec.label}.audit.json",
                    [o.to_record() for o in outcomes])
    return fused


def run_eval(config: PipelineConfig, recordings=None, detections=None) -> dict:
    """Per-recording and pooled reports for every solo detector and the hybrid."""
    if recordings is None:
        recordings = load_corpus(config)
    if not recordings:
        raise InvalidInputError("corpus is empty")
    if detections is None:
        detections = detect_corpus(config, recordings)
    all_metrics = {
        rec.label: recording_metrics(config, rec, detections[rec.label])
        for rec in recordings
    }
    fused = run_fuse(config, recordings, detections, all_metrics)

    epoch_ms = config.thresholds.epoch_ms
    thr_ms = config.precision_threshold_ms
    per_recording = {}
    for rec in sorted(recordings, key=lambda r: r.label):
        methods = {}
        for detector in config.detectors:
            methods[detector] = evaluate_ungated(rec, detections[rec.label][detector],
                                                 epoch_ms, thr_ms)
        hybrid, outcomes = fused[rec.label]
        methods["hybrid"] = evaluate_hybrid(rec, hybrid, outcomes, thr_ms)
        per_recording[rec.label] = methods

    method_names = list(config.detectors) + ["hybrid"]
    pooled = {
        name: pooled_report(per_recording[label][name] for label in sorted(per_recording))
        for name in method_names
    }

    eval_dir = Path(config.out_dir) / "eval"
    for label in sorted(per_recording):
        _write_json(eval_dir / f"{label}.json",
                    {"label": label,
                     "methods": {k: v.to_record()
                                 for k, v in sorted(per_recording[label].items())}})
    _write_json(eval_dir / "summary.json",
                {"pooled": {k: v.to_record() for k, v in sorted(pooled.items())},
                 "recordings": sorted(per_recording)})

    lines = ["recording  method     E_abs(ms)   Pre(%)   Cov(%)   pairs"]
    for label in sorted(per_recording):
        for name in method_names:
            r = per_recording[label][name]
            e, p, c = _report_cells(r)
            lines.append(f"{label:<10} {name:<9} {_fmt(e)} {_fmt(p, 8)} {_fmt(c, 8)} {r.n_bcg:7d}")
    lines.append("")
    lines.append("pooled")
    for name in method_names:
        r = pooled[name]
        e, p, c = _report_cells(r)
        lines.append(f"{'ALL':<10} {name:<9} {_fmt(e)} {_fmt(p, 8)} {_fmt(c, 8)} {r.n_bcg:7d}")
    _write_text(eval_dir / "summary.txt", "\n".join(lines) + "\n")
    return {"per_recording": per_recording, "pooled": pooled}


def sweep_rows(config: PipelineConfig):
    if not config.sweep_t_mc or not config.sweep_t_rc:
        raise InvalidParameterError("sweep grids must be non-empty")
    if len(config.sweep_t_mc) != len(config.sweep_t_rc):
        raise InvalidParameterError(
            "sweep.t_mc and sweep.t_rc must pair up (same length)"
        )
    return list(zip(config.sweep_t_mc, config.sweep_t_rc))


def run_sweep(config: PipelineConfig, recordings=None, detections=None) -> dict:
    """Threshold and weight-ratio sweeps over the corpus.

    One detection/metrics pass feeds every row: rows only change thresholds
    or weights, never detections.
    """
    if recordings is None:
        recordings = load_corpus(config)
    if not recordings:
        raise InvalidInputError("corpus is empty")
    if not config.sweep_weights:
        raise InvalidParameterError("sweep.weights must be non-empty")
    rows = sweep_rows(config)
    if detections is None:
        detections = detect_corpus(config, recordings)
    recordings = sorted(recordings, key=lambda r: r.label)
    filtered = {rec.label: preprocess(config, rec.trace) for rec in recordings}
    all_metrics = {
        rec.label: recording_metrics(config, rec, detections[rec.label])
        for rec in recordings
    }

    epoch_ms = config.thresholds.epoch_ms
    thr_ms = config.precision_threshold_ms
    base = config.thresholds

    baseline = {
        detector: pooled_report(
            evaluate_ungated(rec, detections[rec.label][detector], epoch_ms, thr_ms)
            for rec in recordings)
        for detector in config.detectors
    }

    threshold_rows = []
    for t_mc, t_rc in rows:
        thr = Thresholds(t_mc=t_mc, t_rc=t_rc, w1=base.w1, w2=base.w2,
                         epoch_ms=base.epoch_ms, hr_min_bpm=base.hr_min_bpm,
                         hr_max_bpm=base.hr_max_bpm)
        methods = {}
        for detector in config.detectors:
            methods[detector] = pooled_report(
                evaluate_gated(rec, detections[rec.label][detector],
                               all_metrics[rec.label][detector], thr, thr_ms)
                for rec in recordings)
        hybrid_reports = []
        for rec in recordings:
            hybrid, outcomes = fuse_scored(filtered[rec.label], all_metrics[rec.label],
                                           detections[rec.label], thr, config.priority)
            hybrid_reports.append(evaluate_hybrid(rec, hybrid, outcomes, thr_ms))
        methods["hybrid"] = pooled_report(hybrid_reports)
        threshold_rows.append({"t_mc": t_mc, "t_rc": t_rc, "methods": methods})

    weight_rows = []
    for w1, w2 in config.sweep_weights:
        thr = Thresholds(t_mc=base.t_mc, t_rc=base.t_rc, w1=w1, w2=w2,
                         epoch_ms=base.epoch_ms, hr_min_bpm=base.hr_min_bpm,
                         hr_max_bpm=base.hr_max_bpm)
        hybrid_reports = []
        for rec in recordings:
            hybrid, outcomes = fuse_scored(filtered[rec.label], all_metrics[rec.label],
                                           detections[rec.label], thr, config.priority)
            hybrid_reports.append(evaluate_hybrid(rec, hybrid, outcomes, thr_ms))
        weight_rows.append({"w1": w1, "w2": w2, "hybrid": pooled_report(hybrid_reports)})

    sweep_dir = Path(config.out_dir) / "sweep"
    method_names = list(config.detectors) + ["hybrid"]

    payload = {
        "baseline": {k: v.to_record() for k, v in sorted(baseline.items())},
        "threshold_rows": [
            {"t_mc": r["t_mc"], "t_rc": r["t_rc"],
             "methods": {k: v.to_record() for k, v in sorted(r["methods"].items())}}
            for r in threshold_rows
        ],
        "weight_rows": [
            {"w1": r["w1"], "w2": r["w2"], "hybrid": r["hybrid"].to_record()}
            for r in weight_rows
        ],
    }
    _write_json(sweep_dir / "sweep.json", payload)

    header = "t_mc   t_rc  " + "".join(
        f" | {name:>9} E_abs {name:>9} Pre {name:>9} Cov" for name in method_names)
    lines = [header]
    cells = "".join(
        f" | {_fmt(baseline[n].e_abs_ms, 15)} {_fmt(baseline[n].pre_pct, 13)} "
        f"{_fmt(baseline[n].coverage_pct, 13)}" for n in config.detectors)
    cells += f" | {_fmt(None, 15)} {_fmt(None, 13)} {_fmt(None, 13)}"
    lines.append("   --     --" + cells)
    for r in threshold_rows:
        cells = "".join(
            f" | {_fmt(r['methods'][n].e_abs_ms, 15)} {_fmt(r['methods'][n].pre_pct, 13)} "
            f"{_fmt(r['methods'][n].coverage_pct, 13)}" for n in method_names)
        lines.append(f"{r['t_mc']:5.2f}  {r['t_rc']:5.2f}" + cells)
    _write_text(sweep_dir / "thresholds.txt", "\n".join(lines) + "\n")

    csv_lines = ["t_mc,t_rc," + ",".join(
        f"{n}_e_abs_ms,{n}_pre_pct,{n}_coverage_pct" for n in method_names)]
    for r in threshold_rows:
        row = [f"{r['t_mc']}", f"{r['t_rc']}"]
        for n in method_names:
            rep = r["methods"][n]
            row.extend([bcgio.format_float(rep.e_abs_ms) if rep.n_bcg else "",
                        bcgio.format_float(rep.pre_pct) if rep.n_bcg else "",
                        bcgio.format_float(rep.coverage_pct)])
        csv_lines.append(",".join(row))
    _write_text(sweep_dir / "thresholds.csv", "\n".join(csv_lines) + "\n")

    w_lines = ["w1:w2    E_abs(ms)   Pre(%)   Cov(%)"]
    for r in weight_rows:
        rep = r["hybrid"]
        e, p, c = _report_cells(rep)
        w_lines.append(f"{r['w1']:g}:{r['w2']:g}".ljust(8)
                       + f" {_fmt(e)} {_fmt(p, 8)} {_fmt(c, 8)}")
    e_vals = [r["hybrid"].e_abs_ms for r in weight_rows if r["hybrid"].n_bcg]
    p_vals = [r["hybrid"].pre_pct for r in weight_rows if r["hybrid"].n_bcg]
    c_vals = [r["hybrid"].coverage_pct for r in weight_rows]
    if e_vals:
        w_lines.append("Mean".ljust(8) + f" {_fmt(float(np.mean(e_vals)))} "
                       f"{_fmt(float(np.mean(p_vals)), 8)} {_fmt(float(np.mean(c_vals)), 8)}")
        w_lines.append("Std".ljust(8) + f" {_fmt(float(np.std(e_vals)))} "
                       f"{_fmt(float(np.std(p_vals)), 8)} {_fmt(float(np.std(c_vals)), 8)}")
    _write_text(sweep_dir / "weights.txt", "\n".join(w_lines) + "\n")

    wcsv = ["w1,w2,e_abs_ms,pre_pct,coverage_pct"]
    for r in weight_rows:
        rep = r["hybrid"]
        wcsv.append(",".join([
            bcgio.format_float(r["w1"]), bcgio.format_float(r["w2"]),
            bcgio.format_float(rep.e_abs_ms) if rep.n_bcg else "",
            bcgio.format_float(rep.pre_pct) if rep.n_bcg else "",
            bcgio.format_float(rep.coverage_pct),
        ]))
    _write_text(sweep_dir / "weights.csv", "\n".join(wcsv) + "\n")

    return {"baseline": baseline, "threshold_rows": threshold_rows,
            "weight_rows": weight_rows}


def run_report(config: PipelineConfig, recordings=None, detections=None) -> dict:
    """Stratified tables, per-epoch index traces and error histograms.

    Consumes whatever results exist; an empty corpus yields an empty report
    with a warning instead of an error.
    """
    report_dir = Path(config.out_dir) / "report"
    try:
        if recordings is None:
            recordings = load_corpus(config)
    except InvalidInputError:
        recordings = []
    if not recordings:
        _write_text(report_dir / "report.txt", "empty report: no results available\n")
        return {"empty": True}

    if detections is None:
        detections = detect_corpus(config, recordings)
    recordings = sorted(recordings, key=lambda r: r.label)
    filtered = {rec.label: preprocess(config, rec.trace) for rec in recordings}
    all_metrics = {
        rec.label: recording_metrics(config, rec, detections[rec.label])
        for rec in recordings
    }
    thr = config.thresholds
    thr_ms = config.precision_threshold_ms
    method_names = list(config.detectors) + ["hybrid"]

    # recording-level HRV split on ground-truth intervals
    rec_rmssd = {
        rec.label: rmssd(intervals_of(rec.ground_truth)) for rec in recordings
    }
    split = (config.hrv_split_ms if config.hrv_split_ms is not None
             else float(np.median(sorted(rec_rmssd.values()))))
    hrv_class = {label: ("low" if value <= split else "high")
                 for label, value in rec_rmssd.items()}

    # per-epoch signal quality on ground-truth beats of the filtered trace
    quality = {}
    for rec in recordings:
        levels = []
        for ep in segment_epochs(filtered[rec.label], rec.ground_truth, thr.epoch_ms):
            levels.append(quality_level(ep, config.quality_a_threshold,
                                        config.quality_b_threshold))
        quality[rec.label] = levels

    # reported spans + pair lists per method
    cells = {}  # (hrv, level, method) -> dict(pairs=[], reported=0.0, total=0.0)

    def cell(key):
        if key not in cells:
            cells[key] = {"errors": [], "reported": 0.0, "total": 0.0}
        return cells[key]

    f_trace_rows = {}
    hist_errors = {name: [] for name in method_names}

    for rec in recordings:
        spans = epoch_spans(rec.trace, thr.epoch_ms)
        hybrid, outcomes = fuse_scored(filtered[rec.label], all_metrics[rec.label],
                                       detections[rec.label], thr, config.priority)
        reported_by_method = {}
        annotations = {}
        for detector in config.detectors:
            ann = detections[rec.label][detector]
            reported_by_method[detector] = {
                k for k, (s, e) in enumerate(spans) if len(ann.within(s, e)) >= 3
            }
            annotations[detector] = ann
        reported_by_method["hybrid"] = {
            k for k, o in enumerate(outcomes) if o.chosen is not None
        }
        annotations["hybrid"] = hybrid

        for name in method_names:
            reported = reported_by_method[name]
            gaps = [span for k, span in enumerate(spans) if k not in reported]
            for k, (s, e) in enumerate(spans):
                stratum = (hrv_class[rec.label], quality[rec.label][k])
                c = cell(stratum + (name,))
                c["total"] += e - s
                if k in reported:
                    c["reported"] += e - s
            for k, err in _assign_pairs_to_epochs(rec.ground_truth, annotations[name],
                                                  gaps, spans):
                stratum = (hrv_class[rec.label], quality[rec.label][k])
                cell(stratum + (name,))["errors"].append(err)
                hist_errors[name].append(err)

        # per-epoch comprehensive-index traces
        rows = []
        for k, o in enumerate(outcomes):
            row = {"epoch_start_ms": o.start_ms}
            for c in o.candidates:
                row[f"f_{c.detector}"] = c.f if math.isfinite(c.f) else None
            row["chosen"] = o.chosen
            rows.append(row)
        f_trace_rows[rec.label] = rows

    # write F traces
    for label in sorted(f_trace_rows):
        names = sorted(config.detectors)
        lines = ["epoch_start_ms," + ",".join(f"f_{n}" for n in names) + ",chosen"]
        for row in f_trace_rows[label]:
            vals = [bcgio.format_float(row["epoch_start_ms"])]
            for n in names:
                v = row.get(f"f_{n}")
                vals.append(bcgio.format_float(v) if v is not None else "")
            vals.append(row["chosen"] or "")
            lines.append(",".join(vals))
        _write_text(report_dir / f"f_trace.{label}.csv", "\n".join(lines) + "\n")

    # error histogram (5 ms bins up to 100 ms, plus overflow)
    edges = list(np.arange(0.0, 100.0 + 1e-9, 5.0)) + [math.inf]
    hist_lines = ["bin_lo_ms,bin_hi_ms," + ",".join(method_names)]
    for lo, hi in zip(edges[:-1], edges[1:]):
        counts = []
        for name in method_names:
            errs = hist_errors[name]
            counts.append(str(sum(1 for v in errs if lo <= v < hi)))
        hi_txt = "inf" if math.isinf(hi) else bcgio.format_float(hi)
        hist_lines.append(f"{bcgio.format_float(lo)},{hi_txt}," + ",".join(counts))
    _write_text(report_dir / "error_hist.csv", "\n".join(hist_lines) + "\n")

    # stratified table
    strata_payload = {}
    for hrv in ("low", "high"):
        for level in ("A", "B", "C"):
            for name in method_names:
                c = cells.get((hrv, level, name))
                if c is None:
                    continue
                errs = np.asarray(c["errors"], dtype=float)
                strata_payload[f"{hrv}.{level}.{name}"] = {
                    "e_abs_ms": float(np.mean(errs)) if len(errs) else None,
                    "pre_pct": (100.0 * float(np.mean(errs <= thr_ms))
                                if len(errs) else None),
                    "coverage_pct": (100.0 * c["reported"] / c["total"]
                                     if c["total"] else None),
                    "n_pairs": int(len(errs)),
                }
    _write_json(report_dir / "stratified.json",
                {"hrv_split_ms": split,
                 "recording_rmssd_ms": {k: rec_rmssd[k] for k in sorted(rec_rmssd)},
                 "cells": {k: strata_payload[k] for k in sorted(strata_payload)}})

    lines = []
    for hrv in ("low", "high"):
        lines.append(f"{hrv.upper()} HRV" + " " * 4
                     + "E_abs A/B/C (ms)      Pre A/B/C (%)      Cov A/B/C (%)")
        for name in method_names:
            parts = [f"  {name:<10}"]
            for metric in ("e_abs_ms", "pre_pct", "coverage_pct"):
                for level in ("A", "B", "C"):
                    entry = strata_payload.get(f"{hrv}.{level}.{name}")
                    v = entry[metric] if entry else None
                    parts.append(_fmt(v, 7))
                parts.append(" ")
            lines.append("".join(parts))
        lines.append("")
    _write_text(report_dir / "stratified.txt", "\n".join(lines) + "\n")

    return {"strata": strata_payload, "hrv_split_ms": split, "empty": False}


def _assign_pairs_to_epochs(reference: BeatAnnotation, detected: BeatAnnotation,
                            gaps, spans):
    """(epoch_index, abs_error_ms) per interval pair, binned by ref midpoint.

    Pair values alone do not locate an interval in time, so this walks both
    sequences with the same matching rule as ``pair_intervals``.
    """
    ref = reference.peak_times_ms
    det = detected.peak_times_ms
    if len(ref) < 2 or len(det) < 2:
        return []
    window = 0.5 * float(np.median(np.diff(ref)))
    claimed = {}
    matches = []
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
    out = []
    for (i0, r0), (i1, r1) in zip(matches, matches[1:]):
        if r1 != r0 + 1:
            continue
        lo, hi = ref[r0], ref[r1]
        if any(lo < e and hi > s for s, e in gaps):
            continue
        mid = (lo + hi) / 2.0
        epoch_idx = None
        for idx, (s, e) in enumerate(spans):
            if s <= mid < e or (idx == len(spans) - 1 and mid == e):
                epoch_idx = idx
                break
        if epoch_idx is not None:
            out.append((epoch_idx, abs((hi - lo) - (det[i1] - det[i0]))))
    return out
