"""bcgkit: heartbeat detection for ballistocardiogram signals.

Template-matching and envelope detectors, per-epoch confidence analysis
(morphological and rhythmic indices), confidence-ranked hybrid fusion,
evaluation metrics, and a reproducible synthetic-recording substrate.
"""

from .confidence import (
    ConfidenceScore,
    Epoch,
    Thresholds,
    comprehensive_index,
    hr_gate,
    morphological_confidence,
    rhythmic_confidence,
    score_epoch,
    segment_epochs,
)
from .core import (
    BeatAnnotation,
    IntervalSeries,
    SignalTrace,
    bandpass_filter,
    intervals_of,
    resample,
)
from .envelope import envelope_detect
from .fusion import FusionOutcome, fuse_epoch, fuse_recording
from .metrics import (
    EvalReport,
    coverage,
    e_abs,
    evaluate,
    pair_intervals,
    precision,
    quality_level,
    rmssd,
)
from .synth import (
    CorruptionSpec,
    SubjectProfile,
    generate_corpus,
    generate_recording,
)
from .tm import (
    ArtifactMask,
    Template,
    TmConfig,
    build_template,
    detect_artifacts,
    dtw_distance,
    estimate_period_ms,
    fuse_passes,
    initial_detect,
    match_detect,
    tm_detect,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactMask",
    "BeatAnnotation",
    "ConfidenceScore",
    "CorruptionSpec",
    "Epoch",
    "EvalReport",
    "FusionOutcome",
    "IntervalSeries",
    "SignalTrace",
    "SubjectProfile",
    "Template",
    "Thresholds",
    "TmConfig",
    "bandpass_filter",
    "build_template",
    "comprehensive_index",
    "coverage",
    "detect_artifacts",
    "dtw_distance",
    "e_abs",
    "envelope_detect",
    "estimate_period_ms",
    "evaluate",
    "fuse_epoch",
    "fuse_passes",
    "fuse_recording",
    "generate_corpus",
    "generate_recording",
    "hr_gate",
    "initial_detect",
    "intervals_of",
    "match_detect",
    "morphological_confidence",
    "pair_intervals",
    "precision",
    "quality_level",
    "resample",
    "rhythmic_confidence",
    "rmssd",
    "score_epoch",
    "segment_epochs",
    "tm_detect",
]
