"""Built-in corpus specifications with pinned seeds.

These cover the regimes the toolkit is exercised against: a mixed-quality
sweep corpus spanning clean to artifact-laden recordings, a clean corpus
for detector accuracy checks, small train/holdout corpora for the external
learned detector, and a tiny demo corpus for end-to-end runs.
"""

from __future__ import annotations

_STANDARD_ROWS = [
    # label, duration_s, seed, morph, hr, rmssd, arrhythmia, snr_db, resp_hz, burst_rate, gain
    # SNR ladder spans clean to severely corrupted; ectopic rhythms only in
    # the low-SNR tail so both confidence axes track detection error.
    ("std01", 300, 101, 1, 62.0, 15.0, 0.00, 24.0, 0.25, 0.0, 1.0),
    ("std02", 300, 102, 2, 55.0, 20.0, 0.00, 21.0, 0.30, 0.0, 1.0),
    ("std03", 300, 103, 3, 71.0, 12.0, 0.00, 16.0, 0.22, 0.0, 1.0),
    ("std04", 300, 104, 4, 64.0, 18.0, 0.00, 12.0, 0.28, 0.0, 1.0),
    ("std05", 300, 105, 5, 58.0, 22.0, 0.00, 9.0, 0.33, 0.0, 1.0),
    ("std06", 300, 106, 6, 76.0, 15.0, 0.00, 6.0, 0.24, 0.0, 1.0),
    ("std07", 300, 107, 7, 66.0, 25.0, 0.00, 4.0, 0.27, 0.0, 1.0),
    ("std08", 300, 108, 8, 60.0, 20.0, 0.08, 2.0, 0.31, 0.4, 4.0),
    ("std09", 300, 109, 9, 68.0, 28.0, 0.12, 1.0, 0.26, 0.6, 5.0),
    ("std10", 300, 110, 10, 57.0, 18.0, 0.00, -3.0, 0.29, 0.8, 4.0),
]

_TM_CLEAN_ROWS = [
    ("cln01", 600, 201, 11, 60.0, 15.0),
    ("cln02", 600, 202, 12, 55.0, 20.0),
    ("cln03", 600, 203, 13, 72.0, 12.0),
    ("cln04", 600, 204, 14, 64.0, 18.0),
    ("cln05", 600, 205, 15, 58.0, 25.0),
    ("cln06", 600, 206, 16, 80.0, 14.0),
    ("cln07", 600, 207, 17, 66.0, 22.0),
    ("cln08", 600, 208, 18, 52.0, 16.0),
    ("cln09", 600, 209, 19, 75.0, 20.0),
    ("cln10", 600, 210, 20, 62.0, 18.0),
]

_DL_TRAIN_ROWS = [
    ("trn01", 120, 301, 31, 58.0, 18.0, 25.0),
    ("trn02", 120, 302, 32, 66.0, 22.0, 20.0),
    ("trn03", 120, 303, 33, 74.0, 15.0, 15.0),
    ("trn04", 120, 304, 34, 61.0, 25.0, 12.0),
    ("trn05", 120, 305, 35, 83.0, 14.0, 18.0),
    ("trn06", 120, 306, 36, 54.0, 20.0, 22.0),
]

_DL_HOLDOUT_ROWS = [
    ("hld01", 120, 401, 41, 63.0, 16.0, 22.0),
    ("hld02", 120, 402, 42, 57.0, 20.0, 20.0),
    ("hld03", 120, 403, 43, 71.0, 18.0, 24.0),
]

_DEMO_ROWS = [
    ("demo01", 60, 501, 51, 62.0, 15.0, 20.0),
    ("demo02", 60, 502, 52, 57.0, 22.0, 10.0),
    ("demo03", 60, 503, 53, 70.0, 18.0, 4.0),
]


def _block(label, duration_s, seed, morph, hr, rmssd, arrhythmia=0.0, snr="inf",
           resp=0.25, burst_rate=0.0, gain=1.0, sampling_hz=1000.0):
    return "\n".join([
        f"label={label}",
        f"duration_s={duration_s}",
        f"sampling_hz={sampling_hz}",
        f"seed={seed}",
        f"morphology_seed={morph}",
        f"base_hr_bpm={hr}",
        f"hrv_rmssd_target_ms={rmssd}",
        f"arrhythmia_rate={arrhythmia}",
        f"snr_db={snr}",
        f"respiration_hz={resp}",
        f"artifact_burst_rate={burst_rate}",
        f"artifact_gain={gain}",
    ])


def standard_spec() -> str:
    """Mixed-quality corpus: clean through artifact-laden, sinus and ectopic."""
    blocks = [
        _block(label, dur, seed, morph, hr, rmssd, arr, snr, resp, rate, gain)
        for label, dur, seed, morph, hr, rmssd, arr, snr, resp, rate, gain in _STANDARD_ROWS
    ]
    return "\n\n".join(blocks) + "\n"


def tm_clean_spec() -> str:
    """Clean 20 dB corpus used for detector accuracy checks."""
    blocks = [
        _block(label, dur, seed, morph, hr, rmssd, snr=20.0)
        for label, dur, seed, morph, hr, rmssd in _TM_CLEAN_ROWS
    ]
    return "\n\n".join(blocks) + "\n"


def dl_train_spec() -> str:
    blocks = [
        _block(label, dur, seed, morph, hr, rmssd, snr=snr)
        for label, dur, seed, morph, hr, rmssd, snr in _DL_TRAIN_ROWS
    ]
    return "\n\n".join(blocks) + "\n"


def dl_holdout_spec() -> str:
    blocks = [
        _block(label, dur, seed, morph, hr, rmssd, snr=snr)
        for label, dur, seed, morph, hr, rmssd, snr in _DL_HOLDOUT_ROWS
    ]
    return "\n\n".join(blocks) + "\n"


def demo_spec() -> str:
    blocks = [
        _block(label, dur, seed, morph, hr, rmssd, snr=snr)
        for label, dur, seed, morph, hr, rmssd, snr in _DEMO_ROWS
    ]
    return "\n\n".join(blocks) + "\n"


BUILTIN_SPECS = {
    "standard": standard_spec,
    "tm-clean": tm_clean_spec,
    "dl-train": dl_train_spec,
    "dl-holdout": dl_holdout_spec,
    "demo": demo_spec,
}
