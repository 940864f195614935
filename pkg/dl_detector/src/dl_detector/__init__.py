"""Learned J-peak detector for BCG signals.

UNet-BiLSTM per-sample labeller trained on synthetic corpora, speaking the
same signal CSV / annotation JSON protocol as the template-matching toolkit.
"""

from .infer import infer, probabilities_to_peaks, window_probabilities
from .labels import make_labels
from .model import BeatLabeller, ModelSpec, load_artifact, save_artifact
from .train import TrainSpec, TrainingFailure, train

__version__ = "0.1.0"

__all__ = [
    "BeatLabeller",
    "ModelSpec",
    "TrainSpec",
    "TrainingFailure",
    "infer",
    "load_artifact",
    "make_labels",
    "probabilities_to_peaks",
    "save_artifact",
    "train",
    "window_probabilities",
]
