"""Training: BCE on per-sample complex membership, Adam, stepped LR decay.

The corpus is split into train/validation by recording, never by window.
The learning rate follows lr(e) = initial * decay^floor(e / decay_every);
early stopping restores the best-validation weights.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .io import read_annotation, read_signal
from .labels import DEFAULT_HALFWIDTH_MS, make_labels
from .model import BeatLabeller, ModelSpec, save_artifact
from .preprocess import prepare


class TrainingFailure(RuntimeError):
    """Validation loss diverged (NaN)."""


@dataclass(frozen=True)
class TrainSpec:
    batch_size: int = 32
    epochs: int = 30
    initial_lr: float = 0.001
    lr_decay: float = 0.8
    lr_decay_every: int = 5
    early_stopping_patience: int = 6
    val_recordings: int = 2
    label_halfwidth_ms: float = DEFAULT_HALFWIDTH_MS

    def lr_at(self, epoch: int) -> float:
        """Scheduled learning rate for a 0-indexed epoch."""
        return self.initial_lr * self.lr_decay ** (epoch // self.lr_decay_every)


def load_windows(corpus_dir, input_len: int, halfwidth_ms: float):
    """Non-overlapping (window, label) pairs grouped per recording."""
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"corpus manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if not manifest:
        raise ValueError("corpus is empty")

    per_recording = []
    for entry in manifest:
        signal = prepare(read_signal(corpus_dir / entry["signal_path"]))
        times, _, _ = read_annotation(corpus_dir / entry["annotation_path"])
        labels = make_labels(signal, times, halfwidth_ms)
        windows = []
        for start in range(0, len(signal.samples) - input_len + 1, input_len):
            windows.append((signal.samples[start:start + input_len],
                            labels[start:start + input_len]))
        per_recording.append((entry["label"], windows))
    return per_recording


def _stack(windows):
    x = torch.tensor(np.stack([w for w, _ in windows]), dtype=torch.float32)
    y = torch.tensor(np.stack([l for _, l in windows]), dtype=torch.float32)
    return x, y


def train(corpus_dir, out_dir, model_spec: ModelSpec = ModelSpec(),
          train_spec: TrainSpec = TrainSpec(), seed: int = 0,
          log=print) -> dict:
    """Train on a corpus directory and save the model artifact.

    Returns the training history (per-epoch lr and losses).
    """
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    per_recording = load_windows(corpus_dir, model_spec.input_len,
                                 train_spec.label_halfwidth_ms)
    if len(per_recording) <= train_spec.val_recordings:
        raise ValueError("need more recordings than the validation split size")
    train_part = per_recording[:-train_spec.val_recordings]
    val_part = per_recording[-train_spec.val_recordings:]
    train_windows = [w for _, windows in train_part for w in windows]
    val_windows = [w for _, windows in val_part for w in windows]
    if not train_windows or not val_windows:
        raise ValueError("corpus recordings are too short for one model window")

    x_val, y_val = _stack(val_windows)
    model = BeatLabeller(model_spec)
    criterion = nn.BCEWithLogitsLoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=train_spec.initial_lr)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda epoch: train_spec.lr_decay ** (epoch // train_spec.lr_decay_every))

    history = []
    best_val = float("inf")
    best_state = None
    stale = 0
    for epoch in range(train_spec.epochs):
        lr = optimizer.param_groups[0]["lr"]
        model.train()
        order = rng.permutation(len(train_windows))
        batch_losses = []
        for start in range(0, len(order), train_spec.batch_size):
            batch = [train_windows[i] for i in order[start:start + train_spec.batch_size]]
            x, y = _stack(batch)
            optimizer.zero_grad()
            loss = criterion(model(x), y)
            loss.backward()
            optimizer.step()
            batch_losses.append(float(loss.item()))

        model.eval()
        with torch.no_grad():
            val_loss = float(criterion(model(x_val), y_val).item())
        if not np.isfinite(val_loss):
            raise TrainingFailure(f"validation loss diverged at epoch {epoch}")

        history.append({"epoch": epoch, "lr": lr,
                        "train_bce": float(np.mean(batch_losses)),
                        "val_bce": val_loss})
        log(f"epoch {epoch:2d} lr={lr:.6f} train={history[-1]['train_bce']:.4f} "
            f"val={val_loss:.4f}")
        if val_loss < best_val - 1e-5:
            best_val = val_loss
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= train_spec.early_stopping_patience:
                log(f"early stop at epoch {epoch} (no improvement for {stale} epochs)")
                break
        scheduler.step()

    if best_state is not None:
        model.load_state_dict(best_state)
    run_meta = {
        "seed": seed,
        "train_spec": asdict(train_spec),
        "train_recordings": [label for label, _ in train_part],
        "val_recordings": [label for label, _ in val_part],
        "best_val_bce": best_val,
        "history": history,
    }
    save_artifact(out_dir, model, run_meta)
    return run_meta
