"""UNet-BiLSTM per-sample beat labeller.

A five-level 1-D UNet (channel widths 32..512, kernel length 17, max-pool
downsampling by 2) with a two-layer bidirectional LSTM of hidden width 1024
inserted at the start of the expansive path, skip connections into the
decoder, and two kernel-1 convolutions producing per-sample logits.  Output
length equals input length.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn


@dataclass(frozen=True)
class ModelSpec:
    input_len: int = 1200
    channels: tuple = (32, 64, 128, 256, 512)
    kernel_len: int = 17
    lstm_hidden: int = 1024
    lstm_layers: int = 2
    dropout: float = 0.2

    def __post_init__(self):
        if self.input_len % 2 ** (len(self.channels) - 1) != 0:
            raise ValueError("input_len must be divisible by the total downsampling")
        if any(c <= 0 for c in self.channels):
            raise ValueError("channel widths must be positive")

    def to_json(self) -> str:
        payload = asdict(self)
        payload["channels"] = list(self.channels)
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        payload = json.loads(text)
        payload["channels"] = tuple(payload["channels"])
        return cls(**payload)


def _conv_block(in_ch: int, out_ch: int, kernel: int) -> nn.Sequential:
    pad = kernel // 2
    return nn.Sequential(
        nn.Conv1d(in_ch, out_ch, kernel, padding=pad),
        nn.ReLU(inplace=True),
        nn.BatchNorm1d(out_ch),
        nn.Conv1d(out_ch, out_ch, kernel, padding=pad),
        nn.ReLU(inplace=True),
        nn.BatchNorm1d(out_ch),
    )


class BeatLabeller(nn.Module):
    def __init__(self, spec: ModelSpec = ModelSpec()):
        super().__init__()
        self.spec = spec
        chans = spec.channels
        self.encoders = nn.ModuleList()
        in_ch = 1
        for ch in chans:
            self.encoders.append(_conv_block(in_ch, ch, spec.kernel_len))
            in_ch = ch
        self.pool = nn.MaxPool1d(2)

        self.lstm = nn.LSTM(chans[-1], spec.lstm_hidden, num_layers=spec.lstm_layers,
                            batch_first=True, bidirectional=True)
        self.lstm_dropout = nn.Dropout(spec.dropout)
        self.lstm_proj = nn.Conv1d(2 * spec.lstm_hidden, chans[-1], 1)

        self.upsamples = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for deep, shallow in zip(chans[::-1], chans[-2::-1]):
            self.upsamples.append(nn.ConvTranspose1d(deep, shallow, 2, stride=2))
            self.decoders.append(_conv_block(2 * shallow, shallow, spec.kernel_len))

        self.head = nn.Sequential(
            nn.Conv1d(chans[0], chans[0], 1),
            nn.ReLU(inplace=True),
            nn.Dropout(spec.dropout),
            nn.Conv1d(chans[0], 1, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(batch, input_len) or (batch, 1, input_len) -> per-sample logits."""
        if x.dim() == 2:
            x = x.unsqueeze(1)
        skips = []
        for i, encoder in enumerate(self.encoders):
            x = encoder(x)
            if i < len(self.encoders) - 1:
                skips.append(x)
                x = self.pool(x)

        seq, _ = self.lstm(x.transpose(1, 2))
        x = self.lstm_proj(self.lstm_dropout(seq).transpose(1, 2))

        for upsample, decoder, skip in zip(self.upsamples, self.decoders, skips[::-1]):
            x = upsample(x)
            x = decoder(torch.cat([x, skip], dim=1))
        return self.head(x).squeeze(1)


def save_artifact(directory, model: BeatLabeller, extra: dict) -> None:
    """Model artifact: weights plus a JSON echo of the spec and run metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), directory / "weights.pt")
    (directory / "spec.json").write_text(model.spec.to_json(), encoding="utf-8")
    (directory / "run.json").write_text(json.dumps(extra, indent=2) + "\n",
                                        encoding="utf-8")


def load_artifact(directory) -> BeatLabeller:
    directory = Path(directory)
    spec_path = directory / "spec.json"
    weights_path = directory / "weights.pt"
    if not spec_path.exists() or not weights_path.exists():
        raise FileNotFoundError(f"not a model artifact directory: {directory}")
    spec = ModelSpec.from_json(spec_path.read_text(encoding="utf-8"))
    model = BeatLabeller(spec)
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise RuntimeError(f"weights do not match the spec in {directory}: {exc}") from exc
    model.eval()
    return model
