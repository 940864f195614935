"""Pipeline configuration: flat key=value text with section prefixes."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .confidence import Thresholds
from .errors import InvalidParameterError
from .tm import TmConfig

DEFAULT_SWEEP_T_MC = (0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90)
DEFAULT_SWEEP_T_RC = (0.40, 0.35, 0.30, 0.25, 0.20, 0.15, 0.10, 0.05)
DEFAULT_SWEEP_WEIGHTS = ((3, 1), (2, 1), (1, 1), (1, 2), (1, 3), (1, 4), (1, 5))


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: Path = Path("corpus")
    out_dir: Path = Path("out")
    filter_low_hz: float = 1.0
    filter_high_hz: float = 10.0
    filter_order: int = 3
    thresholds: Thresholds = field(default_factory=Thresholds)
    tm: TmConfig = field(default_factory=TmConfig)
    detectors: tuple = ("tm", "alternate")
    priority: tuple = ("tm", "dl", "alternate")
    workers: int = 1
    sweep_t_mc: tuple = DEFAULT_SWEEP_T_MC
    sweep_t_rc: tuple = DEFAULT_SWEEP_T_RC
    sweep_weights: tuple = DEFAULT_SWEEP_WEIGHTS
    quality_a_threshold: float = 0.85
    quality_b_threshold: float = 0.60
    hrv_split_ms: float | None = None
    precision_threshold_ms: float = 30.0
    dl_command: str | None = None
    dl_model: str | None = None


_KNOWN_DETECTORS = ("tm", "alternate", "dl")


def _parse_floats(value: str) -> tuple:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _parse_weights(value: str) -> tuple:
    pairs = []
    for token in value.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            w1, w2 = token.split(":")
            pairs.append((float(w1), float(w2)))
        except ValueError as exc:
            raise InvalidParameterError(f"bad weight pair {token!r}, expected w1:w2") from exc
    return tuple(pairs)


def parse_config(text: str, base_dir: Path | None = None) -> PipelineConfig:
    """Parse key=value configuration text into a PipelineConfig.

    Relative paths resolve against ``base_dir`` (usually the config file's
    directory).  Unknown keys are rejected so typos fail loudly.
    """
    base_dir = Path(base_dir) if base_dir is not None else Path(".")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidParameterError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in values:
            raise InvalidParameterError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value

    cfg = PipelineConfig()
    thr_kwargs: dict[str, float] = {}
    tm_kwargs: dict[str, float] = {}
    updates: dict[str, object] = {}

    tm_fields = {f.name: f.type for f in fields(TmConfig)}
    thr_fields = {f.name: f.type for f in fields(Thresholds)}

    for key, value in values.items():
        try:
            if key == "paths.corpus_dir":
                updates["corpus_dir"] = (base_dir / value).resolve()
            elif key == "paths.out_dir":
                updates["out_dir"] = (base_dir / value).resolve()
            elif key == "filter.low_hz":
                updates["filter_low_hz"] = float(value)
            elif key == "filter.high_hz":
                updates["filter_high_hz"] = float(value)
            elif key == "filter.order":
                updates["filter_order"] = int(value)
            elif key.startswith("thresholds."):
                name = key.split(".", 1)[1]
                if name not in thr_fields:
                    raise InvalidParameterError(f"unknown threshold field {name!r}")
                thr_kwargs[name] = float(value)
            elif key.startswith("tm."):
                name = key.split(".", 1)[1]
                if name not in tm_fields:
                    raise InvalidParameterError(f"unknown tm field {name!r}")
                caster = int if name in ("refine_max_iter", "max_candidates") else float
                tm_kwargs[name] = caster(value)
            elif key == "detectors":
                names = tuple(v.strip() for v in value.split(",") if v.strip())
                for name in names:
                    if name not in _KNOWN_DETECTORS:
                        raise InvalidParameterError(f"unknown detector {name!r}")
                updates["detectors"] = names
            elif key == "priority":
                updates["priority"] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "workers":
                updates["workers"] = max(int(value), 1)
            elif key == "sweep.t_mc":
                updates["sweep_t_mc"] = _parse_floats(value)
            elif key == "sweep.t_rc":
                updates["sweep_t_rc"] = _parse_floats(value)
            elif key == "sweep.weights":
                updates["sweep_weights"] = _parse_weights(value)
            elif key == "quality.a_threshold":
                updates["quality_a_threshold"] = float(value)
            elif key == "quality.b_threshold":
                updates["quality_b_threshold"] = float(value)
            elif key == "quality.hrv_split_ms":
                updates["hrv_split_ms"] = float(value) if value else None
            elif key == "eval.precision_threshold_ms":
                updates["precision_threshold_ms"] = float(value)
            elif key == "dl.command":
                updates["dl_command"] = value or None
            elif key == "dl.model":
                updates["dl_model"] = value or None
            else:
                raise InvalidParameterError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise InvalidParameterError(f"bad value for {key}: {value!r}") from exc

    if thr_kwargs:
        updates["thresholds"] = replace(Thresholds(), **thr_kwargs)
    if tm_kwargs:
        updates["tm"] = replace(TmConfig(), **tm_kwargs)
    return replace(cfg, **updates)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
