"""Closed-set identification with covariance models and opinion fusion."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, SpeakerSetMismatchError, TooFewFramesError
from .features import CovarianceModel, covariance_model, mfcc, sphericity_distance
from .signal import Signal, bandlimit_telephone, frame_and_window, preemphasize

GEOMETRIC_FLOOR = 1e-300


@dataclass
class PipelineConfig:
    preemphasis: float = 0.95
    bandlimit: bool = False
    frame_ms: float = 30.0
    overlap: float = 2.0 / 3.0
    n_mel: int = 20
    l: int = 12
    centered: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)


def extract_features(x: Signal, cfg: PipelineConfig) -> np.ndarray:
    if cfg.bandlimit:
        x = bandlimit_telephone(x)
        fmin, fmax = 300.0, 3400.0
    else:
        fmin, fmax = 0.0, None
    x = preemphasize(x, cfg.preemphasis)
    frames = frame_and_window(x, cfg.frame_ms, cfg.overlap)
    if len(frames) < cfg.l:
        raise TooFewFramesError(f"signal gives {len(frames)} frames, need at least {cfg.l}")
    return mfcc(frames, cfg.n_mel, cfg.l, fmin=fmin, fmax=fmax)


def signal_model(x: Signal, cfg: PipelineConfig) -> CovarianceModel:
    return covariance_model(extract_features(x, cfg), centered=cfg.centered)


@dataclass
class SpeakerModelSet:
    models: dict
    l: int
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if len(self.models) < 2:
            raise ConfigError("a speaker model set needs at least 2 speakers")
        if any(m.l != self.l for m in self.models.values()):
            raise ConfigError("all speaker models must share the feature dimension")

    def to_json(self) -> str:
        return json.dumps({
            "l": self.l,
            "pipeline": self.pipeline.to_dict(),
            "speakers": {k: m.to_dict() for k, m in sorted(self.models.items())},
        })

    @classmethod
    def from_json(cls, text: str) -> "SpeakerModelSet":
        d = json.loads(text)
        models = {k: CovarianceModel.from_dict(v) for k, v in d["speakers"].items()}
        return cls(models, int(d["l"]), PipelineConfig.from_dict(d.get("pipeline", {})))


def enroll(training: Mapping[str, Signal], cfg: PipelineConfig | None = None) -> SpeakerModelSet:
    cfg = cfg or PipelineConfig()
    models = {}
    for sid in sorted(training):
        try:
            models[sid] = signal_model(training[sid], cfg)
        except (TooFewFramesError, ValueError) as exc:
            raise type(exc)(f"speaker {sid!r}: {exc}") from exc
    return SpeakerModelSet(models, cfg.l, cfg)


def decide(distances: Mapping[str, float]) -> str:
    """Smallest distance; ties go to the lexicographically smallest id."""
    return min(distances, key=lambda sid: (distances[sid], sid))


def identify(test: Signal, models: SpeakerModelSet) -> tuple[str, dict]:
    c = signal_model(test, models.pipeline)
    distances = {sid: sphericity_distance(c, m) for sid, m in sorted(models.models.items())}
    return decide(distances), distances


def distances_to_opinions(distances: Mapping[str, float], temperature: float = 1.0) -> dict:
    """Softmin of the distances: scores ``∝ exp(-d / temperature)`` summing to one."""
    if not distances:
        raise ConfigError("no distances to convert")
    if not temperature > 0:
        raise ConfigError("temperature must be positive")
    ids = sorted(distances)
    d = np.array([distances[i] for i in ids], dtype=np.float64)
    z = np.exp(-(d - d.min()) / temperature)
    z /= z.sum()
    return dict(zip(ids, z.tolist()))


def fuse(opinions: Sequence[Mapping[str, float]], rule: str = "arithmetic", weights=None) -> dict:
    """Combine opinion vectors with the ``arithmetic``, ``geometric`` or ``weighted`` mean."""
    if not opinions:
        raise ConfigError("nothing to fuse")
    ids = sorted(opinions[0])
    if any(sorted(o) != ids for o in opinions[1:]):
        raise SpeakerSetMismatchError("opinion vectors cover different speaker sets")
    if len(opinions) == 1:
        return dict(opinions[0])
    s = np.array([[o[i] for i in ids] for o in opinions], dtype=np.float64)
    if rule == "arithmetic":
        fused = s.mean(axis=0)
    elif rule == "geometric":
        fused = np.exp(np.log(np.maximum(s, GEOMETRIC_FLOOR)).mean(axis=0))
    elif rule == "weighted":
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(opinions),) or np.any(w < 0) or not w.sum() > 0:
            raise ConfigError("weights must be nonnegative, one per opinion, with positive sum")
        fused = w @ s / w.sum()
    else:
        raise ConfigError(f"unknown fusion rule {rule!r}")
    fused = fused / fused.sum()
    return dict(zip(ids, fused.tolist()))


def identification_rate(decisions: Sequence, truth: Sequence) -> float:
    if len(decisions) != len(truth):
        raise ConfigError(f"{len(decisions)} decisions but {len(truth)} labels")
    if not truth:
        raise ConfigError("identification rate of an empty test set")
    correct = sum(d == t for d, t in zip(decisions, truth))
    return 100.0 * correct / len(truth)
