"""
Non-ocular channels: emotion, posture and background noise.

Each window score is a unit value in [0, 1], or None when the window holds
no usable observation for the channel.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from config import LEFT_HIP, LEFT_SHOULDER, RIGHT_HIP, RIGHT_SHOULDER, Config
from errors import ModelError, NumericError
from models import EMOTION_ORDER, EmotionLabel, PoseFrame
from windowing import clamp_unit

logger = logging.getLogger(__name__)


# Emotion

def emotion_score(label: EmotionLabel, cfg: Config) -> float:
    return cfg.emotion_score_table[label]


def emotion_window_score(labels: Iterable[EmotionLabel], cfg: Config) -> Optional[float]:
    """Mean emotion score of the labels seen in a window."""
    scores = [emotion_score(label, cfg) for label in labels]
    if not scores:
        return None
    return math.fsum(scores) / len(scores)


@dataclass(frozen=True)
class LinearEmotionModel:
    """
    Linear classifier over facial feature vectors.

    scores = weights @ features + bias, one row per label in EMOTION_ORDER.
    """
    weights: np.ndarray  # (7, d)
    bias: np.ndarray  # (7,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2 or w.shape[0] != len(EMOTION_ORDER):
            raise ModelError(f"weights must have shape (7, d), got {w.shape}")
        if b.shape != (len(EMOTION_ORDER),):
            raise ModelError(f"bias must have shape (7,), got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelError("model parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.dimension,
            "labels": [label.value for label in EMOTION_ORDER],
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }


def load_emotion_model(path: Union[str, Path]) -> LinearEmotionModel:
    """
    Load a linear emotion model from JSON.

    The document holds "weights" (7 rows of d floats) and "bias" (7 floats),
    rows ordered angry, disgust, fear, happy, sad, surprise, neutral.
    Optional "feature_dim" and "labels" are checked against the weights.
    """
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelError(f"emotion model {path} is not valid JSON: {e}") from e

    if not isinstance(data, dict) or "weights" not in data or "bias" not in data:
        raise ModelError(f"emotion model {path} needs 'weights' and 'bias'")
    labels = data.get("labels")
    if labels is not None and labels != [label.value for label in EMOTION_ORDER]:
        raise ModelError(f"emotion model {path} has unexpected label order {labels}")

    try:
        model = LinearEmotionModel(
            weights=np.asarray(data["weights"], dtype=float),
            bias=np.asarray(data["bias"], dtype=float),
        )
    except (TypeError, ValueError) as e:
        raise ModelError(f"emotion model {path}: {e}") from e

    declared = data.get("feature_dim")
    if declared is not None and declared != model.dimension:
        raise ModelError(
            f"emotion model {path} declares feature_dim={declared} but weights have {model.dimension} columns"
        )

    logger.info(f"Loaded emotion model from {path} (d={model.dimension})")
    return model


def classify_emotion(features: Sequence[float], model: LinearEmotionModel) -> EmotionLabel:
    """Arg-max label; ties go to the label listed first."""
    x = np.asarray(features, dtype=float)
    if x.shape != (model.dimension,):
        raise ModelError(f"feature vector has {x.size} values, model expects {model.dimension}")
    scores = model.weights @ x + model.bias
    return EMOTION_ORDER[int(np.argmax(scores))]


# Posture

def posture_displacements(frames: np.ndarray, cfg: Config) -> np.ndarray:
    """
    Torso-normalised mean keypoint displacement between consecutive frames.

    Args:
        frames: Array of shape (N, 17, 3), (x, y, confidence) per keypoint
        cfg: Pipeline configuration

    Returns:
        Array of N-1 values; entry i compares frame i+1 with frame i and is
        NaN when too few keypoints are confident in both or no torso scale
        is measurable in frame i+1.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.shape[0] < 2:
        return np.empty(0)
    prev, cur = frames[:-1], frames[1:]
    min_conf = cfg.posture.min_confidence

    valid = (prev[..., 2] >= min_conf) & (cur[..., 2] >= min_conf)
    step = np.hypot(cur[..., 0] - prev[..., 0], cur[..., 1] - prev[..., 1])
    count = valid.sum(axis=1)
    total = np.where(valid, step, 0.0).sum(axis=1)

    scale = _torso_scale_batch(cur, min_conf)
    usable = (count >= cfg.posture.min_keypoints) & (scale > 0)
    out = np.full(count.shape, np.nan)
    np.divide(total, count * scale, out=out, where=usable)
    return out


def _torso_scale_batch(frames: np.ndarray, min_conf: float) -> np.ndarray:
    conf = frames[..., 2] >= min_conf

    def span(a: int, b: int) -> np.ndarray:
        return np.hypot(frames[:, a, 0] - frames[:, b, 0], frames[:, a, 1] - frames[:, b, 1])

    shoulders = conf[:, LEFT_SHOULDER] & conf[:, RIGHT_SHOULDER]
    left_side = conf[:, LEFT_SHOULDER] & conf[:, LEFT_HIP]
    right_side = conf[:, RIGHT_SHOULDER] & conf[:, RIGHT_HIP]
    return np.select(
        [shoulders, left_side, right_side],
        [span(LEFT_SHOULDER, RIGHT_SHOULDER), span(LEFT_SHOULDER, LEFT_HIP), span(RIGHT_SHOULDER, RIGHT_HIP)],
        default=np.nan,
    )


def torso_scale(frame: PoseFrame, cfg: Config) -> Optional[float]:
    """Shoulder width, falling back to a same-side shoulder-hip length."""
    value = _torso_scale_batch(frame.as_array()[np.newaxis], cfg.posture.min_confidence)[0]
    if math.isnan(value):
        return None
    return float(value)


def posture_displacement(prev: PoseFrame, cur: PoseFrame, cfg: Config) -> Optional[float]:
    """Displacement of cur relative to prev in torso units, or None if not measurable."""
    value = posture_displacements(np.stack([prev.as_array(), cur.as_array()]), cfg)[0]
    if math.isnan(value):
        return None
    return float(value)


def posture_window_score(displacements: Sequence[float], cfg: Config) -> Optional[float]:
    """1 - mean(d)/d_max, clamped to [0, 1]."""
    if len(displacements) == 0:
        return None
    mean = math.fsum(displacements) / len(displacements)
    return clamp_unit(1.0 - mean / cfg.posture.d_max)


# Noise

@dataclass(frozen=True)
class NoiseWindow:
    """Sound-level samples (dB SPL) in one window."""
    samples: tuple


def noise_score(window: Union[NoiseWindow, Sequence[float]], cfg: Config) -> Optional[float]:
    """
    Score the mean sound level of a window.

    1.0 at or below the quiet level, falling linearly to 0.5 at the loud
    level, and 0.5 * loud / m above it.
    """
    samples = window.samples if isinstance(window, NoiseWindow) else window
    if len(samples) == 0:
        return None
    if not all(math.isfinite(s) for s in samples):
        raise NumericError("noise sample is not finite")

    m = math.fsum(samples) / len(samples)
    quiet, loud = cfg.noise.quiet_db, cfg.noise.loud_db
    if m <= quiet:
        return 1.0
    if m <= loud:
        return 1.0 - 0.5 * (m - quiet) / (loud - quiet)
    return 0.5 * loud / m
