"""
Configuration for the attention scoring pipeline.

Module-level constants hold the default thresholds; the Config model
bundles them into one validated, read-only record that can be loaded
from a JSON document and snapshotted into reports.
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from errors import ConfigError
from models import EmotionLabel

logger = logging.getLogger(__name__)

# Ocular thresholds
EAR_THRESHOLD = 0.2  # averaged EAR below this means eyes closed
DROWSINESS_SECONDS = 2.0  # closure longer than this is drowsiness, not a blink

# Windowing
WINDOW_LENGTH_SECONDS = 5.0
WINDOW_ORIGIN = 0.0
WATERMARK_SKEW_SECONDS = 1.0  # allowed timestamp disorder in a session log

# Blink-rate anchors (blinks per minute)
BPM_FOCUS = 4.5  # deep visual focus
BPM_NORM_LOW = 8.0
BPM_NORM_HIGH = 21.0  # upper end of the normal resting range
BPM_LOW_ATTENTION = 32.5  # low concentration
NORMAL_RANGE_FLOOR = 0.7  # blink score at the top of the normal range

# Gaze: pupil position as a fraction of the eye's horizontal extent
GAZE_CENTER_LOW = 0.35
GAZE_CENTER_HIGH = 0.65

# Emotion valence scores
EMOTION_SCORES: Dict[EmotionLabel, float] = {
    EmotionLabel.HAPPY: 1.0,
    EmotionLabel.NEUTRAL: 0.9,
    EmotionLabel.SURPRISE: 0.8,
    EmotionLabel.SAD: 0.3,
    EmotionLabel.FEAR: 0.2,
    EmotionLabel.ANGRY: 0.2,
    EmotionLabel.DISGUST: 0.1,
}

# Posture
POSTURE_D_MAX = 0.5  # torso-normalised displacement that scores 0
POSTURE_MIN_CONFIDENCE = 0.3
POSTURE_MIN_KEYPOINTS = 5

# Background noise (dB SPL)
QUIET_DB = 50.0  # typical school
LOUD_DB = 75.0  # loud-noise threshold

# Attendance
ATTENDANCE_COVERAGE = 0.75

# 68-point landmark layout
LEFT_EYE_INDICES = (36, 37, 38, 39, 40, 41)
RIGHT_EYE_INDICES = (42, 43, 44, 45, 46, 47)

# 17-point pose layout
LEFT_SHOULDER, RIGHT_SHOULDER = 5, 6
LEFT_HIP, RIGHT_HIP = 11, 12

SESSION_FORMAT = "attnpipe/1"
CONFIG_ENV_VAR = "ATTNPIPE_CONFIG"


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class WindowSpec(_Section):
    """Tumbling windows [origin + k*length, origin + (k+1)*length)."""
    length: float = Field(WINDOW_LENGTH_SECONDS, gt=0)
    origin: float = Field(WINDOW_ORIGIN, ge=0)


class BlinkAnchors(_Section):
    bpm_focus: float = Field(BPM_FOCUS, ge=0)
    bpm_norm_low: float = BPM_NORM_LOW
    bpm_norm_high: float = BPM_NORM_HIGH
    bpm_low_attention: float = BPM_LOW_ATTENTION
    normal_floor: float = Field(NORMAL_RANGE_FLOOR, ge=0, le=1)

    @model_validator(mode="after")
    def _strictly_increasing(self) -> "BlinkAnchors":
        anchors = (self.bpm_focus, self.bpm_norm_low, self.bpm_norm_high, self.bpm_low_attention)
        if any(a >= b for a, b in zip(anchors, anchors[1:])):
            raise ValueError(f"blink anchors must be strictly increasing, got {anchors}")
        return self


class GazeBand(_Section):
    low: float = GAZE_CENTER_LOW
    high: float = GAZE_CENTER_HIGH

    @model_validator(mode="after")
    def _ordered(self) -> "GazeBand":
        if not 0 < self.low < self.high < 1:
            raise ValueError(f"gaze band needs 0 < low < high < 1, got ({self.low}, {self.high})")
        return self


class PostureConfig(_Section):
    d_max: float = Field(POSTURE_D_MAX, gt=0)
    min_confidence: float = Field(POSTURE_MIN_CONFIDENCE, ge=0, le=1)
    min_keypoints: int = Field(POSTURE_MIN_KEYPOINTS, ge=1, le=17)


class NoiseConfig(_Section):
    quiet_db: float = QUIET_DB
    loud_db: float = Field(LOUD_DB, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "NoiseConfig":
        if self.quiet_db >= self.loud_db:
            raise ValueError(f"quiet_db must be below loud_db, got {self.quiet_db} >= {self.loud_db}")
        return self


class Config(_Section):
    """All pipeline tunables. Read-only once loaded."""
    ear_threshold: float = Field(EAR_THRESHOLD, gt=0, lt=1)
    drowsiness_seconds: float = Field(DROWSINESS_SECONDS, gt=0)
    window: WindowSpec = Field(default_factory=WindowSpec)
    blink_anchors: BlinkAnchors = Field(default_factory=BlinkAnchors)
    gaze_center_band: GazeBand = Field(default_factory=GazeBand)
    emotion_score_table: Dict[EmotionLabel, float] = Field(
        default_factory=lambda: dict(EMOTION_SCORES)
    )
    posture: PostureConfig = Field(default_factory=PostureConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    watermark_skew: float = Field(WATERMARK_SKEW_SECONDS, ge=0)
    attendance_coverage: float = Field(ATTENDANCE_COVERAGE, ge=0, le=1)
    # None averages over available channels; 5 divides by five with missing channels as 0
    fixed_n: Optional[int] = None
    emotion_model_path: Optional[str] = None

    @field_validator("emotion_score_table", mode="before")
    @classmethod
    def _merge_table(cls, value):
        if not isinstance(value, dict):
            return value
        merged = {label.value: score for label, score in EMOTION_SCORES.items()}
        for key, score in value.items():
            merged[key.value if isinstance(key, EmotionLabel) else key] = score
        return merged

    @field_validator("emotion_score_table")
    @classmethod
    def _unit_scores(cls, value: Dict[EmotionLabel, float]) -> Dict[EmotionLabel, float]:
        for label, score in value.items():
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"emotion score for {label.value} must be in [0, 1], got {score}")
        return value

    @field_validator("fixed_n")
    @classmethod
    def _fixed_n(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value != 5:
            raise ValueError(f"fixed_n may only be 5, got {value}")
        return value

    def snapshot(self) -> dict:
        """JSON-ready dict that validates back into an equal Config."""
        return self.model_dump(mode="json")


def load_config(path: Optional[Union[str, Path]] = None) -> Config:
    """
    Load configuration.

    Args:
        path: JSON document to read. Falls back to $ATTNPIPE_CONFIG, then
            to built-in defaults.

    Returns:
        Validated Config
    """
    path = path or os.getenv(CONFIG_ENV_VAR)
    if not path:
        return Config()

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e

    try:
        config = Config.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"invalid config {path}: {where}: {first['msg']}") from e

    logger.info(f"Loaded config from {path}")
    return config


def config_from_snapshot(snapshot: dict) -> Config:
    """Rebuild the Config recorded in a report."""
    try:
        return Config.model_validate(snapshot)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"invalid config snapshot: {where}: {first['msg']}") from e
