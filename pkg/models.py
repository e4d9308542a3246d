"""
Data models for the attention scoring pipeline.

Defines the immutable value types shared by every stage: feature records
and their payloads, eye observations, per-window channel scores, fused
attention points, alerts and the attendance ledger.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np


class ChannelId(str, Enum):
    """Signal channels. Only the first five take part in fusion."""
    BLINK = "blink"
    GAZE = "gaze"
    EMOTION = "emotion"
    POSTURE = "posture"
    NOISE = "noise"
    IDENTITY = "identity"


SCORING_CHANNELS: Tuple[ChannelId, ...] = (
    ChannelId.BLINK,
    ChannelId.GAZE,
    ChannelId.EMOTION,
    ChannelId.POSTURE,
    ChannelId.NOISE,
)


class RecordKind(str, Enum):
    """Kinds of lines in a session log."""
    LANDMARKS = "landmarks"
    PUPILS = "pupils"
    POSE = "pose"
    EMOTION = "emotion"
    AUDIO = "audio"
    IDENTITY = "identity"
    OBSERVED = "observed"


class EmotionLabel(str, Enum):
    """Emotion classes, in the order used for argmax tie-breaking."""
    ANGRY = "angry"
    DISGUST = "disgust"
    FEAR = "fear"
    HAPPY = "happy"
    SAD = "sad"
    SURPRISE = "surprise"
    NEUTRAL = "neutral"


EMOTION_ORDER: Tuple[EmotionLabel, ...] = tuple(EmotionLabel)


class EyeState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class GazeDirection(str, Enum):
    SCREEN = "screen"
    AWAY = "away"
    UNKNOWN = "unknown"


class AlertKind(str, Enum):
    DROWSINESS = "drowsiness"


@dataclass(frozen=True, slots=True)
class Point2D:
    """Pixel coordinates."""
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class EyeObservation:
    """
    Six eye keypoints.

    p1 is the outer corner, p4 the inner corner, p2/p3 the upper lid and
    p6/p5 the lower lid.
    """
    p1: Point2D
    p2: Point2D
    p3: Point2D
    p4: Point2D
    p5: Point2D
    p6: Point2D

    @classmethod
    def from_points(cls, points) -> "EyeObservation":
        """Build from a sequence of six (x, y) pairs in p1..p6 order."""
        pts = [Point2D(float(x), float(y)) for x, y in points]
        if len(pts) != 6:
            raise ValueError(f"an eye needs 6 points, got {len(pts)}")
        return cls(*pts)

    def as_array(self) -> np.ndarray:
        return np.array(
            [[p.x, p.y] for p in (self.p1, self.p2, self.p3, self.p4, self.p5, self.p6)],
            dtype=float,
        )


# Record payloads, one per RecordKind.

@dataclass(frozen=True, slots=True)
class LandmarksPayload:
    points: Tuple[Tuple[float, float], ...]  # 68 (x, y) pairs


@dataclass(frozen=True, slots=True)
class PupilsPayload:
    left: Optional[Point2D] = None
    right: Optional[Point2D] = None


@dataclass(frozen=True, slots=True)
class PosePayload:
    keypoints: Tuple[Tuple[float, float, float], ...]  # 17 (x, y, confidence)


@dataclass(frozen=True, slots=True)
class EmotionPayload:
    label: Optional[EmotionLabel] = None
    features: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True, slots=True)
class AudioPayload:
    db: float


@dataclass(frozen=True, slots=True)
class IdentityPayload:
    subject: str
    verified: bool


@dataclass(frozen=True, slots=True)
class ObservedPayload:
    att: float


Payload = Union[
    LandmarksPayload,
    PupilsPayload,
    PosePayload,
    EmotionPayload,
    AudioPayload,
    IdentityPayload,
    ObservedPayload,
]


@dataclass(frozen=True, slots=True)
class FeatureRecord:
    """One timestamped observation on one channel."""
    t: float
    kind: RecordKind
    payload: Payload


@dataclass(frozen=True)
class SessionHeader:
    subject: str
    duration_s: float
    format: str = "attnpipe/1"


@dataclass(frozen=True)
class Session:
    """A parsed session log: header metadata plus time-ordered records."""
    subject: str
    duration_s: float
    records: Tuple[FeatureRecord, ...] = ()

    @property
    def header(self) -> SessionHeader:
        return SessionHeader(subject=self.subject, duration_s=self.duration_s)


@dataclass(frozen=True, slots=True)
class PoseFrame:
    """17 pose keypoints with confidences at one timestamp."""
    t: float
    keypoints: Tuple[Tuple[float, float, float], ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.keypoints, dtype=float).reshape(17, 3)


@dataclass(frozen=True, slots=True)
class ChannelScore:
    """Unit score produced by one scoring channel for one window."""
    window: int
    channel: ChannelId
    score: float


@dataclass(frozen=True, slots=True)
class ChannelReport:
    """A channel's verdict for a window: a score, or None when unavailable."""
    window: int
    channel: ChannelId
    score: Optional[float]


# Ocular tracker events.

@dataclass(frozen=True, slots=True)
class BlinkCompleted:
    t: float
    window: int
    duration: float


@dataclass(frozen=True, slots=True)
class DrowsinessOnset:
    t: float
    closed_since: float
    duration: float


@dataclass(frozen=True, slots=True)
class DrowsinessEnded:
    t: float
    closed_since: float
    duration: float


@dataclass(frozen=True, slots=True)
class AlertEvent:
    """
    Drowsiness alarm.

    t is the start of the closed-eye run; detected_at is when the run crossed
    the drowsiness threshold. final is False for the live onset alarm and True
    once the run has ended and duration is known.
    """
    t: float
    duration: float
    detected_at: float
    kind: AlertKind = AlertKind.DROWSINESS
    final: bool = False
    ended_at: Optional[float] = None  # reopen time, set on final alerts


@dataclass(frozen=True, slots=True)
class IdentityWarning:
    """Identity event for a subject other than the session's (possible proxy)."""
    t: float
    subject: str
    expected: str


@dataclass(frozen=True)
class AttentionPoint:
    """Fused attention score for one window."""
    window: int
    att: float
    contributions: Dict[ChannelId, float]
    n: int
    partial: bool = False
    start: float = 0.0
    end: float = 0.0


@dataclass(frozen=True)
class AttendanceLedger:
    subject: str
    verified_intervals: Tuple[Tuple[float, float], ...]
    coverage: float
    present: bool


@dataclass
class Timeline:
    """Everything a scoring run produces."""
    points: list = field(default_factory=list)
    alerts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    attendance: Optional[AttendanceLedger] = None
