"""
Synthetic session generator.

Turns a declarative scenario script (blink bursts, eye closures, gaze-away
spans, emotion spans, fidgeting, noise, identity gaps) into a session log
whose feature streams realize those behaviors, plus observed records that
carry the attention the script implies.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import Config
from context_signals import emotion_window_score, noise_score, posture_window_score
from errors import ScenarioError
from fusion import fuse
from models import (
    SCORING_CHANNELS,
    AudioPayload,
    ChannelId,
    ChannelScore,
    EmotionLabel,
    EmotionPayload,
    FeatureRecord,
    IdentityPayload,
    LandmarksPayload,
    ObservedPayload,
    Point2D,
    PosePayload,
    PupilsPayload,
    RecordKind,
    Session,
)
from ocular import blink_rate_score
from windowing import window_bounds, window_index

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1

# Eye geometry
OPEN_EAR = 0.30
CLOSED_EAR = 0.05
EYE_WIDTH = 30.0
LEFT_EYE_CENTER = (290.0, 220.0)
RIGHT_EYE_CENTER = (350.0, 220.0)

BLINK_SECONDS = 0.15
BLINK_CLEARANCE = 0.5  # no scheduled blink this close to a scripted closure
GAZE_AWAY_RATIO = 0.1

# Noise levels of the generated streams
LANDMARK_JITTER = 0.15  # px
PUPIL_JITTER = 0.03  # fraction of eye width
POSE_JITTER = 0.3  # px
DB_JITTER = 1.0

# 17-point pose template (x, y, confidence); knees and ankles are under the desk
POSE_TEMPLATE = np.array([
    [320, 200, 0.95],  # nose
    [305, 188, 0.9], [335, 188, 0.9],  # eyes
    [290, 195, 0.8], [350, 195, 0.8],  # ears
    [270, 320, 0.9], [370, 320, 0.9],  # shoulders
    [250, 400, 0.8], [390, 400, 0.8],  # elbows
    [280, 460, 0.7], [360, 460, 0.7],  # wrists
    [285, 450, 0.6], [355, 450, 0.6],  # hips
    [285, 560, 0.1], [355, 560, 0.1],  # knees
    [285, 660, 0.05], [355, 660, 0.05],  # ankles
], dtype=float)
SHOULDER_WIDTH = 100.0


class _Script(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class Baseline(_Script):
    """Behavior outside every span."""
    bpm: float = Field(12.0, ge=0)
    emotion: EmotionLabel = EmotionLabel.NEUTRAL
    db: float = Field(45.0, ge=0)


class BlinkBurst(_Script):
    type: Literal["blink_burst"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)
    bpm: float = Field(ge=0)


class Closure(_Script):
    type: Literal["closure"]
    start: float = Field(ge=0)
    duration: float = Field(gt=0)

    @property
    def end(self) -> float:
        return self.start + self.duration


class GazeAway(_Script):
    type: Literal["gaze_away"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)


class EmotionSpan(_Script):
    type: Literal["emotion"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)
    label: EmotionLabel


class Fidget(_Script):
    """Whole-body sway; displacement is per frame, in torso units."""
    type: Literal["fidget"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)
    displacement: float = Field(ge=0, le=5)


class NoiseSpan(_Script):
    type: Literal["noise"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)
    db: float = Field(ge=0, le=194)


class IdentityGap(_Script):
    """No identity verifications (student out of frame)."""
    type: Literal["identity_gap"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)


class Impostor(_Script):
    """Identity verifications return another subject (proxy attendance)."""
    type: Literal["impostor"]
    start: float = Field(ge=0)
    end: float = Field(ge=0)
    subject: str = Field(min_length=1)


Span = Annotated[
    Union[BlinkBurst, Closure, GazeAway, EmotionSpan, Fidget, NoiseSpan, IdentityGap, Impostor],
    Field(discriminator="type"),
]


class ScenarioScript(_Script):
    subject: str = Field("student-01", min_length=1)
    duration_s: float = Field(gt=0)
    fps: float = Field(30.0, gt=0, le=120)
    baseline: Baseline = Field(default_factory=Baseline)
    identity_every_s: float = Field(5.0, gt=0)
    observer_noise: float = Field(0.0, ge=0)  # std-dev of noise added to observed att
    spans: List[Span] = Field(default_factory=list)

    def spans_of(self, kind: type) -> list:
        return [s for s in self.spans if isinstance(s, kind)]


def validate_scenario(script: ScenarioScript) -> ScenarioScript:
    """Check span placement; raises ScenarioError naming the span."""
    for i, span in enumerate(script.spans):
        if span.end <= span.start:
            raise ScenarioError(f"{span.type} span ends at {span.end} before it starts at {span.start}", i)
        if span.end > script.duration_s:
            raise ScenarioError(
                f"{span.type} span ends at {span.end}, after the session ends at {script.duration_s}", i
            )
    return script


def parse_scenario(data: dict) -> ScenarioScript:
    try:
        script = ScenarioScript.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = list(first["loc"])
        span_index = None
        if len(loc) >= 2 and loc[0] == "spans" and isinstance(loc[1], int):
            span_index = loc[1]
            loc = loc[3:] if len(loc) > 2 else []
        where = ".".join(str(part) for part in loc)
        reason = f"{where}: {first['msg']}" if where else first["msg"]
        raise ScenarioError(reason, span_index) from e
    return validate_scenario(script)


def load_scenario(path: Union[str, Path]) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"scenario {path} is not valid JSON: {e}") from e
    return parse_scenario(data)


# Behavior plan

@dataclass
class _Plan:
    times: np.ndarray  # frame timestamps
    closed: np.ndarray  # eyes closed per frame
    away: np.ndarray  # looking away per frame
    labels: List[EmotionLabel]
    db: np.ndarray  # nominal sound level per frame
    sway: np.ndarray  # horizontal body offset per frame (px)


def frame_times(script: ScenarioScript) -> np.ndarray:
    count = int(math.ceil(script.duration_s * script.fps))
    times = np.round(np.arange(count) / script.fps, 4)
    return times[times < script.duration_s]


def blink_starts(script: ScenarioScript) -> List[float]:
    """Scheduled blink onsets: regular at each segment's rate, clear of scripted closures."""
    bursts = script.spans_of(BlinkBurst)
    closures = [(c.start, c.end) for c in script.spans_of(Closure)]
    starts: List[float] = []

    for burst in bursts:
        if burst.bpm > 0:
            step = 60.0 / burst.bpm
            j = 0
            while burst.start + (j + 0.5) * step < burst.end:
                starts.append(burst.start + (j + 0.5) * step)
                j += 1

    if script.baseline.bpm > 0:
        step = 60.0 / script.baseline.bpm
        j = 0
        while (j + 0.5) * step < script.duration_s:
            t = (j + 0.5) * step
            if not any(b.start <= t < b.end for b in bursts):
                starts.append(t)
            j += 1

    last_frame = script.duration_s - 2.0 / script.fps
    kept = [
        t for t in starts
        if t + BLINK_SECONDS < last_frame
        and not any(t - BLINK_CLEARANCE < end and t + BLINK_SECONDS + BLINK_CLEARANCE > start for start, end in closures)
    ]
    return sorted(kept)


def _in_spans(times: np.ndarray, spans) -> np.ndarray:
    mask = np.zeros(times.shape, dtype=bool)
    for span in spans:
        mask |= (times >= span.start) & (times < span.end)
    return mask


def plan_behavior(script: ScenarioScript) -> _Plan:
    times = frame_times(script)
    closed = _in_spans(times, script.spans_of(Closure))
    for t in blink_starts(script):
        closed |= (times >= t) & (times < t + BLINK_SECONDS)

    labels = [script.baseline.emotion] * len(times)
    for span in script.spans_of(EmotionSpan):
        for i in np.flatnonzero((times >= span.start) & (times < span.end)):
            labels[i] = span.label

    db = np.full(times.shape, script.baseline.db)
    for span in script.spans_of(NoiseSpan):
        db[(times >= span.start) & (times < span.end)] = span.db

    sway = np.zeros(times.shape)
    for span in script.spans_of(Fidget):
        idx = np.flatnonzero((times >= span.start) & (times < span.end))
        amplitude = span.displacement * SHOULDER_WIDTH / 2
        sway[idx] = np.where(idx % 2 == 0, amplitude, -amplitude)

    return _Plan(
        times=times,
        closed=closed,
        away=_in_spans(times, script.spans_of(GazeAway)),
        labels=labels,
        db=db,
        sway=sway,
    )


# Ground truth

def scripted_truth(script: ScenarioScript, config: Optional[Config] = None) -> Dict[int, float]:
    """
    Attention per window implied by the script.

    Channel scores are computed from the planned behavior (before sensor
    jitter) with the same scoring rules the engine applies.
    """
    cfg = config or Config()
    plan = plan_behavior(script)
    times = plan.times
    if times.size == 0:
        return {}
    windows = np.array([window_index(t, cfg.window) for t in times])

    blinks: Dict[int, int] = {}
    drowsy: List[Tuple[float, float]] = []
    i = 0
    n = times.size
    while i < n:
        if not plan.closed[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and plan.closed[j + 1]:
            j += 1
        start = times[i]
        if j + 1 < n:
            reopen = times[j + 1]
            if reopen - start > cfg.drowsiness_seconds:
                drowsy.append((start, reopen))
            else:
                k = window_index(reopen, cfg.window)
                blinks[k] = blinks.get(k, 0) + 1
        elif times[j] - start > cfg.drowsiness_seconds:
            drowsy.append((start, times[j]))
        i = j + 1

    levels = np.zeros(n)
    levels[1:] = np.abs(np.diff(plan.sway)) / SHOULDER_WIDTH

    truth: Dict[int, float] = {}
    for k in np.unique(windows):
        k = int(k)
        idx = np.flatnonzero(windows == k)
        a, b = window_bounds(k, cfg.window)
        scores = {}
        if any(s < b and e > a for s, e in drowsy):
            scores[ChannelId.BLINK] = 0.0
        else:
            scores[ChannelId.BLINK] = blink_rate_score(blinks.get(k, 0), cfg)
        visible = idx[~plan.closed[idx]]
        if visible.size:
            scores[ChannelId.GAZE] = float(np.count_nonzero(~plan.away[visible])) / visible.size
        scores[ChannelId.EMOTION] = emotion_window_score([plan.labels[i] for i in idx], cfg)
        pairs = idx[idx > 0]
        posture = posture_window_score(levels[pairs].tolist(), cfg)
        if posture is not None:
            scores[ChannelId.POSTURE] = posture
        scores[ChannelId.NOISE] = noise_score(plan.db[idx].tolist(), cfg)
        point = fuse(
            [ChannelScore(k, ch, scores[ch]) for ch in SCORING_CHANNELS if ch in scores],
            cfg.fixed_n,
        )
        truth[k] = point.att
    return truth


# Sensor streams

def _face_template() -> np.ndarray:
    """Rough 68-point frontal face; only the eye points matter for scoring."""
    pts = np.zeros((68, 2))
    jaw = np.linspace(-math.pi * 0.45, math.pi * 0.45, 17)
    pts[0:17] = np.c_[320 + 90 * np.sin(jaw), 240 + 80 * np.cos(jaw)]
    pts[17:22] = np.c_[np.linspace(265, 305, 5), np.full(5, 200.0)]
    pts[22:27] = np.c_[np.linspace(335, 375, 5), np.full(5, 200.0)]
    pts[27:31] = np.c_[np.full(4, 320.0), np.linspace(225, 265, 4)]
    pts[31:36] = np.c_[np.linspace(305, 335, 5), np.full(5, 272.0)]
    mouth = np.linspace(0, 2 * math.pi, 20, endpoint=False)
    pts[48:68] = np.c_[320 + 28 * np.cos(mouth), 300 + 10 * np.sin(mouth)]
    return pts


def eye_points(center: Tuple[float, float], ear_values: np.ndarray, width: float = EYE_WIDTH) -> np.ndarray:
    """
    Six eye points per frame with the requested EAR.

    Returns:
        Array of shape (N, 6, 2) in p1..p6 order
    """
    cx, cy = center
    h = ear_values * width / 2  # half lid opening: EAR = 2*(2h) / (2*width)
    n = ear_values.size
    out = np.empty((n, 6, 2))
    out[:, 0] = (cx - width / 2, cy)
    out[:, 1, 0], out[:, 1, 1] = cx - width / 6, cy - h
    out[:, 2, 0], out[:, 2, 1] = cx + width / 6, cy - h
    out[:, 3] = (cx + width / 2, cy)
    out[:, 4, 0], out[:, 4, 1] = cx + width / 6, cy + h
    out[:, 5, 0], out[:, 5, 1] = cx - width / 6, cy + h
    return out


def _pairs(arr: np.ndarray) -> tuple:
    return tuple(tuple(row) for row in arr.tolist())


def synthesize(script: ScenarioScript, seed: int, config: Optional[Config] = None) -> Session:
    """
    Generate a session log realizing a scenario.

    Args:
        script: Validated scenario
        seed: 64-bit seed; the same (script, seed) always yields the same session
        config: Scoring configuration used for the observed ground truth

    Returns:
        Session with records in (t, kind) order
    """
    if not 0 <= seed <= MAX_SEED:
        raise ScenarioError(f"seed must be a 64-bit unsigned integer, got {seed}")
    cfg = config or Config()
    rng = np.random.default_rng(seed)
    plan = plan_behavior(script)
    times = plan.times
    n = times.size

    ears = np.where(plan.closed, CLOSED_EAR, OPEN_EAR)
    faces = np.broadcast_to(_face_template(), (n, 68, 2)).copy()
    faces[:, 36:42] = eye_points(LEFT_EYE_CENTER, ears)
    faces[:, 42:48] = eye_points(RIGHT_EYE_CENTER, ears)
    faces = np.round(faces + rng.normal(0.0, LANDMARK_JITTER, faces.shape), 2)

    ratio = np.where(plan.away, GAZE_AWAY_RATIO, 0.5) + rng.normal(0.0, PUPIL_JITTER, n)
    pupil_left = LEFT_EYE_CENTER[0] - EYE_WIDTH / 2 + ratio * EYE_WIDTH
    pupil_right = RIGHT_EYE_CENTER[0] - EYE_WIDTH / 2 + ratio * EYE_WIDTH

    poses = np.broadcast_to(POSE_TEMPLATE, (n, 17, 3)).copy()
    poses[:, :, 0] += plan.sway[:, np.newaxis]
    poses[:, :, :2] += rng.normal(0.0, POSE_JITTER, (n, 17, 2))
    poses[:, :, :2] = np.round(poses[:, :, :2], 2)

    db = np.round(np.clip(plan.db + rng.normal(0.0, DB_JITTER, n), 0.0, None), 2)

    records: List[FeatureRecord] = []
    for i in range(n):
        t = float(times[i])
        records.append(FeatureRecord(t, RecordKind.LANDMARKS, LandmarksPayload(_pairs(faces[i]))))
        if plan.closed[i]:
            pupils = PupilsPayload(None, None)
        else:
            y = LEFT_EYE_CENTER[1]
            pupils = PupilsPayload(
                Point2D(round(float(pupil_left[i]), 2), y),
                Point2D(round(float(pupil_right[i]), 2), y),
            )
        records.append(FeatureRecord(t, RecordKind.PUPILS, pupils))
        records.append(FeatureRecord(t, RecordKind.POSE, PosePayload(_pairs(poses[i]))))
        records.append(FeatureRecord(t, RecordKind.EMOTION, EmotionPayload(label=plan.labels[i])))
        records.append(FeatureRecord(t, RecordKind.AUDIO, AudioPayload(float(db[i]))))

    gaps = script.spans_of(IdentityGap)
    impostors = script.spans_of(Impostor)
    j = 0
    while j * script.identity_every_s < script.duration_s:
        t = round(j * script.identity_every_s, 4)
        j += 1
        if any(g.start <= t < g.end for g in gaps):
            continue
        subject = next((s.subject for s in impostors if s.start <= t < s.end), script.subject)
        records.append(FeatureRecord(t, RecordKind.IDENTITY, IdentityPayload(subject, True)))

    truth = scripted_truth(script, cfg)
    for k, att in truth.items():
        start, end = window_bounds(k, cfg.window)
        t = round((start + min(end, script.duration_s)) / 2, 4)
        if script.observer_noise > 0:
            att = float(np.clip(att + rng.normal(0.0, script.observer_noise), 0.0, 100.0))
        records.append(FeatureRecord(t, RecordKind.OBSERVED, ObservedPayload(round(att, 6))))

    records.sort(key=lambda r: (r.t, r.kind.value))
    logger.info(f"Synthesized {len(records)} records over {script.duration_s}s for {script.subject}")
    return Session(subject=script.subject, duration_s=script.duration_s, records=tuple(records))
