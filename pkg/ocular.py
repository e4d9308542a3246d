"""
Eye-based signals: eye aspect ratio, blink/drowsiness tracking and gaze.

EAR = (|p2 - p6| + |p3 - p5|) / (2 |p1 - p4|), averaged over both eyes and
thresholded into Open/Closed. A closed run shorter than the drowsiness
limit is a blink, counted in the window of the reopen frame; a longer run
is drowsiness and is never counted as a blink.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import LEFT_EYE_INDICES, RIGHT_EYE_INDICES, Config
from errors import ContractViolationError, DegenerateEyeError, NoObservationError
from models import (
    BlinkCompleted,
    DrowsinessEnded,
    DrowsinessOnset,
    EyeObservation,
    EyeState,
    GazeDirection,
    Point2D,
)
from windowing import window_index

logger = logging.getLogger(__name__)


def extract_eyes(points: Sequence[Tuple[float, float]]) -> Tuple[EyeObservation, EyeObservation]:
    """Left and right EyeObservation from a 68-point landmark array."""
    left = EyeObservation.from_points([points[i] for i in LEFT_EYE_INDICES])
    right = EyeObservation.from_points([points[i] for i in RIGHT_EYE_INDICES])
    return left, right


def ear_batch(eyes: np.ndarray) -> np.ndarray:
    """
    EAR for a stack of eyes.

    Args:
        eyes: Array of shape (N, 6, 2) in p1..p6 order

    Returns:
        Array of shape (N,); NaN where p1 == p4
    """
    eyes = np.asarray(eyes, dtype=float)
    p1, p2, p3, p4, p5, p6 = (eyes[:, i, :] for i in range(6))
    vertical = np.hypot(*(p2 - p6).T) + np.hypot(*(p3 - p5).T)
    horizontal = np.hypot(*(p1 - p4).T)
    out = np.full(horizontal.shape, np.nan)
    np.divide(vertical, 2.0 * horizontal, out=out, where=horizontal > 0)
    return out


def ear(eye: EyeObservation) -> float:
    """Eye aspect ratio of one eye."""
    value = ear_batch(eye.as_array()[np.newaxis])[0]
    if math.isnan(value):
        raise DegenerateEyeError("eye corners p1 and p4 coincide")
    return float(value)


def mean_ear_batch(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Average EAR of the non-degenerate eyes per frame; NaN if both are degenerate."""
    l_ear = ear_batch(left)
    r_ear = ear_batch(right)
    l_ok = ~np.isnan(l_ear)
    r_ok = ~np.isnan(r_ear)
    total = np.where(l_ok, l_ear, 0.0) + np.where(r_ok, r_ear, 0.0)
    count = l_ok.astype(int) + r_ok.astype(int)
    out = np.full(total.shape, np.nan)
    np.divide(total, count, out=out, where=count > 0)
    return out


def state_for_ear(mean_ear: float, cfg: Config) -> EyeState:
    # equality counts as open
    return EyeState.CLOSED if mean_ear < cfg.ear_threshold else EyeState.OPEN


def eye_states(landmarks: np.ndarray, cfg: Config) -> List[Optional[EyeState]]:
    """
    Eye state for a stack of 68-point landmark frames.

    Args:
        landmarks: Array of shape (N, 68, 2)
        cfg: Pipeline configuration

    Returns:
        One EyeState per frame, or None where both eyes are degenerate
    """
    arr = np.asarray(landmarks, dtype=float)
    left = arr[:, list(LEFT_EYE_INDICES)]
    right = arr[:, list(RIGHT_EYE_INDICES)]
    return [
        None if math.isnan(mean) else state_for_ear(float(mean), cfg)
        for mean in mean_ear_batch(left, right)
    ]


def eye_state(left: EyeObservation, right: EyeObservation, cfg: Config) -> EyeState:
    """Open/Closed from the averaged EAR of the usable eyes."""
    mean = mean_ear_batch(left.as_array()[np.newaxis], right.as_array()[np.newaxis])[0]
    if math.isnan(mean):
        raise NoObservationError("both eyes are degenerate")
    return state_for_ear(float(mean), cfg)


class BlinkTracker:
    """
    Single-owner blink and drowsiness state machine.

    Feed (t, EyeState) in nondecreasing t. Not safe for concurrent use.
    """

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.current = EyeState.OPEN
        self.closed_since: Optional[float] = None
        self.blinks_by_window: Dict[int, int] = {}
        self.drowsy_alerted = False
        self.drowsy_runs: List[Tuple[float, float]] = []
        self.last_t: Optional[float] = None

    def feed(self, t: float, state: EyeState) -> list:
        """
        Advance the tracker by one frame.

        Returns:
            Events produced by this frame (BlinkCompleted, DrowsinessOnset,
            DrowsinessEnded)
        """
        if self.last_t is not None and t < self.last_t:
            raise ContractViolationError(f"time went backwards: {t} after {self.last_t}")
        self.last_t = t
        events: list = []
        limit = self.cfg.drowsiness_seconds

        if state == EyeState.CLOSED:
            if self.current == EyeState.OPEN:
                self.current = EyeState.CLOSED
                self.closed_since = t
                self.drowsy_alerted = False
            elif not self.drowsy_alerted and t - self.closed_since > limit:
                self.drowsy_alerted = True
                events.append(DrowsinessOnset(t=t, closed_since=self.closed_since, duration=t - self.closed_since))
            return events

        if self.current == EyeState.CLOSED:
            since = self.closed_since
            duration = t - since
            if self.drowsy_alerted:
                events.append(DrowsinessEnded(t=t, closed_since=since, duration=duration))
                self.drowsy_runs.append((since, t))
            elif duration > limit:
                # reopened past the limit with no closed frame in between
                events.append(DrowsinessOnset(t=t, closed_since=since, duration=duration))
                events.append(DrowsinessEnded(t=t, closed_since=since, duration=duration))
                self.drowsy_runs.append((since, t))
            else:
                window = window_index(t, self.cfg.window)
                self.blinks_by_window[window] = self.blinks_by_window.get(window, 0) + 1
                events.append(BlinkCompleted(t=t, window=window, duration=duration))
            self.current = EyeState.OPEN
            self.closed_since = None
            self.drowsy_alerted = False
        return events

    def finish(self) -> list:
        """Close the tracker at end of stream. A pending non-drowsy run stays uncounted."""
        events: list = []
        if self.current == EyeState.CLOSED and self.drowsy_alerted:
            since = self.closed_since
            events.append(DrowsinessEnded(t=self.last_t, closed_since=since, duration=self.last_t - since))
            self.drowsy_runs.append((since, self.last_t))
            self.current = EyeState.OPEN
            self.closed_since = None
            self.drowsy_alerted = False
        return events

    @property
    def undecided_since(self) -> Optional[float]:
        """Start of an open closed-run that may still turn into drowsiness."""
        if self.current == EyeState.CLOSED and not self.drowsy_alerted:
            return self.closed_since
        return None

    def drowsy_overlaps(self, start: float, end: float) -> bool:
        """Whether any drowsy run (finished or ongoing) intersects [start, end)."""
        if self.current == EyeState.CLOSED and self.drowsy_alerted and self.closed_since < end:
            return True
        return any(s < end and e > start for s, e in self.drowsy_runs)


def blink_rate_score(blinks_in_window: int, cfg: Config) -> float:
    """
    Map a window's blink count to a unit score.

    Piecewise linear in blinks per minute: 1.0 up to the focus anchor, down
    to the normal-range floor at the top of the normal range, down to 0.0 at
    the low-attention anchor, 0.0 beyond.
    """
    bpm = blinks_in_window * (60.0 / cfg.window.length)
    a = cfg.blink_anchors
    if bpm <= a.bpm_focus:
        return 1.0
    if bpm <= a.bpm_norm_high:
        return 1.0 - (1.0 - a.normal_floor) * (bpm - a.bpm_focus) / (a.bpm_norm_high - a.bpm_focus)
    if bpm <= a.bpm_low_attention:
        return a.normal_floor * (a.bpm_low_attention - bpm) / (a.bpm_low_attention - a.bpm_norm_high)
    return 0.0


def classify_pupil(x_outer: float, x_inner: float, pupil_x: float, cfg: Config) -> GazeDirection:
    """Screen/Away from the pupil's horizontal position between the eye corners."""
    width = abs(x_inner - x_outer)
    if not width > 0:
        return GazeDirection.UNKNOWN
    r = (pupil_x - min(x_outer, x_inner)) / width
    band = cfg.gaze_center_band
    return GazeDirection.SCREEN if band.low <= r <= band.high else GazeDirection.AWAY


def gaze_direction(eye: EyeObservation, pupil: Optional[Point2D], cfg: Config) -> GazeDirection:
    if pupil is None:
        return GazeDirection.UNKNOWN
    return classify_pupil(eye.p1.x, eye.p4.x, pupil.x, cfg)


def combine_gaze(left: GazeDirection, right: GazeDirection) -> GazeDirection:
    """Per-frame gaze: Screen only if every classified eye says Screen."""
    known = [d for d in (left, right) if d != GazeDirection.UNKNOWN]
    if not known:
        return GazeDirection.UNKNOWN
    if all(d == GazeDirection.SCREEN for d in known):
        return GazeDirection.SCREEN
    return GazeDirection.AWAY


def frame_gaze(
    left_eye: EyeObservation,
    right_eye: EyeObservation,
    left_pupil: Optional[Point2D],
    right_pupil: Optional[Point2D],
    cfg: Config,
) -> GazeDirection:
    return combine_gaze(
        gaze_direction(left_eye, left_pupil, cfg),
        gaze_direction(right_eye, right_pupil, cfg),
    )


def gaze_window_score(frames: Iterable[GazeDirection]) -> Optional[float]:
    """Fraction of classified frames looking at the screen; None if none were classified."""
    known = 0
    screen = 0
    for direction in frames:
        if direction == GazeDirection.UNKNOWN:
            continue
        known += 1
        if direction == GazeDirection.SCREEN:
            screen += 1
    if known == 0:
        return None
    return screen / known
