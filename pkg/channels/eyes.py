"""
Blink-rate and gaze channels.

Both are driven by the landmark stream: landmarks give eye state for the
blink tracker and the eye corners that pupil positions are measured
against.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import LEFT_EYE_INDICES, RIGHT_EYE_INDICES, Config
from models import (
    AlertEvent,
    ChannelId,
    ChannelReport,
    DrowsinessEnded,
    DrowsinessOnset,
    FeatureRecord,
    GazeDirection,
    RecordKind,
)
from ocular import (
    BlinkTracker,
    blink_rate_score,
    classify_pupil,
    combine_gaze,
    gaze_window_score,
    mean_ear_batch,
    state_for_ear,
)
from windowing import window_bounds, window_index

from .base import ChannelWorker

logger = logging.getLogger(__name__)

_EYE_SLICE = slice(LEFT_EYE_INDICES[0], RIGHT_EYE_INDICES[-1] + 1)


class OcularChannel(ChannelWorker):
    """Blink-rate and gaze scores from landmark and pupil records."""

    kinds = (RecordKind.LANDMARKS, RecordKind.PUPILS)
    channels = (ChannelId.BLINK, ChannelId.GAZE)

    def __init__(self, config: Config):
        super().__init__(config)
        self.tracker = BlinkTracker(config)
        self.eye_frames: Dict[int, int] = {}
        # (left outer, left inner, right outer, right inner) x of the latest landmarks
        self.corners: Optional[np.ndarray] = None
        self.onsets: Dict[float, float] = {}  # run start -> detection time

    def feed(self, records: Sequence[FeatureRecord]) -> list:
        landmarks = [r for r in records if r.kind == RecordKind.LANDMARKS]
        mean_ears = np.empty(0)
        corners = np.empty((0, 4))
        if landmarks:
            eyes = np.asarray([r.payload.points[_EYE_SLICE] for r in landmarks], dtype=float)
            mean_ears = mean_ear_batch(eyes[:, 0:6], eyes[:, 6:12])
            corners = eyes[:, [0, 3, 6, 9], 0]

        outputs: list = []
        i = 0
        for record in records:
            if record.kind == RecordKind.LANDMARKS:
                self.corners = corners[i]
                mean = mean_ears[i]
                i += 1
                if math.isnan(mean):
                    logger.debug(f"Skipping frame at t={record.t}: both eyes degenerate")
                    continue
                window = window_index(record.t, self.spec)
                self.eye_frames[window] = self.eye_frames.get(window, 0) + 1
                for event in self.tracker.feed(record.t, state_for_ear(float(mean), self.config)):
                    alert = self._to_alert(event)
                    if alert is not None:
                        outputs.append(alert)
            elif record.kind == RecordKind.PUPILS:
                self.bucket(window_index(record.t, self.spec)).append(self._gaze(record))
        return outputs

    def _gaze(self, record: FeatureRecord) -> GazeDirection:
        if self.corners is None:
            return GazeDirection.UNKNOWN
        left_outer, left_inner, right_outer, right_inner = self.corners
        pupils = record.payload
        left = GazeDirection.UNKNOWN
        right = GazeDirection.UNKNOWN
        if pupils.left is not None:
            left = classify_pupil(left_outer, left_inner, pupils.left.x, self.config)
        if pupils.right is not None:
            right = classify_pupil(right_outer, right_inner, pupils.right.x, self.config)
        return combine_gaze(left, right)

    def _to_alert(self, event) -> Optional[AlertEvent]:
        if isinstance(event, DrowsinessOnset):
            self.onsets[event.closed_since] = event.t
            logger.warning(
                f"Drowsiness at t={event.t:.2f}s: eyes closed since {event.closed_since:.2f}s"
            )
            return AlertEvent(t=event.closed_since, duration=event.duration, detected_at=event.t)
        if isinstance(event, DrowsinessEnded):
            return AlertEvent(
                t=event.closed_since,
                duration=event.duration,
                detected_at=self.onsets.pop(event.closed_since),
                final=True,
                ended_at=event.t,
            )
        return None

    def ready_limit(self, closed: int) -> int:
        # a closed run still below the drowsiness limit may yet zero its windows
        since = self.tracker.undecided_since
        if since is None:
            return closed
        return min(closed, window_index(since, self.spec))

    def close(self) -> list:
        outputs = []
        for event in self.tracker.finish():
            alert = self._to_alert(event)
            if alert is not None:
                outputs.append(alert)
        return outputs

    def finalize(self, window: int) -> List[ChannelReport]:
        frames = self.eye_frames.pop(window, 0)
        blinks = self.tracker.blinks_by_window.pop(window, 0)
        start, end = window_bounds(window, self.spec)
        self.tracker.drowsy_runs = [run for run in self.tracker.drowsy_runs if run[1] > start]

        if frames == 0:
            blink = None
        elif self.tracker.drowsy_overlaps(start, end):
            blink = 0.0
        else:
            blink = blink_rate_score(blinks, self.config)

        gaze = gaze_window_score(self.buckets.pop(window, []))
        return [
            ChannelReport(window, ChannelId.BLINK, blink),
            ChannelReport(window, ChannelId.GAZE, gaze),
        ]
