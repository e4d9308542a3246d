"""
Emotion, posture and noise channels.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from config import Config
from context_signals import (
    LinearEmotionModel,
    classify_emotion,
    emotion_window_score,
    noise_score,
    posture_displacements,
    posture_window_score,
)
from errors import ModelError
from models import ChannelId, ChannelReport, FeatureRecord, RecordKind
from windowing import window_index

from .base import ChannelWorker

logger = logging.getLogger(__name__)


class EmotionChannel(ChannelWorker):
    """Mean valence score of the emotion labels seen in each window."""

    kinds = (RecordKind.EMOTION,)
    channels = (ChannelId.EMOTION,)

    def __init__(self, config: Config, model: Optional[LinearEmotionModel] = None):
        super().__init__(config)
        self.model = model

    def feed(self, records: Sequence[FeatureRecord]) -> list:
        for record in records:
            payload = record.payload
            label = payload.label
            if label is None:
                if self.model is None:
                    raise ModelError(
                        f"emotion record at t={record.t} carries features but no emotion model is loaded"
                    )
                label = classify_emotion(payload.features, self.model)
            self.bucket(window_index(record.t, self.spec)).append(label)
        return []

    def finalize(self, window: int) -> List[ChannelReport]:
        score = emotion_window_score(self.buckets.pop(window, []), self.config)
        return [ChannelReport(window, ChannelId.EMOTION, score)]


class PostureChannel(ChannelWorker):
    """Restlessness from frame-to-frame keypoint movement."""

    kinds = (RecordKind.POSE,)
    channels = (ChannelId.POSTURE,)

    def __init__(self, config: Config):
        super().__init__(config)
        self.previous: Optional[np.ndarray] = None  # (17, 3) keypoints of the last frame

    def feed(self, records: Sequence[FeatureRecord]) -> list:
        if not records:
            return []
        frames = np.asarray([r.payload.keypoints for r in records], dtype=float)
        if self.previous is not None:
            frames = np.concatenate([self.previous[np.newaxis], frames])
            times = [r.t for r in records]
        else:
            times = [r.t for r in records[1:]]
        self.previous = frames[-1]

        # a displacement belongs to the window of the later frame
        for t, d in zip(times, posture_displacements(frames, self.config)):
            if not np.isnan(d):
                self.bucket(window_index(t, self.spec)).append(float(d))
        return []

    def finalize(self, window: int) -> List[ChannelReport]:
        score = posture_window_score(self.buckets.pop(window, []), self.config)
        return [ChannelReport(window, ChannelId.POSTURE, score)]


class NoiseChannel(ChannelWorker):
    """Background sound level score."""

    kinds = (RecordKind.AUDIO,)
    channels = (ChannelId.NOISE,)

    def feed(self, records: Sequence[FeatureRecord]) -> list:
        for record in records:
            self.bucket(window_index(record.t, self.spec)).append(record.payload.db)
        return []

    def finalize(self, window: int) -> List[ChannelReport]:
        score = noise_score(self.buckets.pop(window, []), self.config)
        return [ChannelReport(window, ChannelId.NOISE, score)]
