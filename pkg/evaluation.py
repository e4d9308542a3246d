"""
Agreement between predicted attention and observer-rated attention.

Observed ratings come from "observed" records in the session log; they
are averaged per window and paired with the predicted timeline on the
windows both have.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import WindowSpec
from errors import (
    EmptySeriesError,
    EvaluationError,
    MapeDomainError,
    UndefinedR2Error,
)
from models import AttentionPoint, FeatureRecord, RecordKind
from windowing import window_index

logger = logging.getLogger(__name__)

# Reference per-technique accuracies (%) for the overall-accuracy summary
ACCURACY_TABLE: Dict[str, float] = {
    "facial_landmarks": 89.67,
    "blink_rate": 91.02,
    "eye_gaze": 75.33,
    "emotion": 82.55,
    "face_recognition": 90.11,
    "body_posture": 79.06,
}


@dataclass(frozen=True)
class PairedSeries:
    """Predicted and observed attention on the same windows, in [0, 100]."""
    windows: Tuple[int, ...]
    predicted: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        predicted = np.asarray(self.predicted, dtype=float)
        observed = np.asarray(self.observed, dtype=float)
        if predicted.shape != observed.shape or predicted.ndim != 1:
            raise EvaluationError(
                f"predicted and observed must be equal-length 1-D series, got {predicted.shape} and {observed.shape}"
            )
        if len(self.windows) != predicted.size:
            raise EvaluationError("windows and values differ in length")
        for name, values in (("predicted", predicted), ("observed", observed)):
            if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 100):
                raise EvaluationError(f"{name} values must be finite and in [0, 100]")
        object.__setattr__(self, "predicted", predicted)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def from_values(cls, predicted: Sequence[float], observed: Sequence[float]) -> "PairedSeries":
        return cls(tuple(range(len(predicted))), np.asarray(predicted, dtype=float), np.asarray(observed, dtype=float))

    def __len__(self) -> int:
        return int(self.predicted.size)

    @property
    def errors(self) -> np.ndarray:
        return self.predicted - self.observed


def _require_values(series: PairedSeries) -> None:
    if len(series) == 0:
        raise EmptySeriesError("metric needs at least one paired window")


def rmse(series: PairedSeries) -> float:
    _require_values(series)
    return float(np.sqrt(np.mean(series.errors ** 2)))


def mae(series: PairedSeries) -> float:
    _require_values(series)
    return float(np.mean(np.abs(series.errors)))


def r2(series: PairedSeries) -> float:
    """Coefficient of determination; undefined when the observed series is constant."""
    _require_values(series)
    observed = series.observed
    ss_res = float(np.sum((observed - series.predicted) ** 2))
    ss_tot = float(np.sum((observed - observed.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedR2Error("R^2 is undefined for a constant observed series")
    return 1.0 - ss_res / ss_tot


def mape(series: PairedSeries) -> float:
    """Mean absolute percentage error, in percent."""
    _require_values(series)
    observed = series.observed
    if np.any(observed == 0):
        raise MapeDomainError("MAPE is undefined when an observed value is 0")
    return float(100.0 * np.mean(np.abs(series.errors) / np.abs(observed)))


def overall_accuracy(accuracies: Iterable[float]) -> float:
    """Arithmetic mean of per-technique accuracies (percent)."""
    values = list(accuracies)
    if not values:
        raise EmptySeriesError("overall accuracy needs at least one value")
    for value in values:
        if not (math.isfinite(value) and 0.0 <= value <= 100.0):
            raise EvaluationError(f"accuracy {value} is outside [0, 100]")
    return math.fsum(values) / len(values)


def observed_by_window(records: Iterable[FeatureRecord], spec: WindowSpec) -> Dict[int, float]:
    """Mean observer rating per window from observed records."""
    sums: Dict[int, list] = {}
    for record in records:
        if record.kind != RecordKind.OBSERVED:
            continue
        sums.setdefault(window_index(record.t, spec), []).append(record.payload.att)
    return {k: math.fsum(v) / len(v) for k, v in sorted(sums.items())}


def pair_series(points: Sequence[AttentionPoint], observed: Mapping[int, float]) -> PairedSeries:
    """
    Pair predictions with observations on shared windows.

    Raises:
        EvaluationError: no window has both a prediction and an observation
    """
    predicted = {p.window: p.att for p in points}
    shared = sorted(set(predicted) & set(observed))
    if not shared:
        raise EvaluationError("no window has both a prediction and an observation")
    dropped = len(predicted) + len(observed) - 2 * len(shared)
    if dropped:
        logger.info(f"Evaluating {len(shared)} shared windows ({dropped} unpaired windows ignored)")
    return PairedSeries(
        windows=tuple(shared),
        predicted=np.array([predicted[k] for k in shared]),
        observed=np.array([observed[k] for k in shared]),
    )


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    r2: Optional[float]
    mape: float
    n_windows: int

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "r2": self.r2,
            "mape": self.mape,
            "n_windows": self.n_windows,
        }


def evaluate(series: PairedSeries) -> MetricReport:
    """
    All agreement metrics for a paired series.

    An undefined R^2 (constant observations) is reported as None; a zero
    observation makes MAPE undefined and raises.
    """
    try:
        r2_value: Optional[float] = r2(series)
    except UndefinedR2Error as e:
        logger.warning(f"{e}; reporting r2 as null")
        r2_value = None
    return MetricReport(
        rmse=rmse(series),
        mae=mae(series),
        r2=r2_value,
        mape=mape(series),
        n_windows=len(series),
    )
