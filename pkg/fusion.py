"""
Fusion of per-channel window scores into an attention timeline.

att = 100 * (sum of present channel scores) / n, where n counts the
channels present in the window. Identity never contributes; it feeds the
attendance ledger instead.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from config import Config
from errors import ContractViolationError
from models import (
    SCORING_CHANNELS,
    AlertEvent,
    AttendanceLedger,
    AttentionPoint,
    ChannelId,
    ChannelReport,
    ChannelScore,
    FeatureRecord,
    IdentityWarning,
    Timeline,
)
from windowing import window_bounds, windows_overlapping

logger = logging.getLogger(__name__)


def fuse(
    scores: Iterable[ChannelScore],
    fixed_n: Optional[int] = None,
    partial: bool = False,
    start: float = 0.0,
    end: float = 0.0,
) -> Optional[AttentionPoint]:
    """
    Fuse one window's channel scores.

    Args:
        scores: At most one ChannelScore per scoring channel, all for the same window
        fixed_n: If 5, divide by five and treat missing channels as 0
        partial: Window extends past the session end
        start: Window start time
        end: Window end time

    Returns:
        AttentionPoint, or None when no channel is present
    """
    present: Dict[ChannelId, float] = {}
    window: Optional[int] = None
    for s in scores:
        if s.channel not in SCORING_CHANNELS:
            raise ContractViolationError(f"channel {s.channel.value} does not take part in fusion")
        if not (math.isfinite(s.score) and 0.0 <= s.score <= 1.0):
            raise ContractViolationError(
                f"{s.channel.value} score {s.score} for window {s.window} is outside [0, 1]"
            )
        if window is None:
            window = s.window
        elif s.window != window:
            raise ContractViolationError(f"scores for windows {window} and {s.window} fused together")
        if s.channel in present:
            raise ContractViolationError(f"duplicate {s.channel.value} score for window {window}")
        present[s.channel] = s.score

    if not present:
        return None

    contributions = {ch: present[ch] for ch in SCORING_CHANNELS if ch in present}
    n = len(contributions)
    values = list(contributions.values())
    if (fixed_n or n) == n and all(v == values[0] for v in values):
        # equal scores fuse to exactly 100 * s
        att = 100.0 * values[0]
    else:
        att = 100.0 * math.fsum(values) / (fixed_n or n)
    return AttentionPoint(
        window=window,
        att=att,
        contributions=contributions,
        n=n,
        partial=partial,
        start=start,
        end=end,
    )


def _fuse_window(
    window: int,
    values: Dict[ChannelId, Optional[float]],
    config: Config,
    duration_s: float,
) -> Optional[AttentionPoint]:
    start, end = window_bounds(window, config.window)
    scores = [ChannelScore(window, ch, v) for ch, v in values.items() if v is not None]
    return fuse(scores, config.fixed_n, partial=end > duration_s, start=start, end=end)


class TimelineAssembler:
    """
    Per-window barrier between channel workers and fusion.

    Reports may arrive in any interleaving across channels; a window is
    fused only once every scoring channel has reported it, and windows are
    released strictly in order.
    """

    def __init__(self, config: Config, duration_s: float):
        self.config = config
        self.duration_s = duration_s
        self.pending: Dict[int, Dict[ChannelId, Optional[float]]] = {}
        self.next_window = 0

    def submit(self, report: ChannelReport) -> List[AttentionPoint]:
        """Record one channel report; return any points that became complete."""
        if report.window < self.next_window:
            raise ContractViolationError(f"window {report.window} reported after it was fused")
        slot = self.pending.setdefault(report.window, {})
        if report.channel in slot:
            raise ContractViolationError(
                f"{report.channel.value} reported window {report.window} twice"
            )
        slot[report.channel] = report.score
        return self._release()

    def _release(self) -> List[AttentionPoint]:
        points: List[AttentionPoint] = []
        while len(self.pending.get(self.next_window, ())) == len(SCORING_CHANNELS):
            values = self.pending.pop(self.next_window)
            point = _fuse_window(self.next_window, values, self.config, self.duration_s)
            if point is not None:
                points.append(point)
            self.next_window += 1
        return points

    @property
    def waiting(self) -> int:
        """Windows with at least one report that are not yet fused."""
        return len(self.pending)


def merge_alerts(alerts: Iterable[AlertEvent]) -> List[AlertEvent]:
    """One alert per closed-eye run, preferring the final version, ordered by run start."""
    by_start: Dict[float, AlertEvent] = {}
    for alert in alerts:
        current = by_start.get(alert.t)
        if current is None or (alert.final and not current.final):
            by_start[alert.t] = alert
    return [by_start[t] for t in sorted(by_start)]


def drowsy_windows(alerts: Iterable[AlertEvent], config: Config) -> set:
    """Windows that intersect a drowsy run."""
    windows = set()
    for alert in alerts:
        end = alert.ended_at if alert.ended_at is not None else alert.t + alert.duration
        windows.update(windows_overlapping(alert.t, end, config.window))
    return windows


def build_timeline(
    reports: Iterable[Union[ChannelScore, ChannelReport]],
    config: Config,
    duration_s: float,
    alerts: Iterable[AlertEvent] = (),
    warnings: Sequence[IdentityWarning] = (),
    attendance: Optional[AttendanceLedger] = None,
) -> Timeline:
    """
    Batch form of the streaming assembler.

    Groups channel scores by window, forces the blink contribution to 0 in
    windows that overlap a drowsy run, and fuses each window in order.
    """
    grouped: Dict[int, Dict[ChannelId, Optional[float]]] = {}
    for report in reports:
        slot = grouped.setdefault(report.window, {})
        if report.channel in slot:
            raise ContractViolationError(
                f"{report.channel.value} reported window {report.window} twice"
            )
        slot[report.channel] = report.score

    merged = merge_alerts(alerts)
    for window in drowsy_windows(merged, config):
        slot = grouped.get(window)
        if slot is not None and slot.get(ChannelId.BLINK) is not None:
            slot[ChannelId.BLINK] = 0.0

    points: List[AttentionPoint] = []
    for window in sorted(grouped):
        point = _fuse_window(window, grouped[window], config, duration_s)
        if point is not None:
            points.append(point)

    return Timeline(
        points=points,
        alerts=merged,
        warnings=list(warnings),
        attendance=attendance,
    )


def attendance(
    events: Iterable[FeatureRecord],
    subject: str,
    duration_s: float,
    config: Config,
) -> Tuple[AttendanceLedger, List[IdentityWarning]]:
    """
    Build the attendance ledger from identity records.

    A verified match for the session subject opens (or extends) an interval
    [t, t + window length) capped at the session end; a failed verification
    closes the current interval at t. Events for another subject do not
    count and produce a warning.

    Args:
        events: Identity FeatureRecords
        subject: The session's subject
        duration_s: Session length in seconds
        config: Pipeline configuration

    Returns:
        (ledger, warnings)
    """
    expiry = config.window.length
    intervals: List[Tuple[float, float]] = []
    warnings: List[IdentityWarning] = []
    current: Optional[List[float]] = None

    for event in sorted(events, key=lambda r: r.t):
        t = event.t
        payload = event.payload
        if payload.subject != subject:
            logger.warning(f"Identity at t={t:.2f}s is {payload.subject!r}, expected {subject!r}")
            warnings.append(IdentityWarning(t=t, subject=payload.subject, expected=subject))
            continue
        if not payload.verified:
            if current is not None and current[1] > t:
                current[1] = max(current[0], t)
            continue

        end = min(t + expiry, duration_s)
        if current is not None and t <= current[1]:
            current[1] = max(current[1], end)
        else:
            if current is not None:
                intervals.append((current[0], current[1]))
            current = [t, end]

    if current is not None:
        intervals.append((current[0], current[1]))
    intervals = [(a, b) for a, b in intervals if b > a]

    verified = math.fsum(b - a for a, b in intervals)
    coverage = min(verified / duration_s, 1.0) if duration_s > 0 else 0.0
    ledger = AttendanceLedger(
        subject=subject,
        verified_intervals=tuple(intervals),
        coverage=coverage,
        present=coverage >= config.attendance_coverage,
    )
    return ledger, warnings
