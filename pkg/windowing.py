"""
Window arithmetic and watermark tracking.

Windows are tumbling and half-open: a timestamp exactly on a boundary
belongs to the later window, so per-window counts partition exactly.
"""

import math
from typing import Iterable, Optional, Tuple

from config import WindowSpec
from errors import NumericError, WindowRangeError


def window_index(t: float, spec: WindowSpec) -> int:
    """
    Index of the window containing t.

    Args:
        t: Seconds since session start
        spec: Window length and origin

    Returns:
        floor((t - origin) / length)
    """
    if not math.isfinite(t):
        raise NumericError(f"timestamp must be finite, got {t}")
    if t < spec.origin:
        raise WindowRangeError(f"timestamp {t} precedes window origin {spec.origin}")

    k = math.floor((t - spec.origin) / spec.length)
    # keep origin + k*length <= t < origin + (k+1)*length exact under rounding
    if spec.origin + (k + 1) * spec.length <= t:
        k += 1
    elif k > 0 and spec.origin + k * spec.length > t:
        k -= 1
    return k


def window_bounds(k: int, spec: WindowSpec) -> Tuple[float, float]:
    """[start, end) of window k."""
    return spec.origin + k * spec.length, spec.origin + (k + 1) * spec.length


def windows_overlapping(start: float, end: float, spec: WindowSpec) -> range:
    """Indices of windows that intersect the half-open interval [start, end)."""
    if end <= start:
        return range(0)
    first = window_index(max(start, spec.origin), spec)
    last = window_index(end, spec)
    if window_bounds(last, spec)[0] >= end:
        last -= 1
    return range(first, last + 1)


def clamp_unit(x: float) -> float:
    """Clamp to [0, 1]."""
    if not math.isfinite(x):
        raise NumericError(f"cannot clamp non-finite value {x}")
    return min(max(x, 0.0), 1.0)


def watermark(seen: Iterable[float], skew: float) -> float:
    """Max seen timestamp minus the allowed skew."""
    latest = max(seen, default=None)
    if latest is None:
        raise ValueError("watermark needs at least one timestamp")
    return latest - skew


class Watermark:
    """
    Running watermark over a record stream.

    A window [a, b) may be finalized once value >= b. End of stream
    finalizes everything.
    """

    def __init__(self, skew: float):
        self.skew = skew
        self.max_seen: Optional[float] = None

    def observe(self, t: float) -> None:
        if self.max_seen is None or t > self.max_seen:
            self.max_seen = t

    @property
    def value(self) -> Optional[float]:
        if self.max_seen is None:
            return None
        return self.max_seen - self.skew

    def closed_windows(self, spec: WindowSpec) -> int:
        """Number of leading windows whose end is at or below the watermark."""
        wm = self.value
        if wm is None or wm < spec.origin + spec.length:
            return 0
        return window_index(wm, spec)
