"""
Base channel worker with shared window bookkeeping.

A worker consumes the records routed to it in time order, accumulates
per-window state, and reports each window exactly once when told that the
watermark has passed it.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple

from config import Config
from models import ChannelId, ChannelReport, FeatureRecord, RecordKind

logger = logging.getLogger(__name__)


class ChannelWorker(ABC):
    """Base class for scoring channel workers."""

    kinds: Tuple[RecordKind, ...] = ()
    channels: Tuple[ChannelId, ...] = ()

    def __init__(self, config: Config):
        """
        Initialize the worker.

        Args:
            config: Pipeline configuration (read-only)
        """
        self.config = config
        self.spec = config.window
        self.next_window = 0  # first window not yet reported
        self.buckets: Dict[int, list] = {}

    @property
    def name(self) -> str:
        return "+".join(ch.value for ch in self.channels)

    def bucket(self, window: int) -> list:
        return self.buckets.setdefault(window, [])

    def advance(self, closed: int) -> list:
        """
        Report every window below `closed` that this worker can settle now.

        Args:
            closed: Number of leading windows the watermark has passed

        Returns:
            ChannelReport objects in window order
        """
        return self._report_until(min(closed, self.ready_limit(closed)))

    def finish(self, last_window: int) -> list:
        """
        End of stream: flush pending state and report through last_window.

        Returns:
            Alerts raised while closing, then the remaining ChannelReports
        """
        outputs = self.close()
        outputs.extend(self._report_until(last_window + 1))
        return outputs

    def _report_until(self, limit: int) -> list:
        reports: List[ChannelReport] = []
        while self.next_window < limit:
            reports.extend(self.finalize(self.next_window))
            self.next_window += 1
        return reports

    def ready_limit(self, closed: int) -> int:
        """Upper bound on windows that may be reported; override to hold some back."""
        return closed

    def close(self) -> list:
        """Flush any state that only resolves at end of stream."""
        return []

    @abstractmethod
    def feed(self, records: Sequence[FeatureRecord]) -> list:
        """
        Consume a time-ordered batch of records.

        Args:
            records: Records of this worker's kinds

        Returns:
            Outputs produced immediately (alerts), possibly empty
        """
        pass

    @abstractmethod
    def finalize(self, window: int) -> List[ChannelReport]:
        """
        Produce one report per channel for a window and drop its state.

        Args:
            window: Window index

        Returns:
            ChannelReport for each of self.channels
        """
        pass
