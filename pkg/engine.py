"""
Streaming attention engine.

Routes time-ordered feature records to per-channel workers, advances them
as the watermark passes window boundaries, and joins their reports into
fused attention points through a per-window barrier. Workers run either on
their own threads (one inbox each) or inline on the caller's thread; both
modes produce identical timelines.
"""

import logging
import queue
import threading
import time
from typing import Dict, Iterable, Iterator, List, Optional, Union

from channels.base import ChannelWorker
from channels.context import EmotionChannel, NoiseChannel, PostureChannel
from channels.eyes import OcularChannel
from config import Config
from context_signals import LinearEmotionModel
from errors import AttnPipeError
from fusion import TimelineAssembler, attendance, merge_alerts
from models import (
    AlertEvent,
    AttendanceLedger,
    AttentionPoint,
    ChannelReport,
    FeatureRecord,
    IdentityWarning,
    RecordKind,
    SessionHeader,
    Timeline,
)
from windowing import Watermark, window_index

logger = logging.getLogger(__name__)

BATCH_SIZE = 256  # records per worker message
MODES = ("threads", "inline")

EngineEvent = Union[AttentionPoint, AlertEvent, IdentityWarning]


class InlineRunner:
    """Runs workers synchronously on the calling thread."""

    def __init__(self, workers: List[ChannelWorker]):
        self.workers = workers
        self.outbox: list = []

    def __enter__(self) -> "InlineRunner":
        return self

    def __exit__(self, *exc) -> None:
        return None

    def feed(self, worker: ChannelWorker, batch: List[FeatureRecord]) -> None:
        self.outbox.extend(worker.feed(batch))

    def advance(self, closed: int) -> None:
        for worker in self.workers:
            self.outbox.extend(worker.advance(closed))

    def finish(self, last_window: int) -> None:
        for worker in self.workers:
            self.outbox.extend(worker.finish(last_window))

    def poll(self) -> list:
        outputs, self.outbox = self.outbox, []
        return outputs

    def drain(self) -> list:
        return self.poll()


class _Failure:
    def __init__(self, worker: str, error: BaseException):
        self.worker = worker
        self.error = error


class ThreadedRunner:
    """
    One thread per worker, each fed through its own queue.

    Workers never share state; their outputs are collected on a single
    outbox queue and consumed on the caller's thread.
    """

    def __init__(self, workers: List[ChannelWorker]):
        self.workers = workers
        self.inboxes: Dict[int, queue.Queue] = {id(w): queue.Queue() for w in workers}
        self.outbox: queue.Queue = queue.Queue()
        self.threads: List[threading.Thread] = []
        self.stopped = False

    def __enter__(self) -> "ThreadedRunner":
        for worker in self.workers:
            thread = threading.Thread(
                target=self._loop,
                args=(worker, self.inboxes[id(worker)]),
                name=f"channel-{worker.name}",
                daemon=True,
            )
            thread.start()
            self.threads.append(thread)
        return self

    def __exit__(self, *exc) -> None:
        self._stop()

    def _loop(self, worker: ChannelWorker, inbox: queue.Queue) -> None:
        while True:
            message = inbox.get()
            if message is None:
                return
            op, arg = message
            try:
                outputs = getattr(worker, op)(arg)
            except BaseException as e:  # re-raised on the caller's thread
                self.outbox.put(_Failure(worker.name, e))
                return
            if outputs:
                self.outbox.put(outputs)

    def _stop(self) -> None:
        if self.stopped:
            return
        self.stopped = True
        for inbox in self.inboxes.values():
            inbox.put(None)
        for thread in self.threads:
            thread.join()

    def feed(self, worker: ChannelWorker, batch: List[FeatureRecord]) -> None:
        self.inboxes[id(worker)].put(("feed", batch))

    def advance(self, closed: int) -> None:
        for worker in self.workers:
            self.inboxes[id(worker)].put(("advance", closed))

    def finish(self, last_window: int) -> None:
        for worker in self.workers:
            self.inboxes[id(worker)].put(("finish", last_window))

    def poll(self) -> list:
        outputs: list = []
        while True:
            try:
                item = self.outbox.get_nowait()
            except queue.Empty:
                return outputs
            if isinstance(item, _Failure):
                logger.error(f"Channel worker {item.worker} failed: {item.error}")
                raise item.error
            outputs.extend(item)

    def drain(self) -> list:
        self._stop()
        return self.poll()


class AttentionEngine:
    """
    Scores one session stream.

    Usage:
        engine = AttentionEngine(config, header)
        for event in engine.run(records):
            ...
        timeline = engine.result()
    """

    def __init__(
        self,
        config: Config,
        header: SessionHeader,
        mode: str = "threads",
        emotion_model: Optional[LinearEmotionModel] = None,
    ):
        """
        Initialize the engine.

        Args:
            config: Pipeline configuration
            header: Session header (subject, duration)
            mode: "threads" for one worker thread per channel group, "inline" for none
            emotion_model: Classifier for emotion records that carry features
        """
        if mode not in MODES:
            raise ValueError(f"unknown worker mode {mode!r}, expected one of {MODES}")
        self.config = config
        self.header = header
        self.mode = mode
        self.workers: List[ChannelWorker] = [
            OcularChannel(config),
            EmotionChannel(config, emotion_model),
            PostureChannel(config),
            NoiseChannel(config),
        ]
        self.routes: Dict[RecordKind, ChannelWorker] = {
            kind: worker for worker in self.workers for kind in worker.kinds
        }
        self.assembler = TimelineAssembler(config, header.duration_s)
        self.watermark = Watermark(config.watermark_skew)

        self.points: List[AttentionPoint] = []
        self.alerts: List[AlertEvent] = []
        self.warnings: List[IdentityWarning] = []
        self.identity_records: List[FeatureRecord] = []
        self.observed_records: List[FeatureRecord] = []
        self.attendance: Optional[AttendanceLedger] = None
        self.record_count = 0
        self.elapsed_s = 0.0
        self._finished = False

    def run(self, records: Iterable[FeatureRecord]) -> Iterator[EngineEvent]:
        """
        Consume records in nondecreasing t and yield events as they become final.

        Yields:
            AttentionPoint per fused window (in window order), AlertEvent for
            drowsiness onsets and their final versions, IdentityWarning for
            identity records naming another subject
        """
        if self._finished:
            raise AttnPipeError("engine has already run")
        started = time.perf_counter()
        runner = ThreadedRunner(self.workers) if self.mode == "threads" else InlineRunner(self.workers)
        batches: Dict[int, List[FeatureRecord]] = {id(w): [] for w in self.workers}
        closed = 0
        last_t: Optional[float] = None

        logger.info(f"Scoring session for {self.header.subject} ({self.mode} mode)")
        with runner:
            for record in records:
                self.record_count += 1
                last_t = record.t
                self.watermark.observe(record.t)

                if record.kind == RecordKind.IDENTITY:
                    self.identity_records.append(record)
                    if record.payload.subject != self.header.subject:
                        warning = IdentityWarning(record.t, record.payload.subject, self.header.subject)
                        yield warning
                elif record.kind == RecordKind.OBSERVED:
                    self.observed_records.append(record)
                else:
                    worker = self.routes[record.kind]
                    batch = batches[id(worker)]
                    batch.append(record)
                    if len(batch) >= BATCH_SIZE:
                        runner.feed(worker, batch)
                        batches[id(worker)] = []

                now_closed = self.watermark.closed_windows(self.config.window)
                if now_closed > closed:
                    self._flush(runner, batches)
                    runner.advance(now_closed)
                    closed = now_closed
                yield from self._collect(runner.poll())

            self._flush(runner, batches)
            last_window = window_index(last_t, self.config.window) if last_t is not None else -1
            runner.finish(last_window)
            yield from self._collect(runner.drain())

        ledger, warnings = attendance(
            self.identity_records, self.header.subject, self.header.duration_s, self.config
        )
        self.attendance = ledger
        self.warnings = warnings
        self._finished = True
        self.elapsed_s = time.perf_counter() - started
        if self.assembler.waiting:
            logger.error(f"{self.assembler.waiting} windows never received every channel report")
        logger.info(
            f"Scored {self.record_count} records into {len(self.points)} windows "
            f"in {self.elapsed_s:.2f}s"
        )

    def _flush(self, runner, batches: Dict[int, List[FeatureRecord]]) -> None:
        for worker in self.workers:
            batch = batches[id(worker)]
            if batch:
                runner.feed(worker, batch)
                batches[id(worker)] = []

    def _collect(self, outputs: list) -> Iterator[EngineEvent]:
        for item in outputs:
            if isinstance(item, ChannelReport):
                for point in self.assembler.submit(item):
                    self.points.append(point)
                    yield point
            elif isinstance(item, AlertEvent):
                self.alerts.append(item)
                yield item

    def result(self) -> Timeline:
        """The completed timeline. Only valid after run() is exhausted."""
        if not self._finished:
            raise AttnPipeError("engine has not finished scoring")
        return Timeline(
            points=list(self.points),
            alerts=merge_alerts(self.alerts),
            warnings=list(self.warnings),
            attendance=self.attendance,
        )


def score_session(
    header: SessionHeader,
    records: Iterable[FeatureRecord],
    config: Config,
    mode: str = "inline",
    emotion_model: Optional[LinearEmotionModel] = None,
) -> Timeline:
    """Score a whole session without observing intermediate events."""
    engine = AttentionEngine(config, header, mode=mode, emotion_model=emotion_model)
    for _ in engine.run(records):
        pass
    return engine.result()
