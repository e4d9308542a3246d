"""
Session log persistence and replay.

Session logs are line-delimited JSON: a header object followed by one
record per line. Records may arrive out of order by up to the configured
watermark skew; they are released in (t, kind, line) order through a
reorder buffer so a log can be consumed as a stream.
"""

import heapq
import json
import logging
import math
import time
from pathlib import Path
from typing import (
    Annotated,
    Callable,
    Iterable,
    Iterator,
    List,
    Literal,
    Optional,
    TextIO,
    Tuple,
    Union,
)

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    ValidationError,
    model_validator,
)

from config import SESSION_FORMAT, WATERMARK_SKEW_SECONDS
from errors import SessionFormatError
from models import (
    AudioPayload,
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
    SessionHeader,
)

logger = logging.getLogger(__name__)

Coord = Tuple[float, float]
Confidence = Annotated[float, Field(ge=0, le=1)]


class _Line(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class HeaderLine(_Line):
    format: Literal["attnpipe/1"]
    subject: str = Field(min_length=1)
    duration_s: float = Field(ge=0)


class _RecordLine(_Line):
    t: float = Field(ge=0)


class LandmarksLine(_RecordLine):
    kind: Literal["landmarks"]
    pts: List[Coord] = Field(min_length=68, max_length=68)

    def to_payload(self) -> LandmarksPayload:
        return LandmarksPayload(points=tuple(self.pts))


class PupilsLine(_RecordLine):
    kind: Literal["pupils"]
    left: Optional[Coord] = None
    right: Optional[Coord] = None

    def to_payload(self) -> PupilsPayload:
        return PupilsPayload(
            left=Point2D(*self.left) if self.left is not None else None,
            right=Point2D(*self.right) if self.right is not None else None,
        )


class PoseLine(_RecordLine):
    kind: Literal["pose"]
    kp: List[Tuple[float, float, Confidence]] = Field(min_length=17, max_length=17)

    def to_payload(self) -> PosePayload:
        return PosePayload(keypoints=tuple(self.kp))


class EmotionLine(_RecordLine):
    kind: Literal["emotion"]
    label: Optional[EmotionLabel] = None
    features: Optional[List[float]] = Field(None, min_length=1)

    @model_validator(mode="after")
    def _label_or_features(self) -> "EmotionLine":
        if (self.label is None) == (self.features is None):
            raise ValueError("emotion record needs exactly one of 'label' or 'features'")
        return self

    def to_payload(self) -> EmotionPayload:
        features = tuple(self.features) if self.features is not None else None
        return EmotionPayload(label=self.label, features=features)


class AudioLine(_RecordLine):
    kind: Literal["audio"]
    db: float

    def to_payload(self) -> AudioPayload:
        return AudioPayload(db=self.db)


class IdentityLine(_RecordLine):
    kind: Literal["identity"]
    subject: str = Field(min_length=1)
    verified: bool

    def to_payload(self) -> IdentityPayload:
        return IdentityPayload(subject=self.subject, verified=self.verified)


class ObservedLine(_RecordLine):
    kind: Literal["observed"]
    att: float = Field(ge=0, le=100)

    def to_payload(self) -> ObservedPayload:
        return ObservedPayload(att=self.att)


RecordLine = Annotated[
    Union[
        LandmarksLine,
        PupilsLine,
        PoseLine,
        EmotionLine,
        AudioLine,
        IdentityLine,
        ObservedLine,
    ],
    Field(discriminator="kind"),
]

_RECORD_ADAPTER = TypeAdapter(RecordLine)


def _describe(error: ValidationError) -> str:
    """One-line reason from a pydantic error."""
    first = error.errors()[0]
    kind = first["type"]
    if kind == "union_tag_invalid":
        return f"unknown kind {first['ctx']['tag']!r}"
    if kind == "union_tag_not_found":
        return "missing 'kind'"
    if kind == "json_invalid":
        return f"malformed JSON ({first['msg']})"
    # drop the union tag from the location
    loc = [str(part) for part in first["loc"]]
    if loc and loc[0] in {k.value for k in RecordKind}:
        loc = loc[1:]
    where = ".".join(loc)
    return f"{where}: {first['msg']}" if where else first["msg"]


def parse_header(text: str, line_no: int = 1) -> SessionHeader:
    try:
        header = HeaderLine.model_validate_json(text)
    except ValidationError as e:
        raise SessionFormatError(line_no, f"bad header: {_describe(e)}") from e
    return SessionHeader(subject=header.subject, duration_s=header.duration_s, format=header.format)


def parse_record(text: str, line_no: int) -> FeatureRecord:
    """Parse one record line."""
    try:
        line = _RECORD_ADAPTER.validate_json(text)
    except ValidationError as e:
        raise SessionFormatError(line_no, _describe(e)) from e
    return FeatureRecord(t=line.t, kind=RecordKind(line.kind), payload=line.to_payload())


def iter_records(
    lines: Iterable[str],
    skew: float = WATERMARK_SKEW_SECONDS,
    first_line_no: int = 2,
    duration_s: Optional[float] = None,
) -> Iterator[FeatureRecord]:
    """
    Stream records in (t, kind, input line) order.

    A record is held until the watermark (max seen t minus skew) passes
    it; anything arriving further behind than the skew is an error.

    Args:
        lines: Record lines (header already consumed)
        skew: Allowed disorder in seconds
        first_line_no: Line number of the first element of lines
        duration_s: Declared session duration; later records are rejected

    Yields:
        FeatureRecord objects in sorted order
    """
    pending: List[Tuple[float, str, int, FeatureRecord]] = []
    max_t: Optional[float] = None

    for offset, raw in enumerate(lines):
        line_no = first_line_no + offset
        text = raw.strip()
        if not text:
            continue

        record = parse_record(text, line_no)
        if duration_s is not None and record.t > duration_s:
            raise SessionFormatError(
                line_no, f"t={record.t} exceeds declared duration {duration_s}"
            )
        if max_t is not None and record.t < max_t - skew:
            raise SessionFormatError(
                line_no,
                f"timestamp {record.t} is more than {skew}s behind {max_t}",
            )
        if max_t is not None and record.t < max_t:
            logger.debug(f"Reordering line {line_no}: t={record.t} after t={max_t}")
        if max_t is None or record.t > max_t:
            max_t = record.t

        # ties on t sort by kind before line: landmarks precede pupils, so the
        # gaze corner lookup sees the same frame whatever the input order
        heapq.heappush(pending, (record.t, record.kind.value, line_no, record))
        release_below = max_t - skew
        while pending and pending[0][0] < release_below:
            yield heapq.heappop(pending)[3]

    while pending:
        yield heapq.heappop(pending)[3]


def read_header(lines: Iterator[str]) -> Tuple[SessionHeader, int]:
    """Consume lines up to the header; return it with its line number."""
    line_no = 0
    for raw in lines:
        line_no += 1
        if raw.strip():
            return parse_header(raw.strip(), line_no), line_no
    raise SessionFormatError(max(line_no, 1), "missing header line")


def parse_session(
    stream: Union[str, Iterable[str]],
    skew: float = WATERMARK_SKEW_SECONDS,
) -> Session:
    """
    Parse a whole session log.

    Args:
        stream: Log text, or an iterable of lines (e.g. an open file)
        skew: Allowed timestamp disorder in seconds

    Returns:
        Session with records sorted by t
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    lines = iter(stream)
    header, line_no = read_header(lines)
    records = tuple(
        iter_records(lines, skew, first_line_no=line_no + 1, duration_s=header.duration_s)
    )
    return Session(subject=header.subject, duration_s=header.duration_s, records=records)


def load_session(path: Union[str, Path], skew: float = WATERMARK_SKEW_SECONDS) -> Session:
    with open(path, "r", encoding="utf-8") as f:
        session = parse_session(f, skew)
    logger.info(f"Loaded {len(session.records)} records for {session.subject} from {path}")
    return session


def open_session(
    path: Union[str, Path],
    skew: float = WATERMARK_SKEW_SECONDS,
) -> Tuple[SessionHeader, Iterator[FeatureRecord]]:
    """
    Open a session log for streaming.

    The header is read immediately; records are parsed lazily as the
    returned iterator is consumed. The file closes when it is exhausted.
    """
    f: TextIO = open(path, "r", encoding="utf-8")
    try:
        header, line_no = read_header(f)
    except Exception:
        f.close()
        raise

    def _records() -> Iterator[FeatureRecord]:
        with f:
            yield from iter_records(f, skew, first_line_no=line_no + 1, duration_s=header.duration_s)

    return header, _records()


def header_to_dict(header: SessionHeader) -> dict:
    return {"format": SESSION_FORMAT, "subject": header.subject, "duration_s": header.duration_s}


def record_to_dict(record: FeatureRecord) -> dict:
    """Convert a FeatureRecord to its wire dictionary."""
    body: dict = {"t": record.t, "kind": record.kind.value}
    payload = record.payload

    if record.kind == RecordKind.LANDMARKS:
        body["pts"] = [list(pt) for pt in payload.points]
    elif record.kind == RecordKind.PUPILS:
        body["left"] = [payload.left.x, payload.left.y] if payload.left else None
        body["right"] = [payload.right.x, payload.right.y] if payload.right else None
    elif record.kind == RecordKind.POSE:
        body["kp"] = [list(kp) for kp in payload.keypoints]
    elif record.kind == RecordKind.EMOTION:
        if payload.label is not None:
            body["label"] = payload.label.value
        else:
            body["features"] = list(payload.features)
    elif record.kind == RecordKind.AUDIO:
        body["db"] = payload.db
    elif record.kind == RecordKind.IDENTITY:
        body["subject"] = payload.subject
        body["verified"] = payload.verified
    elif record.kind == RecordKind.OBSERVED:
        body["att"] = payload.att
    return body


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def serialize_session(session: Session) -> str:
    """Render a Session back into log text (inverse of parse_session)."""
    lines = [_dumps(header_to_dict(session.header))]
    lines.extend(_dumps(record_to_dict(record)) for record in session.records)
    return "\n".join(lines) + "\n"


def write_session(session: Session, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_session(session))
    logger.info(f"Wrote {len(session.records)} records to {path}")


def replay(
    records: Iterable[FeatureRecord],
    speed: float = math.inf,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[FeatureRecord]:
    """
    Re-emit records with their original spacing scaled by 1/speed.

    Args:
        records: Time-ordered records
        speed: Playback multiplier; math.inf emits without waiting
        clock: Monotonic time source
        sleep: Blocking wait

    Yields:
        The same records, in the same order
    """
    if not speed > 0:
        raise ValueError(f"replay speed must be positive, got {speed}")
    if math.isinf(speed):
        yield from records
        return

    start_wall: Optional[float] = None
    start_t = 0.0
    for record in records:
        if start_wall is None:
            start_wall = clock()
            start_t = record.t
        else:
            target = start_wall + (record.t - start_t) / speed
            delay = target - clock()
            if delay > 0:
                sleep(delay)
        yield record
