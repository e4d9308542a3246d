"""
Tests for session log parsing, serialization and replay.
"""

import json

import numpy as np
import pytest

from errors import SessionFormatError
from models import EmotionLabel, RecordKind
from session_io import (
    iter_records,
    load_session,
    open_session,
    parse_header,
    parse_record,
    parse_session,
    replay,
    serialize_session,
    write_session,
)

HEADER = '{"format":"attnpipe/1","subject":"s1","duration_s":10}'


def _log(*records) -> str:
    return "\n".join([HEADER, *[json.dumps(r) for r in records]]) + "\n"


def test_parse_minimal_session():
    session = parse_session(_log(
        {"t": 0.5, "kind": "audio", "db": 48.0},
        {"t": 1.0, "kind": "emotion", "label": "happy"},
        {"t": 1.0, "kind": "identity", "subject": "s1", "verified": True},
    ))
    assert session.subject == "s1"
    assert session.duration_s == 10
    assert [r.kind for r in session.records] == [RecordKind.AUDIO, RecordKind.EMOTION, RecordKind.IDENTITY]
    assert session.records[1].payload.label == EmotionLabel.HAPPY


def test_header_only_session_has_no_records():
    session = parse_session(HEADER + "\n")
    assert session.records == ()


def test_missing_header():
    with pytest.raises(SessionFormatError) as exc:
        parse_session("")
    assert "missing header" in str(exc.value)


def test_bad_header_format_version():
    with pytest.raises(SessionFormatError) as exc:
        parse_header('{"format":"attnpipe/2","subject":"s","duration_s":1}')
    assert exc.value.line_no == 1


def test_unknown_kind_cites_line():
    text = _log(
        {"t": 0.1, "kind": "audio", "db": 40},
        {"t": 0.2, "kind": "heartbeat"},
    )
    with pytest.raises(SessionFormatError) as exc:
        parse_session(text)
    assert exc.value.line_no == 3
    assert "heartbeat" in str(exc.value)


def test_malformed_json_cites_line():
    lines = [HEADER] + ['{"t": 0.1, "kind": "audio", "db": 40}'] * 5 + ["{not json"]
    with pytest.raises(SessionFormatError) as exc:
        parse_session("\n".join(lines))
    assert exc.value.line_no == 7
    assert str(exc.value).startswith("line 7:")


@pytest.mark.parametrize("record", [
    {"t": -1.0, "kind": "audio", "db": 40},
    {"t": 0.1, "kind": "landmarks", "pts": [[0, 0]] * 67},
    {"t": 0.1, "kind": "pose", "kp": [[0, 0, 1.5]] * 17},
    {"t": 0.1, "kind": "emotion"},
    {"t": 0.1, "kind": "emotion", "label": "happy", "features": [1.0]},
    {"t": 0.1, "kind": "emotion", "label": "bored"},
    {"t": 0.1, "kind": "observed", "att": 101},
    {"t": 0.1, "kind": "audio", "db": 40, "extra": 1},
])
def test_invalid_records(record):
    with pytest.raises(SessionFormatError):
        parse_record(json.dumps(record), 2)


def test_non_finite_number_rejected():
    with pytest.raises(SessionFormatError):
        parse_record('{"t": 0.1, "kind": "audio", "db": NaN}', 2)


def test_record_after_duration_rejected():
    with pytest.raises(SessionFormatError) as exc:
        parse_session(_log({"t": 10.5, "kind": "audio", "db": 40}))
    assert "duration" in str(exc.value)


def test_reorders_within_skew():
    session = parse_session(_log(
        {"t": 2.0, "kind": "audio", "db": 1},
        {"t": 1.5, "kind": "audio", "db": 2},
        {"t": 2.0, "kind": "emotion", "label": "sad"},
        {"t": 1.2, "kind": "audio", "db": 3},
    ), skew=1.0)
    assert [r.t for r in session.records] == [1.2, 1.5, 2.0, 2.0]
    # equal timestamps order by kind name
    assert [r.kind for r in session.records[2:]] == [RecordKind.AUDIO, RecordKind.EMOTION]


def test_landmarks_precede_pupils_at_equal_time():
    pupils = {"t": 1.0, "kind": "pupils", "left": [10, 5], "right": [30, 5]}
    landmarks = {"t": 1.0, "kind": "landmarks", "pts": [[float(i), 0.0] for i in range(68)]}
    for order in ([pupils, landmarks], [landmarks, pupils]):
        session = parse_session(_log(*order))
        assert [r.kind for r in session.records] == [RecordKind.LANDMARKS, RecordKind.PUPILS]


def test_disorder_beyond_skew_rejected():
    with pytest.raises(SessionFormatError) as exc:
        parse_session(_log(
            {"t": 5.0, "kind": "audio", "db": 1},
            {"t": 3.5, "kind": "audio", "db": 2},
        ), skew=1.0)
    assert exc.value.line_no == 3


def test_streaming_releases_records_before_end():
    lines = [json.dumps({"t": float(i), "kind": "audio", "db": 40}) for i in range(10)]
    stream = iter_records(iter(lines), skew=1.0)
    first = next(stream)
    assert first.t == 0.0


def test_permutations_within_skew_parse_identically(make_session):
    session = make_session(duration_s=6.0, fps=10)
    text = serialize_session(session)
    header, *lines = text.splitlines()
    times = [json.loads(line)["t"] for line in lines]
    rng = np.random.default_rng(7)
    for _ in range(20):
        keys = [t + rng.uniform(0, 0.99) for t in times]
        shuffled = [lines[i] for i in np.argsort(keys, kind="stable")]
        assert parse_session("\n".join([header, *shuffled])) == session


def test_serialize_round_trip(make_session):
    session = make_session(duration_s=4.0, spans=[{"type": "closure", "start": 1.0, "duration": 1.0}])
    assert parse_session(serialize_session(session)) == session


def test_blank_lines_are_skipped_but_counted():
    text = HEADER + "\n\n" + '{"t": 0.1, "kind": "bogus"}\n'
    with pytest.raises(SessionFormatError) as exc:
        parse_session(text)
    assert exc.value.line_no == 3


def test_write_and_load(tmp_path, make_session):
    session = make_session(duration_s=2.0)
    path = tmp_path / "nested" / "session.jsonl"
    write_session(session, path)
    assert load_session(path) == session

    header, records = open_session(path)
    assert header.subject == session.subject
    assert tuple(records) == session.records


def test_open_session_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        open_session(tmp_path / "nope.jsonl")


def test_replay_paces_records(make_session):
    session = make_session(duration_s=1.0, fps=10)
    now = [100.0]
    sleeps = []

    def clock():
        return now[0]

    def sleep(seconds):
        sleeps.append(seconds)
        now[0] += seconds

    out = list(replay(session.records, speed=2.0, clock=clock, sleep=sleep))
    assert out == list(session.records)
    assert sum(sleeps) == pytest.approx((session.records[-1].t - session.records[0].t) / 2.0)


def test_replay_unbounded_speed_does_not_sleep(make_session):
    session = make_session(duration_s=1.0, fps=10)

    def sleep(_):
        raise AssertionError("should not sleep")

    assert list(replay(session.records, sleep=sleep)) == list(session.records)


def test_replay_rejects_non_positive_speed():
    with pytest.raises(ValueError):
        list(replay([], speed=0))
