"""
Tests for the streaming attention engine.
"""

import json

import numpy as np
import pytest

from context_signals import LinearEmotionModel
from engine import AttentionEngine, score_session
from errors import AttnPipeError, ModelError
from models import (
    AlertEvent,
    AttentionPoint,
    ChannelId,
    EmotionLabel,
    EmotionPayload,
    FeatureRecord,
    IdentityWarning,
    RecordKind,
    SessionHeader,
)
from session_io import parse_session, serialize_session

CLOSURE_2_5 = {"type": "closure", "start": 6.0, "duration": 2.5}


def _score(session, config, mode="inline", **kwargs):
    return score_session(session.header, session.records, config, mode=mode, **kwargs)


def test_long_session_has_one_point_per_window(make_session, config):
    session = make_session(duration_s=500.0, fps=10)
    timeline = _score(session, config)
    assert len(timeline.points) == 100
    assert [p.window for p in timeline.points] == list(range(100))
    assert all(p.n == 5 for p in timeline.points)
    assert not any(p.partial for p in timeline.points)


def test_empty_session(config):
    timeline = score_session(SessionHeader("s1", 30.0), [], config)
    assert timeline.points == []
    assert timeline.alerts == []
    assert timeline.attendance.coverage == 0.0
    assert not timeline.attendance.present


def test_short_closure_is_not_drowsiness(make_session, config):
    session = make_session(spans=[{"type": "closure", "start": 6.0, "duration": 1.9}])
    timeline = _score(session, config)
    assert timeline.alerts == []


def test_long_closure_raises_one_alert_and_zeroes_blink(make_session, config):
    session = make_session(spans=[CLOSURE_2_5])
    timeline = _score(session, config)

    assert len(timeline.alerts) == 1
    alert = timeline.alerts[0]
    assert alert.final
    assert alert.t == 6.0
    assert alert.ended_at == 8.5
    assert alert.duration > 2.0
    assert 8.0 < alert.detected_at < 8.5

    by_window = {p.window: p for p in timeline.points}
    assert by_window[1].contributions[ChannelId.BLINK] == 0.0
    assert by_window[0].contributions[ChannelId.BLINK] > 0.0
    assert by_window[2].contributions[ChannelId.BLINK] > 0.0


def test_closure_across_window_boundary(make_session, config):
    session = make_session(spans=[{"type": "closure", "start": 8.0, "duration": 3.0}])
    timeline = _score(session, config)
    by_window = {p.window: p for p in timeline.points}
    assert by_window[1].contributions[ChannelId.BLINK] == 0.0
    assert by_window[2].contributions[ChannelId.BLINK] == 0.0
    assert len(timeline.alerts) == 1


def test_onset_is_streamed_before_final_alert(make_session, config):
    session = make_session(spans=[CLOSURE_2_5])
    engine = AttentionEngine(config, session.header, mode="inline")
    alerts = [e for e in engine.run(session.records) if isinstance(e, AlertEvent)]
    assert [a.final for a in alerts] == [False, True]
    assert alerts[0].t == alerts[1].t


def test_points_stream_before_input_ends(make_session, config):
    session = make_session(duration_s=30.0, fps=10)
    consumed = [0]

    def records():
        for record in session.records:
            consumed[0] += 1
            yield record

    engine = AttentionEngine(config, session.header, mode="inline")
    for event in engine.run(records()):
        if isinstance(event, AttentionPoint):
            assert event.window == 0
            assert consumed[0] < len(session.records)
            break


def test_threads_and_inline_agree(make_session, config):
    session = make_session(
        duration_s=40.0,
        spans=[
            CLOSURE_2_5,
            {"type": "gaze_away", "start": 12.0, "end": 17.0},
            {"type": "fidget", "start": 20.0, "end": 30.0, "displacement": 0.2},
            {"type": "noise", "start": 25.0, "end": 35.0, "db": 80},
            {"type": "emotion", "start": 30.0, "end": 40.0, "label": "sad"},
        ],
    )
    inline = _score(session, config, mode="inline")
    threaded = _score(session, config, mode="threads")
    assert threaded.points == inline.points
    assert threaded.alerts == inline.alerts
    assert threaded.attendance == inline.attendance


def test_permuted_logs_give_identical_timelines(make_session, config):
    session = make_session(duration_s=20.0, fps=10, spans=[CLOSURE_2_5])
    expected = _score(session, config)
    header, *lines = serialize_session(session).splitlines()
    times = [json.loads(line)["t"] for line in lines]

    rng = np.random.default_rng(99)
    for i in range(100):
        keys = [t + rng.uniform(0, 0.99) for t in times]
        shuffled = [lines[j] for j in np.argsort(keys, kind="stable")]
        parsed = parse_session("\n".join([header, *shuffled]))
        timeline = _score(parsed, config, mode="threads" if i % 10 == 0 else "inline")
        assert timeline.points == expected.points
        assert timeline.alerts == expected.alerts


def test_engine_tracks_scripted_attention(make_session, config):
    session = make_session(
        duration_s=60.0,
        spans=[
            {"type": "blink_burst", "start": 10.0, "end": 20.0, "bpm": 30},
            {"type": "gaze_away", "start": 25.0, "end": 28.0},
            {"type": "noise", "start": 40.0, "end": 50.0, "db": 70},
        ],
    )
    timeline = _score(session, config)
    observed = {}
    for record in session.records:
        if record.kind == RecordKind.OBSERVED:
            observed[int(record.t // 5)] = record.payload.att
    assert len(observed) == len(timeline.points) == 12
    for point in timeline.points:
        assert point.att == pytest.approx(observed[point.window], abs=1.0)


def test_partial_tail_window(make_session, config):
    timeline = _score(make_session(duration_s=12.0), config)
    assert [p.window for p in timeline.points] == [0, 1, 2]
    assert [p.partial for p in timeline.points] == [False, False, True]


def test_impostor_warnings_are_streamed(make_session, config):
    session = make_session(
        duration_s=30.0,
        spans=[{"type": "impostor", "start": 10.0, "end": 20.0, "subject": "mallory"}],
    )
    engine = AttentionEngine(config, session.header, mode="inline")
    warnings = [e for e in engine.run(session.records) if isinstance(e, IdentityWarning)]
    assert [w.t for w in warnings] == [10.0, 15.0]
    assert all(w.subject == "mallory" for w in warnings)

    timeline = engine.result()
    assert len(timeline.warnings) == 2
    assert timeline.attendance.coverage == pytest.approx(20.0 / 30.0)
    assert not timeline.attendance.present


def test_observed_records_do_not_score(make_session, config):
    session = make_session(duration_s=10.0)
    engine = AttentionEngine(config, session.header, mode="inline")
    list(engine.run(session.records))
    assert len(engine.observed_records) == 2
    assert engine.record_count == len(session.records)


def _with_feature_emotions(session):
    records = []
    for record in session.records:
        if record.kind == RecordKind.EMOTION:
            record = FeatureRecord(record.t, RecordKind.EMOTION, EmotionPayload(features=(1.0, 0.5)))
        records.append(record)
    return records


@pytest.mark.parametrize("mode", ["inline", "threads"])
def test_features_without_model_fail(make_session, config, mode):
    session = make_session(duration_s=10.0)
    with pytest.raises(ModelError):
        score_session(session.header, _with_feature_emotions(session), config, mode=mode)


def test_features_are_classified_with_model(make_session, config):
    session = make_session(duration_s=10.0)
    weights = np.zeros((7, 2))
    weights[4] = 1.0  # sad
    model = LinearEmotionModel(weights=weights, bias=np.zeros(7))
    timeline = score_session(
        session.header, _with_feature_emotions(session), config, emotion_model=model
    )
    sad = config.emotion_score_table[EmotionLabel.SAD]
    assert timeline.points
    for point in timeline.points:
        assert point.contributions[ChannelId.EMOTION] == pytest.approx(sad)


def test_engine_lifecycle(make_session, config):
    session = make_session(duration_s=5.0)
    engine = AttentionEngine(config, session.header, mode="inline")
    with pytest.raises(AttnPipeError):
        engine.result()
    list(engine.run(session.records))
    engine.result()
    with pytest.raises(AttnPipeError):
        list(engine.run(session.records))


def test_unknown_mode(config):
    with pytest.raises(ValueError):
        AttentionEngine(config, SessionHeader("s1", 5.0), mode="processes")
