"""
Tests for the scenario format and synthetic session generator.
"""

import json

import numpy as np
import pytest

from config import Config
from engine import score_session
from errors import ScenarioError
from models import ChannelId, RecordKind
from ocular import ear_batch
from session_io import serialize_session
from synth import (
    MAX_SEED,
    blink_starts,
    frame_times,
    load_scenario,
    parse_scenario,
    plan_behavior,
    scripted_truth,
    synthesize,
)


def _script(duration_s=10.0, spans=(), **fields):
    return parse_scenario({"duration_s": duration_s, "spans": list(spans), **fields})


def test_same_seed_gives_identical_bytes():
    script = _script(30.0, [{"type": "closure", "start": 4.0, "duration": 2.5}])
    first = serialize_session(synthesize(script, 12345))
    second = serialize_session(synthesize(script, 12345))
    assert first == second
    assert serialize_session(synthesize(script, 54321)) != first


def test_seed_range():
    script = _script()
    synthesize(script, MAX_SEED)
    with pytest.raises(ScenarioError):
        synthesize(script, MAX_SEED + 1)
    with pytest.raises(ScenarioError):
        synthesize(script, -1)


def test_empty_script_has_baseline_frames():
    session = synthesize(_script(10.0), 1)
    kinds = {}
    for record in session.records:
        kinds[record.kind] = kinds.get(record.kind, 0) + 1
    assert kinds[RecordKind.LANDMARKS] == 300
    assert kinds[RecordKind.AUDIO] == 300
    assert kinds[RecordKind.IDENTITY] == 2
    assert kinds[RecordKind.OBSERVED] == 2
    assert all(r.t < 10.0 for r in session.records)


def test_records_are_time_ordered():
    session = synthesize(_script(12.0), 3)
    keys = [(r.t, r.kind.value) for r in session.records]
    assert keys == sorted(keys)


def test_frame_times():
    times = frame_times(_script(1.0, fps=4))
    assert times.tolist() == [0.0, 0.25, 0.5, 0.75]


def test_closure_span_is_closed_in_landmarks():
    script = _script(10.0, [{"type": "closure", "start": 3.0, "duration": 2.5}], baseline={"bpm": 0})
    session = synthesize(script, 8)
    frames = [r for r in session.records if r.kind == RecordKind.LANDMARKS]
    eyes = np.asarray([r.payload.points[36:48] for r in frames], dtype=float)
    mean = (ear_batch(eyes[:, :6]) + ear_batch(eyes[:, 6:])) / 2
    times = np.array([r.t for r in frames])
    inside = (times >= 3.0) & (times < 5.5)
    assert np.all(mean[inside] < 0.2)
    assert np.all(mean[~inside] >= 0.2)


def test_blinks_stay_clear_of_closures():
    script = _script(30.0, [{"type": "closure", "start": 7.0, "duration": 3.0}])
    for t in blink_starts(script):
        assert t + 0.15 + 0.5 <= 7.0 or t - 0.5 >= 10.0


def test_blink_burst_rate():
    script = _script(20.0, [{"type": "blink_burst", "start": 5.0, "end": 10.0, "bpm": 36}])
    starts = blink_starts(script)
    assert sum(1 for t in starts if 5.0 <= t < 10.0) == 3


def test_fast_blinking_scores_zero(config):
    script = _script(60.0, [{"type": "blink_burst", "start": 0.0, "end": 60.0, "bpm": 36}])
    session = synthesize(script, 5)
    timeline = score_session(session.header, session.records, config)
    assert len(timeline.points) == 12
    for point in timeline.points:
        assert point.contributions[ChannelId.BLINK] == 0.0


def test_plan_marks_spans():
    script = _script(10.0, [
        {"type": "gaze_away", "start": 1.0, "end": 2.0},
        {"type": "emotion", "start": 2.0, "end": 4.0, "label": "sad"},
        {"type": "noise", "start": 5.0, "end": 6.0, "db": 90},
        {"type": "fidget", "start": 6.0, "end": 8.0, "displacement": 0.4},
    ])
    plan = plan_behavior(script)
    t = plan.times
    assert np.all(plan.away[(t >= 1.0) & (t < 2.0)])
    assert not np.any(plan.away[t >= 2.0])
    assert {plan.labels[i].value for i in np.flatnonzero((t >= 2.0) & (t < 4.0))} == {"sad"}
    assert np.all(plan.db[(t >= 5.0) & (t < 6.0)] == 90)
    assert np.all(np.abs(plan.sway[(t >= 6.0) & (t < 8.0)]) == 20.0)


def test_scripted_truth_of_calm_session(config):
    truth = scripted_truth(_script(20.0, baseline={"bpm": 0, "emotion": "happy"}), config)
    assert truth == {0: 100.0, 1: 100.0, 2: 100.0, 3: 100.0}


def test_scripted_truth_drops_for_distraction(config):
    truth = scripted_truth(_script(20.0, [
        {"type": "gaze_away", "start": 5.0, "end": 10.0},
        {"type": "noise", "start": 10.0, "end": 15.0, "db": 75},
    ], baseline={"bpm": 0, "emotion": "happy"}), config)
    assert truth[0] == 100.0
    assert truth[1] == pytest.approx(80.0)
    assert truth[2] == pytest.approx(90.0)


def test_observer_noise_is_seeded_and_bounded():
    script = _script(20.0, observer_noise=5.0)
    a = synthesize(script, 1)
    b = synthesize(script, 1)
    observed = [r.payload.att for r in a.records if r.kind == RecordKind.OBSERVED]
    assert observed == [r.payload.att for r in b.records if r.kind == RecordKind.OBSERVED]
    assert all(0.0 <= v <= 100.0 for v in observed)


def test_identity_gap_and_impostor():
    script = _script(30.0, [
        {"type": "identity_gap", "start": 5.0, "end": 15.0},
        {"type": "impostor", "start": 20.0, "end": 25.0, "subject": "mallory"},
    ])
    identities = [r for r in synthesize(script, 2).records if r.kind == RecordKind.IDENTITY]
    assert [(r.t, r.payload.subject) for r in identities] == [
        (0.0, "student-01"),
        (15.0, "student-01"),
        (20.0, "mallory"),
        (25.0, "student-01"),
    ]


@pytest.mark.parametrize("spans,index", [
    ([{"type": "closure", "start": 9.0, "duration": 2.0}], 0),
    ([{"type": "gaze_away", "start": 1.0, "end": 2.0}, {"type": "noise", "start": 4.0, "end": 3.0, "db": 60}], 1),
    ([{"type": "blink_burst", "start": 1.0, "end": 2.0, "bpm": -3}], 0),
    ([{"type": "noise", "start": 1.0, "end": 2.0, "db": -1}], 0),
    ([{"type": "wiggle", "start": 1.0, "end": 2.0}], 0),
])
def test_invalid_spans_name_their_index(spans, index):
    with pytest.raises(ScenarioError) as exc:
        _script(10.0, spans)
    assert exc.value.span_index == index
    assert str(exc.value).startswith(f"span {index}:")


def test_invalid_script_fields():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario({"duration_s": -5})
    assert exc.value.span_index is None


def test_load_scenario(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"duration_s": 15, "spans": [{"type": "closure", "start": 1, "duration": 2.5}]}))
    script = load_scenario(path)
    assert script.duration_s == 15
    assert script.spans[0].end == 3.5

    path.write_text("{oops")
    with pytest.raises(ScenarioError):
        load_scenario(path)


def test_synth_respects_custom_window():
    cfg = Config(window={"length": 10.0})
    session = synthesize(_script(20.0), 4, cfg)
    observed = [r.t for r in session.records if r.kind == RecordKind.OBSERVED]
    assert observed == [5.0, 15.0]
