"""
Command-line interface.

Subcommands:
    run    replay a session with live rendering, then write the report
    score  batch-score a session (no rendering)
    eval   compare a report against a session's observed records
    synth  generate a synthetic session from a scenario script
    serve  start the HTTP scoring service

Exit codes: 0 success, 1 runtime/domain error, 2 input/usage error.
"""

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from config import CONFIG_ENV_VAR, Config, config_from_snapshot, load_config
from context_signals import LinearEmotionModel, load_emotion_model
from engine import MODES, AttentionEngine
from errors import INPUT_ERRORS, AttnPipeError, SessionFormatError
from evaluation import evaluate, observed_by_window, pair_series
from reporting import LiveRenderer, ReportWriter, RunReport, load_report
from session_io import load_session, open_session, replay, write_session
from synth import MAX_SEED, load_scenario, synthesize

logger = logging.getLogger(__name__)

PROG = "attnpipe"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _speed(value: str) -> float:
    if value.lower() in ("max", "inf"):
        return math.inf
    try:
        speed = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"speed must be a number or 'max', got {value!r}")
    if not speed > 0 or math.isnan(speed):
        raise argparse.ArgumentTypeError(f"speed must be positive, got {value!r}")
    return speed


def _seed(value: str) -> int:
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {value!r}")
    if not 0 <= seed <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config JSON (default: $ATTNPIPE_CONFIG, then built-in defaults)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")

    parser = argparse.ArgumentParser(prog=PROG, description="Multimodal attention scoring for lecture sessions")
    sub = parser.add_subparsers(dest="command", required=True)

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("session", help="session log (.jsonl)")
    scoring.add_argument("--workers", choices=MODES, default="threads", help="channel worker mode")
    scoring.add_argument("--emotion-model", help="linear emotion model JSON for feature-vector records")

    run = sub.add_parser("run", parents=[common, scoring], help="replay a session with live output")
    run.add_argument("--speed", type=_speed, default=1.0, help="replay multiplier or 'max' (default: 1)")
    run.add_argument("--no-bell", action="store_true", help="do not ring the terminal bell on drowsiness")
    run.set_defaults(handler=cmd_run)

    score = sub.add_parser("score", parents=[common, scoring], help="batch-score a session")
    score.set_defaults(handler=cmd_score)

    ev = sub.add_parser("eval", parents=[common], help="evaluate a report against observed scores")
    ev.add_argument("report", help="report.json from run/score")
    ev.add_argument("session", help="session log with observed records")
    ev.set_defaults(handler=cmd_eval)

    syn = sub.add_parser("synth", parents=[common], help="generate a synthetic session")
    syn.add_argument("scenario", help="scenario script JSON")
    syn.add_argument("--seed", type=_seed, default=0, help="64-bit seed (default: 0)")
    syn.set_defaults(handler=cmd_synth)

    serve = sub.add_parser("serve", parents=[common], help="start the HTTP scoring service")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=int(os.environ.get("PORT", 8000)))
    serve.set_defaults(handler=cmd_serve)

    return parser


def _emotion_model(args, config: Config) -> Optional[LinearEmotionModel]:
    path = args.emotion_model or config.emotion_model_path
    return load_emotion_model(path) if path else None


def _score(args, config: Config, speed: float, renderer: Optional[LiveRenderer]) -> RunReport:
    header, records = open_session(args.session, config.watermark_skew)
    engine = AttentionEngine(config, header, mode=args.workers, emotion_model=_emotion_model(args, config))
    started = time.perf_counter()
    for event in engine.run(replay(records, speed)):
        if renderer is not None:
            renderer.handle(event)
    run_meta = {
        "workers": args.workers,
        "speed": "max" if math.isinf(speed) else speed,
        "records": engine.record_count,
        "wall_seconds": round(time.perf_counter() - started, 6),
    }
    return RunReport.from_timeline(header, engine.result(), config.snapshot(), run_meta)


def _summary(report: RunReport) -> str:
    parts = [f"{len(report.points)} windows"]
    if report.points:
        mean_att = sum(p.att for p in report.points) / len(report.points)
        parts.append(f"mean att {mean_att:.1f}")
    drowsy = sum(1 for a in report.alerts if a.final)
    parts.append(f"{drowsy} drowsiness alert{'s' if drowsy != 1 else ''}")
    if report.attendance is not None:
        status = "present" if report.attendance.present else "absent"
        parts.append(f"attendance {report.attendance.coverage:.0%} ({status})")
    return ", ".join(parts)


def cmd_run(args) -> int:
    config = load_config(args.config)
    renderer = LiveRenderer(bell=not args.no_bell)
    report = _score(args, config, args.speed, renderer)
    path = ReportWriter(args.out).write_run(report)
    renderer.console.print(f"{_summary(report)} -> {path}", highlight=False)
    return 0


def cmd_score(args) -> int:
    config = load_config(args.config)
    report = _score(args, config, math.inf, None)
    path = ReportWriter(args.out).write_run(report)
    print(f"{_summary(report)} -> {path}")
    return 0


def cmd_eval(args) -> int:
    report = load_report(args.report)
    # the report's own snapshot defines the windows its predictions live on
    config = config_from_snapshot(report.config) if report.config else load_config(args.config)
    session = load_session(args.session, config.watermark_skew)
    observed = observed_by_window(session.records, config.window)
    series = pair_series(report.points, observed)
    metrics = evaluate(series)
    path = ReportWriter(args.out).write_metrics(
        metrics.to_dict(), series.windows, series.predicted, series.observed
    )
    r2_text = f"{metrics.r2:.4f}" if metrics.r2 is not None else "undefined"
    print(
        f"rmse {metrics.rmse:.4f}  mae {metrics.mae:.4f}  r2 {r2_text}  "
        f"mape {metrics.mape:.4f}%  over {metrics.n_windows} windows -> {path}"
    )
    return 0


def cmd_synth(args) -> int:
    config = load_config(args.config)
    script = load_scenario(args.scenario)
    session = synthesize(script, args.seed, config)
    path = Path(args.out) / "session.jsonl"
    write_session(session, path)
    print(f"{len(session.records)} records over {session.duration_s}s -> {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    if args.config:
        os.environ[CONFIG_ENV_VAR] = args.config
    from api import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _fail(code: int, message: str) -> int:
    print(f"{PROG}: error: {message}", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        return args.handler(args)
    except OSError as e:
        target = e.filename if e.filename is not None else ""
        return _fail(2, f"cannot access {target}: {e.strerror or e}")
    except SessionFormatError as e:
        return _fail(2, f"{args.session}: {e}")
    except INPUT_ERRORS as e:
        return _fail(2, str(e))
    except AttnPipeError as e:
        logger.debug("Command failed", exc_info=True)
        return _fail(1, str(e))
    except KeyboardInterrupt:
        return _fail(130, "interrupted")
