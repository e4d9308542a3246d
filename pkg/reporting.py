"""
Run reports, plots and live terminal rendering.

A RunReport is the durable output of a scoring run: per-window rows,
alerts, the attendance ledger and the config snapshot that produced them.
Timing metadata lives under "run" and is the only part that may differ
between two runs of the same session.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from lxml import etree
from rich.console import Console
from rich.text import Text

from errors import ReportFormatError
from models import (
    SCORING_CHANNELS,
    AlertEvent,
    AlertKind,
    AttendanceLedger,
    AttentionPoint,
    ChannelId,
    IdentityWarning,
    SessionHeader,
    Timeline,
)

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
WINDOWS_FILE = "windows.csv"
TIMELINE_FILE = "timeline.svg"
METRICS_FILE = "metrics.json"
METRICS_CSV_FILE = "metrics.csv"
EVAL_PLOT_FILE = "eval.svg"

SVG_NS = "http://www.w3.org/2000/svg"
SERIES_COLORS: Dict[str, str] = {
    "blink": "#1f77b4",
    "gaze": "#ff7f0e",
    "emotion": "#2ca02c",
    "posture": "#9467bd",
    "noise": "#8c564b",
    "att": "#d62728",
    "predicted": "#d62728",
    "observed": "#1f77b4",
}

SPARK_CHARS = "▁▂▃▄▅▆▇█"
SPARKLINE_WIDTH = 24
BELL = "\a"


@dataclass
class RunReport:
    """Everything written to report.json."""
    subject: str
    duration_s: float
    points: List[AttentionPoint]
    alerts: List[AlertEvent] = field(default_factory=list)
    warnings: List[IdentityWarning] = field(default_factory=list)
    attendance: Optional[AttendanceLedger] = None
    config: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    @classmethod
    def from_timeline(
        cls,
        header: SessionHeader,
        timeline: Timeline,
        config_snapshot: dict,
        run: Optional[dict] = None,
    ) -> "RunReport":
        return cls(
            subject=header.subject,
            duration_s=header.duration_s,
            points=list(timeline.points),
            alerts=list(timeline.alerts),
            warnings=list(timeline.warnings),
            attendance=timeline.attendance,
            config=config_snapshot,
            run=dict(run or {}),
        )

    def to_dict(self, include_run: bool = True) -> dict:
        data = {
            "session": {"subject": self.subject, "duration_s": self.duration_s},
            "windows": [_point_to_dict(p) for p in self.points],
            "alerts": [_alert_to_dict(a) for a in self.alerts],
            "warnings": [
                {"t": w.t, "subject": w.subject, "expected": w.expected} for w in self.warnings
            ],
            "attendance": _ledger_to_dict(self.attendance) if self.attendance else None,
            "config": self.config,
        }
        if include_run:
            data["run"] = self.run
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        ledger = data.get("attendance")
        return cls(
            subject=data["session"]["subject"],
            duration_s=data["session"]["duration_s"],
            points=[_dict_to_point(row) for row in data.get("windows", [])],
            alerts=[_dict_to_alert(a) for a in data.get("alerts", [])],
            warnings=[
                IdentityWarning(t=w["t"], subject=w["subject"], expected=w["expected"])
                for w in data.get("warnings", [])
            ],
            attendance=_dict_to_ledger(ledger) if ledger else None,
            config=data.get("config", {}),
            run=data.get("run", {}),
        )

    def to_json(self, include_run: bool = True) -> str:
        return json.dumps(self.to_dict(include_run), indent=2) + "\n"


def _point_to_dict(point: AttentionPoint) -> dict:
    return {
        "window": point.window,
        "start": point.start,
        "end": point.end,
        "partial": point.partial,
        "scores": {ch.value: point.contributions.get(ch) for ch in SCORING_CHANNELS},
        "n": point.n,
        "att": point.att,
    }


def _dict_to_point(data: dict) -> AttentionPoint:
    contributions = {
        ChannelId(name): value for name, value in data["scores"].items() if value is not None
    }
    return AttentionPoint(
        window=data["window"],
        att=data["att"],
        contributions=contributions,
        n=data["n"],
        partial=data["partial"],
        start=data["start"],
        end=data["end"],
    )


def _alert_to_dict(alert: AlertEvent) -> dict:
    return {
        "kind": alert.kind.value,
        "t": alert.t,
        "duration": alert.duration,
        "detected_at": alert.detected_at,
        "ended_at": alert.ended_at,
        "final": alert.final,
    }


def _dict_to_alert(data: dict) -> AlertEvent:
    return AlertEvent(
        t=data["t"],
        duration=data["duration"],
        detected_at=data["detected_at"],
        kind=AlertKind(data["kind"]),
        final=data["final"],
        ended_at=data.get("ended_at"),
    )


def _ledger_to_dict(ledger: AttendanceLedger) -> dict:
    return {
        "subject": ledger.subject,
        "verified_intervals": [list(iv) for iv in ledger.verified_intervals],
        "coverage": ledger.coverage,
        "present": ledger.present,
    }


def _dict_to_ledger(data: dict) -> AttendanceLedger:
    return AttendanceLedger(
        subject=data["subject"],
        verified_intervals=tuple((a, b) for a, b in data["verified_intervals"]),
        coverage=data["coverage"],
        present=data["present"],
    )


def load_report(path: Union[str, Path]) -> RunReport:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ReportFormatError(f"report {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ReportFormatError(f"report {path} must be a JSON object")
    try:
        return RunReport.from_dict(data)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ReportFormatError(f"report {path} is malformed: {e!r}") from e


def windows_csv(points: Sequence[AttentionPoint]) -> str:
    """Per-window table; absent channels are empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window", "start", "end", *[ch.value for ch in SCORING_CHANNELS], "att", "n", "partial"])
    for p in points:
        scores = [p.contributions.get(ch, "") for ch in SCORING_CHANNELS]
        writer.writerow([p.window, p.start, p.end, *scores, p.att, p.n, str(p.partial).lower()])
    return buf.getvalue()


def metrics_csv(windows: Sequence[int], predicted: Sequence[float], observed: Sequence[float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window", "predicted", "observed", "error"])
    for k, p, o in zip(windows, predicted, observed):
        writer.writerow([k, float(p), float(o), float(p) - float(o)])
    return buf.getvalue()


# SVG

def _el(parent, tag: str, text: Optional[str] = None, **attrs):
    node = etree.SubElement(parent, f"{{{SVG_NS}}}{tag}")
    for key, value in attrs.items():
        node.set(key.replace("_", "-"), str(value))
    if text is not None:
        node.text = text
    return node


def _line_chart(
    series: Dict[str, List[Optional[float]]],
    labels: Sequence[int],
    title: str,
    width: int = 900,
    height: int = 320,
) -> bytes:
    """
    Render value series (0..100) sharing an x axis as an SVG document.

    Missing values are drawn at 0 and listed in the polyline's data-missing
    attribute so every series keeps one vertex per label.
    """
    left, right, top, bottom = 48, 110, 30, 36
    plot_w = width - left - right
    plot_h = height - top - bottom
    count = len(labels)

    def x_at(i: int) -> float:
        if count <= 1:
            return left + plot_w / 2
        return left + plot_w * i / (count - 1)

    def y_at(v: float) -> float:
        return top + plot_h * (1 - v / 100.0)

    root = etree.Element(f"{{{SVG_NS}}}svg", nsmap={None: SVG_NS})
    root.set("width", str(width))
    root.set("height", str(height))
    root.set("viewBox", f"0 0 {width} {height}")
    _el(root, "title", title)
    _el(root, "rect", x=0, y=0, width=width, height=height, fill="#ffffff")

    axes = _el(root, "g", **{"class": "axes"})
    _el(axes, "line", x1=left, y1=top + plot_h, x2=left + plot_w, y2=top + plot_h, stroke="#444444")
    _el(axes, "line", x1=left, y1=top, x2=left, y2=top + plot_h, stroke="#444444")
    for tick in (0, 25, 50, 75, 100):
        y = y_at(tick)
        _el(axes, "line", x1=left - 4, y1=f"{y:.2f}", x2=left, y2=f"{y:.2f}", stroke="#444444")
        _el(axes, "text", str(tick), x=left - 8, y=f"{y + 4:.2f}", text_anchor="end", font_size=10)
    if count:
        _el(axes, "text", f"window {labels[0]}", x=left, y=height - 10, font_size=10)
        _el(axes, "text", f"window {labels[-1]}", x=left + plot_w, y=height - 10, text_anchor="end", font_size=10)

    legend = _el(root, "g", **{"class": "legend"})
    for i, (name, values) in enumerate(series.items()):
        color = SERIES_COLORS.get(name, "#000000")
        coords = []
        missing = []
        for j, value in enumerate(values):
            if value is None:
                missing.append(str(labels[j]))
                value = 0.0
            coords.append(f"{x_at(j):.2f},{y_at(value):.2f}")
        line = _el(
            root,
            "polyline",
            points=" ".join(coords),
            fill="none",
            stroke=color,
            stroke_width=2 if name in ("att", "predicted") else 1,
            **{"class": "series", "data-series": name},
        )
        if missing:
            line.set("data-missing", " ".join(missing))
        y = top + 14 * i
        _el(legend, "rect", x=width - right + 10, y=y, width=10, height=10, fill=color)
        _el(legend, "text", name, x=width - right + 26, y=y + 9, font_size=11)

    return etree.tostring(root, pretty_print=True, xml_declaration=True, encoding="utf-8")


def timeline_svg(points: Sequence[AttentionPoint]) -> bytes:
    """One polyline per channel present in any window, plus the att series."""
    present = [ch for ch in SCORING_CHANNELS if any(ch in p.contributions for p in points)]
    series: Dict[str, List[Optional[float]]] = {}
    for ch in present:
        series[ch.value] = [
            100.0 * p.contributions[ch] if ch in p.contributions else None for p in points
        ]
    series["att"] = [p.att for p in points]
    return _line_chart(series, [p.window for p in points], "Attention timeline")


def eval_svg(windows: Sequence[int], predicted: Sequence[float], observed: Sequence[float]) -> bytes:
    series = {
        "predicted": [float(v) for v in predicted],
        "observed": [float(v) for v in observed],
    }
    return _line_chart(series, list(windows), "Predicted vs observed attention")


class ReportWriter:
    """Writes run and evaluation outputs into one directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_run(self, report: RunReport) -> Path:
        (self.out_dir / REPORT_FILE).write_text(report.to_json(), encoding="utf-8")
        (self.out_dir / WINDOWS_FILE).write_text(windows_csv(report.points), encoding="utf-8")
        (self.out_dir / TIMELINE_FILE).write_bytes(timeline_svg(report.points))
        logger.info(f"Wrote {len(report.points)} windows to {self.out_dir}")
        return self.out_dir / REPORT_FILE

    def write_metrics(self, metrics: dict, windows, predicted, observed) -> Path:
        (self.out_dir / METRICS_FILE).write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
        (self.out_dir / METRICS_CSV_FILE).write_text(
            metrics_csv(windows, predicted, observed), encoding="utf-8"
        )
        (self.out_dir / EVAL_PLOT_FILE).write_bytes(eval_svg(windows, predicted, observed))
        logger.info(f"Wrote metrics for {len(windows)} windows to {self.out_dir}")
        return self.out_dir / METRICS_FILE


# Live rendering

def sparkline(values: Sequence[float], lo: float = 0.0, hi: float = 100.0) -> str:
    """Block-character sparkline on a fixed [lo, hi] scale."""
    top = len(SPARK_CHARS) - 1
    chars = []
    for v in values:
        frac = (min(max(v, lo), hi) - lo) / (hi - lo)
        chars.append(SPARK_CHARS[round(frac * top)])
    return "".join(chars)


def format_point(point: AttentionPoint) -> str:
    scores = []
    for ch in SCORING_CHANNELS:
        value = point.contributions.get(ch)
        scores.append(f"{ch.value} {value:.2f}" if value is not None else f"{ch.value} -")
    flag = " (partial)" if point.partial else ""
    return f"{point.start:7.1f}s  " + "  ".join(scores) + f"  att {point.att:5.1f}{flag}"


class LiveRenderer:
    """
    Prints scoring events as they arrive.

    One line per fused window with a sparkline of recent att values; a
    marked line and the terminal bell for each drowsiness onset.
    """

    def __init__(
        self,
        console: Optional[Console] = None,
        bell: bool = True,
        history: int = SPARKLINE_WIDTH,
    ):
        self.console = console or Console(highlight=False)
        self.bell = bell
        self.history = history
        self.recent: List[float] = []

    def handle(self, event) -> None:
        if isinstance(event, AttentionPoint):
            self.render_point(event)
        elif isinstance(event, AlertEvent):
            if not event.final:
                self.render_alert(event)
        elif isinstance(event, IdentityWarning):
            self.render_warning(event)

    def render_point(self, point: AttentionPoint) -> None:
        self.recent.append(point.att)
        self.recent = self.recent[-self.history:]
        line = Text(format_point(point))
        line.append("  ")
        line.append(sparkline(self.recent), style="cyan")
        self.console.print(line, soft_wrap=True)

    def render_alert(self, alert: AlertEvent) -> None:
        self.console.print(
            Text(
                f"!! DROWSINESS at {alert.detected_at:.1f}s: eyes closed since {alert.t:.1f}s",
                style="bold red",
            ),
            soft_wrap=True,
        )
        if self.bell:
            # rich strips control codes from printed text
            self.console.file.write(BELL)
            self.console.file.flush()

    def render_warning(self, warning: IdentityWarning) -> None:
        self.console.print(
            Text(
                f"?? identity at {warning.t:.1f}s is {warning.subject!r}, expected {warning.expected!r}",
                style="yellow",
            ),
            soft_wrap=True,
        )
