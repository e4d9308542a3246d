"""
FastAPI web application for the attention scoring service.

Accepts session logs over HTTP, scores them in batch and returns the
per-window attention report or agreement metrics against the session's
own observed records.
"""

import logging
import os
from contextlib import asynccontextmanager
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from config import CONFIG_ENV_VAR, Config, load_config
from engine import score_session
from errors import INPUT_ERRORS, AttnPipeError
from evaluation import evaluate, observed_by_window, pair_series
from models import SCORING_CHANNELS, Session
from reporting import RunReport
from session_io import parse_session

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

_config: Optional[Config] = None


def get_config() -> Config:
    """Config loaded at startup ($ATTNPIPE_CONFIG or defaults)."""
    global _config
    if _config is None:
        _config = load_config()
    return _config


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Load configuration on startup."""
    logger.info("Loading configuration...")
    config = get_config()
    logger.info(f"Configuration loaded (window {config.window.length}s)")
    yield
    logger.info("Shutting down...")


app = FastAPI(
    title="Attention Scoring API",
    description="Scores multimodal lecture-session logs into per-window attention",
    version=VERSION,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models for API responses
class WindowResponse(BaseModel):
    window: int
    start: float
    end: float
    partial: bool
    scores: Dict[str, Optional[float]]
    n: int
    att: float


class AlertResponse(BaseModel):
    kind: str
    t: float
    duration: float
    detected_at: float
    ended_at: Optional[float] = None
    final: bool


class AttendanceResponse(BaseModel):
    subject: str
    verified_intervals: List[List[float]]
    coverage: float
    present: bool


class ScoreResponse(BaseModel):
    subject: str
    duration_s: float
    windows: List[WindowResponse]
    alerts: List[AlertResponse] = Field(default_factory=list)
    attendance: Optional[AttendanceResponse] = None
    identity_warnings: int = 0
    config: dict


class MetricsResponse(BaseModel):
    rmse: float
    mae: float
    r2: Optional[float] = None
    mape: float
    n_windows: int


def report_to_response(report: RunReport) -> ScoreResponse:
    """Convert a RunReport to the API response model."""
    ledger = report.attendance
    return ScoreResponse(
        subject=report.subject,
        duration_s=report.duration_s,
        windows=[
            WindowResponse(
                window=p.window,
                start=p.start,
                end=p.end,
                partial=p.partial,
                scores={ch.value: p.contributions.get(ch) for ch in SCORING_CHANNELS},
                n=p.n,
                att=p.att,
            )
            for p in report.points
        ],
        alerts=[
            AlertResponse(
                kind=a.kind.value,
                t=a.t,
                duration=a.duration,
                detected_at=a.detected_at,
                ended_at=a.ended_at,
                final=a.final,
            )
            for a in report.alerts
        ],
        attendance=AttendanceResponse(
            subject=ledger.subject,
            verified_intervals=[list(iv) for iv in ledger.verified_intervals],
            coverage=ledger.coverage,
            present=ledger.present,
        ) if ledger else None,
        identity_warnings=len(report.warnings),
        config=report.config,
    )


def _score_text(text: str, config: Config) -> tuple[Session, RunReport]:
    session = parse_session(text, config.watermark_skew)
    timeline = score_session(session.header, session.records, config)
    report = RunReport.from_timeline(session.header, timeline, config.snapshot(), {"workers": "inline"})
    return session, report


def _http_error(e: Exception, action: str) -> HTTPException:
    if isinstance(e, INPUT_ERRORS):
        return HTTPException(status_code=400, detail=str(e))
    if isinstance(e, AttnPipeError):
        return HTTPException(status_code=422, detail=str(e))
    logger.error(f"Error {action}: {e}", exc_info=True)
    return HTTPException(status_code=500, detail=f"Error {action}: {str(e)}")


async def _read_body(request: Request) -> str:
    raw = await request.body()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="session log must be UTF-8 text")


@app.get("/", tags=["Health"])
async def root():
    """Health check endpoint."""
    return {
        "status": "ok",
        "service": "Attention Scoring API",
        "version": VERSION,
    }


@app.get("/health", tags=["Health"])
async def health():
    """Detailed health check."""
    config = get_config()
    return {
        "status": "healthy",
        "config_source": os.getenv(CONFIG_ENV_VAR) or "defaults",
        "window_length_s": config.window.length,
        "fixed_n": config.fixed_n,
    }


@app.get("/api/config/default", tags=["Config"])
async def default_config():
    """Default configuration snapshot."""
    return Config().snapshot()


@app.post("/api/score", response_model=ScoreResponse, tags=["Scoring"])
async def score(request: Request):
    """
    Score a session log.

    The request body is the session log text: a header line followed by
    one JSON record per line.
    """
    text = await _read_body(request)
    try:
        _, report = _score_text(text, get_config())
    except Exception as e:
        raise _http_error(e, "scoring session")
    logger.info(f"Scored {len(report.points)} windows for {report.subject}")
    return report_to_response(report)


@app.post("/api/evaluate", response_model=MetricsResponse, tags=["Scoring"])
async def evaluate_session(request: Request):
    """Score a session log and compare it with its own observed records."""
    text = await _read_body(request)
    config = get_config()
    try:
        session, report = _score_text(text, config)
        series = pair_series(report.points, observed_by_window(session.records, config.window))
        metrics = evaluate(series)
    except Exception as e:
        raise _http_error(e, "evaluating session")
    return MetricsResponse(**metrics.to_dict())


if __name__ == "__main__":
    import uvicorn
    port = int(os.environ.get("PORT", 8000))
    uvicorn.run(app, host="0.0.0.0", port=port)
