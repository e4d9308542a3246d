"""
Shared fixtures for the test suite.
"""

import logging

import pytest

from config import Config
from models import Session
from synth import parse_scenario, synthesize

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


@pytest.fixture
def config() -> Config:
    return Config()


@pytest.fixture
def make_session():
    """Factory for synthetic sessions: make_session(duration_s, spans, seed=..., **script_fields)."""

    def _make(duration_s: float = 20.0, spans=(), seed: int = 1, **fields) -> Session:
        script = parse_scenario({"duration_s": duration_s, "spans": list(spans), **fields})
        return synthesize(script, seed)

    return _make
