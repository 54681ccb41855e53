from __future__ import annotations

import functools

import numpy as np
import pytest
from hypothesis import settings

from etconsensus import engine
from etconsensus import scenarios as S

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")


@functools.lru_cache(maxsize=None)
def figure_runs(fig: str, h: float = 1e-3):
    """Runs of a built-in figure study, cached across the session."""
    return tuple(engine.run(sc) for sc in S.FIGURES[fig](h))


@functools.lru_cache(maxsize=None)
def directed_ring_run(h: float = 1e-3):
    sc = S.directed_ring(h).replace(x0=S._start_at_inputs(S.oscillating_inputs()))
    return engine.run(sc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
