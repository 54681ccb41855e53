"""Simulator for event-triggered dynamic average consensus on switching digraphs."""

from .engine import (
    Comparison,
    RunRecord,
    Scenario,
    ScenarioError,
    Verdict,
    check_guarantees,
    guarantee_report,
    run,
    run_comparison,
)
from .graph import GraphSchedule, WeightedDigraph, laplacian
from .metrics import RunSummary, emit_plots, summarize
from .scenarios import load_scenario, save_scenario
from .triggers import Continuous, DirectedThreshold, Periodic, UndirectedRelative

__version__ = "0.1.0"
