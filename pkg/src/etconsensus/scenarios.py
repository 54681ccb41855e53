"""Scenario files (JSON) and the built-in reproduction scenarios.

A scenario file looks like::

    {
      "name": "ring",
      "alpha": 1.0, "beta": 4.0, "horizon": 20.0, "h": 0.001,
      "schedule": {"segments": [{"start": 0, "graph": {"kind": "ring", "n": 5}}]},
      "signals": [{"kind": "sin", "amp": 0.5, "freq": 0.8}, ...],
      "trigger": {"law": "undirected", "eps": [0.2828, ...]},
      "x0": [...], "v0": [...],
      "integrator": "rk4", "formulation": "direct"
    }

``x0``/``v0`` default to zeros.  Agents are indexed from 0.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import graph as gr
from .engine import Scenario, ScenarioError
from .signals import Atan, Const, Cos, Exp, Rational, Sin, SignalError, Sum, from_dict
from .triggers import (
    Continuous,
    DirectedThreshold,
    Periodic,
    TriggerError,
    UndirectedRelative,
    law_from_dict,
)

N_AGENTS = 5


def scenario_from_dict(d: dict) -> Scenario:
    try:
        horizon = float(d["horizon"])
        schedule = gr.schedule_from_dict(d["schedule"], horizon)
        signals = tuple(from_dict(s) for s in d["signals"])
        trigger = law_from_dict(d["trigger"], schedule.n)
        return Scenario(
            schedule=schedule,
            signals=signals,
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            trigger=trigger,
            horizon=horizon,
            h=float(d.get("h", 1e-3)),
            x0=d.get("x0"),
            v0=d.get("v0"),
            integrator=d.get("integrator", "rk4"),
            formulation=d.get("formulation", "direct"),
            event_location=d.get("event_location", "dense"),
            switch_resample=bool(d.get("switch_resample", False)),
            name=d.get("name", "scenario"),
            rho=d.get("rho"),
            lambda_sigma=d.get("lambda_sigma"),
            require_certified=bool(d.get("require_certified", False)),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario missing field {exc}") from None
    except (gr.GraphError, SignalError, TriggerError, TypeError) as exc:
        raise ScenarioError(str(exc)) from None


def scenario_to_dict(sc: Scenario) -> dict:
    d = {
        "name": sc.name,
        "alpha": sc.alpha,
        "beta": sc.beta,
        "horizon": sc.horizon,
        "h": sc.h,
        "schedule": gr.schedule_to_dict(sc.schedule),
        "signals": [s.to_dict() for s in sc.signals],
        "trigger": sc.trigger.to_dict(),
        "x0": list(sc.x0),
        "v0": list(sc.v0),
        "integrator": sc.integrator,
        "formulation": sc.formulation,
        "event_location": sc.event_location,
        "switch_resample": sc.switch_resample,
        "require_certified": sc.require_certified,
    }
    if sc.rho is not None:
        d["rho"] = sc.rho
    if sc.lambda_sigma is not None:
        d["lambda_sigma"] = sc.lambda_sigma
    return d


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2))


# -- built-in scenarios -------------------------------------------------------


def oscillating_inputs():
    """Five slowly varying inputs used on the directed and undirected rings."""
    return (
        Sin(0.5, 0.8),
        Sum((Sin(0.5, 0.7), Cos(0.5, 0.6))),
        Sum((Sin(1.0, 0.2), Const(1.0))),
        Atan(0.5),
        Cos(0.1, 2.0),
    )


def offset_inputs():
    """Common sinusoid plus agent-specific decaying offsets."""
    s = Sin(0.5, 1.0)
    return (
        Sum((s, Rational(2.0, 1.0), Const(2.0))),
        Sum((s, Rational(2.0, 2.0), Const(4.0))),
        Sum((s, Rational(2.0, 3.0), Const(5.0))),
        Sum((s, Exp(1.0), Const(4.0))),
        Sum((s, Atan(1.0), Const(-1.5))),
    )


def rotating_pairs_schedule(
    n: int = N_AGENTS,
    pairs=None,
    ring_until: float = 5.0,
    pairs_until: float = 15.0,
    dwell: float = 2.0,
) -> gr.GraphSchedule:
    """Directed ring, then one bidirectional pair at a time, then the ring again."""
    pairs = pairs or [(i, (i + 1) % n) for i in range(n)]
    segs = [(0.0, gr.ring(n, directed=True))]
    t, k = ring_until, 0
    while t < pairs_until - 1e-12:
        i, j = pairs[k % len(pairs)]
        segs.append((t, gr.pair(n, i, j)))
        t += dwell
        k += 1
    segs.append((pairs_until, gr.ring(n, directed=True)))
    return gr.piecewise(segs, min_dwell=dwell)


def breaking_ring_schedule(n: int = N_AGENTS, period: float = 3.0, horizon: float = 12.0) -> gr.GraphSchedule:
    """Undirected ring losing a single edge every ``period`` seconds, edges in index order.

    The previously broken edge is restored at each switch, so the graph stays
    connected.
    """
    segs = [(0.0, gr.ring(n))]
    t, k = period, 0
    while t < horizon - 1e-12:
        segs.append((t, gr.ring_minus_edge(n, k % n, (k + 1) % n)))
        t += period
        k += 1
    return gr.piecewise(segs, horizon=horizon, min_dwell=period)


def _start_at_inputs(signals) -> tuple[float, ...]:
    """Agents start at their own input, ``x0 = r(0)``."""
    return tuple(float(s.value(0.0)) for s in signals)


def fig1(h: float = 1e-3) -> list[Scenario]:
    """Switching digraph; directed law with eps=0.1 against continuous communication."""
    base = dict(
        schedule=rotating_pairs_schedule(),
        signals=oscillating_inputs(),
        alpha=1.0,
        beta=4.0,
        horizon=20.0,
        h=h,
        x0=_start_at_inputs(oscillating_inputs()),
    )
    return [
        Scenario(trigger=DirectedThreshold((0.1,) * N_AGENTS), name="directed_eps0.1", **base),
        Scenario(trigger=Continuous(), name="continuous", **base),
    ]


def fig2(h: float = 1e-3) -> list[Scenario]:
    """Undirected ring; undirected law (radius 0.1) against the Euler baseline, step 0.12."""
    ring = gr.ring(N_AGENTS)
    base = dict(
        schedule=gr.GraphSchedule.constant(ring),
        signals=oscillating_inputs(),
        alpha=1.0,
        beta=4.0,
        horizon=20.0,
        x0=_start_at_inputs(oscillating_inputs()),
    )
    return [
        Scenario(trigger=UndirectedRelative.from_radius(0.1, ring.dout), h=h, name="undirected_r0.1", **base),
        Scenario(trigger=Periodic(0.12), h=0.12, integrator="euler", name="euler_0.12", **base),
    ]


def fig3(h: float = 1e-3) -> list[Scenario]:
    """Ring losing one edge every 3 s; both laws with matched radius 0.1."""
    sched = breaking_ring_schedule()
    dout_bar = gr.schedule_extrema(sched).dout_sup
    base = dict(
        schedule=sched,
        signals=offset_inputs(),
        alpha=1.0,
        beta=1.0,
        horizon=12.0,
        h=h,
        x0=_start_at_inputs(offset_inputs()),
    )
    return [
        Scenario(trigger=DirectedThreshold((0.1,) * N_AGENTS), name="directed_eps0.1", **base),
        Scenario(trigger=UndirectedRelative.from_radius(0.1, dout_bar), name="undirected_r0.1", **base),
    ]


def directed_ring(h: float = 1e-3, eps: float = 0.1) -> Scenario:
    """Static directed ring with the directed law."""
    return Scenario(
        schedule=gr.GraphSchedule.constant(gr.ring(N_AGENTS, directed=True)),
        signals=oscillating_inputs(),
        alpha=1.0,
        beta=4.0,
        trigger=DirectedThreshold((eps,) * N_AGENTS),
        horizon=20.0,
        h=h,
        name="directed_ring",
    )


FIGURES = {"fig1": fig1, "fig2": fig2, "fig3": fig3}

FIGURE_NOTES = {
    "fig1": "Directed law vs continuous communication on a switching digraph.",
    "fig2": (
        "Undirected law vs Euler discretization (step 0.12). A proportional-integral "
        "baseline is not part of this package."
    ),
    "fig3": "Directed vs undirected law with matched radius on a ring losing one edge every 3 s.",
}
