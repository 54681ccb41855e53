"""Deterministic fixed-step simulation of event-triggered dynamic consensus.

Each grid step runs, in order: graph switch handling (with rebroadcasts to
newly acquired listeners), trigger evaluation for every agent against the
pre-step broadcast values, then one integrator step with ``x_hat`` frozen.

With ``event_location="dense"`` (default) a threshold crossing inside a step
is located on the cubic Hermite interpolant of ``x``; the step is cut at the
crossing, the agent samples there and integration resumes.  Broadcasts at
the same instant cascade until no further agent fires.  ``"grid"`` only
evaluates the trigger at grid points.  Clock-driven and continuous laws are
always grid based.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import bounds as bd
from . import graph as gr
from .dynamics import consensus_rhs, signal_derivative_vectors, signal_vectors
from .signals import SignalExpr, derivatives, values
from .triggers import (
    Continuous,
    DirectedThreshold,
    EventKind,
    Periodic,
    TriggerEvent,
    TriggerLaw,
    UndirectedRelative,
)

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4", "euler")
EVENT_LOCATIONS = ("dense", "grid")
FORMULATIONS = ("direct", "shifted")
TAIL_FRACTION = 0.2
DRIFT_TOL = 1e-6


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    schedule: gr.GraphSchedule
    signals: tuple[SignalExpr, ...]
    alpha: float
    beta: float
    trigger: TriggerLaw
    horizon: float
    h: float = 1e-3
    x0: tuple[float, ...] | None = None
    v0: tuple[float, ...] | None = None
    integrator: str = "rk4"
    formulation: str = "direct"
    # "dense" locates threshold crossings inside a step; "grid" fires at grid points only
    event_location: str = "dense"
    # on acquiring listeners, rebroadcast the held x_hat (False) or resample x_hat := x (True)
    switch_resample: bool = False
    name: str = "scenario"
    # manual constants for schedules that cannot be certified automatically
    rho: float | None = None
    lambda_sigma: float | None = None
    require_certified: bool = False

    def __post_init__(self):
        n = self.schedule.n
        object.__setattr__(self, "signals", tuple(self.signals))
        x0 = tuple(float(a) for a in self.x0) if self.x0 is not None else (0.0,) * n
        v0 = tuple(float(a) for a in self.v0) if self.v0 is not None else (0.0,) * n
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v0", v0)
        if len(self.signals) != n or len(x0) != n or len(v0) != n:
            raise ScenarioError(f"need {n} signals, x0 and v0 entries")
        if not (self.alpha > 0 and self.beta > 0):
            raise ScenarioError("alpha and beta must be positive")
        if not (self.h > 0 and self.horizon > 0):
            raise ScenarioError("h and horizon must be positive")
        if abs(sum(v0)) > 1e-9 * max(1.0, float(np.abs(v0).max(initial=0.0))):
            raise ScenarioError(f"initial integral states must sum to zero, got {sum(v0):g}")
        if self.integrator not in INTEGRATORS:
            raise ScenarioError(f"integrator must be one of {INTEGRATORS}")
        if self.event_location not in EVENT_LOCATIONS:
            raise ScenarioError(f"event_location must be one of {EVENT_LOCATIONS}")
        if self.formulation not in FORMULATIONS:
            raise ScenarioError(f"formulation must be one of {FORMULATIONS}")
        eps = getattr(self.trigger, "eps", None)
        if eps is not None and len(eps) != n:
            raise ScenarioError(f"trigger needs {n} thresholds, got {len(eps)}")
        if self.schedule.horizon != self.horizon:
            sched = gr.GraphSchedule(
                self.schedule.starts, self.schedule.graphs, self.horizon, self.schedule.min_dwell
            )
            object.__setattr__(self, "schedule", sched)

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def steps(self) -> int:
        return int(math.floor(self.horizon / self.h + 1e-9))

    @property
    def law_name(self) -> str:
        return self.trigger.name

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class AgentStats:
    event_count: int
    rebroadcast_count: int
    min_inter_event: float
    max_mismatch: float


@dataclass
class RunRecord:
    scenario: Scenario
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    r: np.ndarray
    events: list[TriggerEvent]
    stats: list[AgentStats]
    bound_report: bd.GuaranteeReport
    warnings: list[str] = field(default_factory=list)

    @property
    def errors(self) -> np.ndarray:
        """Per-agent tracking error ``|x_i - mean(r)|``, shape ``(T, N)``."""
        return np.abs(self.x - self.r.mean(axis=1, keepdims=True))

    @property
    def max_error(self) -> np.ndarray:
        return self.errors.max(axis=1)

    @property
    def event_counts(self) -> np.ndarray:
        return np.array([s.event_count for s in self.stats])

    def tail_mask(self, fraction: float = TAIL_FRACTION) -> np.ndarray:
        return self.times >= (1.0 - fraction) * self.times[-1]

    def tail_error(self, fraction: float = TAIL_FRACTION) -> np.ndarray:
        """Per-agent sup of the tracking error over the final ``fraction`` of the run."""
        return self.errors[self.tail_mask(fraction)].max(axis=0)

    def sum_v_drift(self) -> float:
        s = self.v.sum(axis=1)
        return float(np.abs(s - s[0]).max())

    def sample_times(self, agent: int) -> np.ndarray:
        return np.array(
            [e.time for e in self.events if e.agent == agent and e.kind is EventKind.SAMPLE]
        )

    def inter_event_gaps(self, agent: int) -> np.ndarray:
        return np.diff(self.sample_times(agent))


def guarantee_report(sc: Scenario) -> bd.GuaranteeReport:
    eps = getattr(sc.trigger, "eps", np.zeros(sc.n))
    inputs, certified = bd.build_inputs(
        sc.schedule,
        sc.signals,
        sc.alpha,
        sc.beta,
        eps,
        sc.x0,
        sc.v0,
        sc.horizon,
        rho=sc.rho,
        lambda_sigma=sc.lambda_sigma,
        grid_step=min(sc.h, 1e-2),
    )
    return bd.report_for(sc.law_name, inputs, certified, sc.schedule)


class _Simulation:
    """Mutable per-run state; one instance drives one call to :func:`run`."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.n, self.h, self.K = sc.n, sc.h, sc.steps
        self.law = sc.trigger
        self.continuous = isinstance(self.law, Continuous)
        self.periodic = isinstance(self.law, Periodic)
        self.dense = sc.event_location == "dense" and not (self.continuous or self.periodic)
        self.shifted = sc.formulation == "shifted"
        # inputs on the half-step grid cover every RK4 stage of a full step
        half = np.arange(2 * self.K + 1) * (0.5 * self.h)
        self.R = signal_vectors(sc.signals, half)
        self.Rd = signal_derivative_vectors(sc.signals, half)
        self.laps = [gr.laplacian(g) for g in sc.schedule.graphs]

        self.x = np.array(sc.x0, dtype=float)
        self.v = np.array(sc.v0, dtype=float)
        self.x_hat = self.x.copy()
        self.events: list[TriggerEvent] = []
        self.counts = np.zeros(self.n, dtype=int)
        self.rebroadcasts = np.zeros(self.n, dtype=int)
        self.last = np.full(self.n, -math.inf)
        self.min_gap = np.full(self.n, math.inf)
        self.max_mis = np.zeros(self.n)
        self.periodic_rounds = 0
        self.seg = None

    # -- dynamics -------------------------------------------------------------

    def inputs(self, t):
        j = t / (0.5 * self.h)
        jr = int(round(j))
        if abs(j - jr) < 1e-7 and 0 <= jr < len(self.R):
            return self.R[jr], self.Rd[jr]
        return values(self.sc.signals, t), derivatives(self.sc.signals, t)

    def deriv(self, x, v, t):
        r, rd = self.inputs(t)
        coupled = x if self.continuous else self.x_hat
        return consensus_rhs(x, v, coupled, self.lap, r, rd, self.sc.alpha, self.sc.beta)

    def advance(self, x, v, t, dt):
        """One integrator step of length ``dt`` from ``t`` with ``x_hat`` held."""
        sc, n, lap = self.sc, self.n, self.lap
        alpha, beta = sc.alpha, sc.beta
        xh = None if self.continuous else self.x_hat
        stages = (self.inputs(t), self.inputs(t + 0.5 * dt), self.inputs(t + dt))
        if self.shifted:

            def f(y, r, _rd):
                xb, vv = y[:n], y[n:]
                lc = lap @ (xb + r if xh is None else xh)
                return np.concatenate((-alpha * xb - beta * lc - vv, alpha * beta * lc))

            y = np.concatenate((x - stages[0][0], v))
        else:

            def f(y, r, rd):
                xx, vv = y[:n], y[n:]
                dx, dv = consensus_rhs(xx, vv, xx if xh is None else xh, lap, r, rd, alpha, beta)
                return np.concatenate((dx, dv))

            y = np.concatenate((x, v))
        if sc.integrator == "rk4":
            (r0, d0), (r1, d1), (r2, d2) = stages
            k1 = f(y, r0, d0)
            k2 = f(y + 0.5 * dt * k1, r1, d1)
            k3 = f(y + 0.5 * dt * k2, r1, d1)
            k4 = f(y + dt * k3, r2, d2)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            y = y + dt * f(y, *stages[0])
        x1, v1 = y[:n].copy(), y[n:].copy()
        if self.shifted:
            x1 += stages[2][0]
        return x1, v1

    # -- communication --------------------------------------------------------

    def margin(self, x):
        return self.law.margin(x, self.x_hat, self.adj, self.dout)

    def switch_to(self, seg, t):
        g = self.sc.schedule.graphs[seg]
        if self.seg is not None:
            gained = ((g.adjacency > 0) & ~(self.sc.schedule.graphs[self.seg].adjacency > 0)).any(axis=0)
            for i in np.flatnonzero(gained).tolist():
                if self.sc.switch_resample:
                    self.x_hat[i] = self.x[i]
                self.events.append(TriggerEvent(i, t, EventKind.SWITCH_REBROADCAST, float(self.x_hat[i])))
                self.rebroadcasts[i] += 1
        self.seg, self.lap, self.adj, self.dout = seg, self.laps[seg], g.adjacency, g.dout

    def sample(self, idx, t):
        self.x_hat[idx] = self.x[idx]
        self.counts[idx] += 1
        for i in idx.tolist():
            self.min_gap[i] = min(self.min_gap[i], t - self.last[i])
            self.last[i] = t
            self.events.append(TriggerEvent(i, t, EventKind.SAMPLE, float(self.x[i])))

    def communicate(self, t, first=False, forced=None):
        """Evaluate the trigger at ``t`` against current broadcast values and sample."""
        np.maximum(self.max_mis, np.abs(self.x_hat - self.x), out=self.max_mis)
        n = self.n
        if first:
            fire = np.ones(n, dtype=bool)
        elif self.periodic:
            fire = np.full(n, self.law.due(t, self.h, self.periodic_rounds))
        elif self.continuous:
            fire = np.ones(n, dtype=bool)
        else:
            fire = self.margin(self.x) >= 0
        if forced is not None:
            fire |= forced
        if fire.any():
            if self.periodic:
                self.periodic_rounds += 1
            self.sample(np.flatnonzero(fire), t)
        # a broadcast can push a neighbor over its threshold at the same instant
        while self.dense and fire.any():
            fire = self.margin(self.x) >= 0
            if fire.any():
                self.sample(np.flatnonzero(fire), t)

    def locate(self, t, dt, x1, v1, m1):
        """Earliest threshold crossing in ``(t, t + dt]`` on the cubic Hermite
        interpolant of ``x``.  Returns ``(fraction of dt, agents crossing)``."""
        cand = np.flatnonzero(m1 >= 0)
        x0 = self.x
        d0, _ = self.deriv(self.x, self.v, t)
        d1, _ = self.deriv(x1, v1, t + dt)
        lo = np.zeros(len(cand))
        hi = np.ones(len(cand))
        probe = x1.copy()
        for _ in range(52):
            s = 0.5 * (lo + hi)
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            probe[cand] = (
                h00 * x0[cand] + h10 * dt * d0[cand] + h01 * x1[cand] + h11 * dt * d1[cand]
            )
            crossed = self.margin(probe)[cand] >= 0
            hi = np.where(crossed, s, hi)
            lo = np.where(crossed, lo, s)
        s_star = float(hi.min())
        return s_star, cand[hi <= s_star * (1 + 1e-12) + 1e-15]

    # -- main loop ------------------------------------------------------------

    def step(self, k):
        t0 = k * self.h
        t_end = (k + 1) * self.h
        tc = t0
        self.communicate(t0, first=(k == 0))
        while True:
            dt = t_end - tc
            x1, v1 = self.advance(self.x, self.v, tc, dt)
            if not self.dense:
                break
            m1 = self.margin(x1)
            if not np.any(m1 >= 0):
                break
            s_star, who = self.locate(tc, dt, x1, v1, m1)
            if s_star >= 1.0:
                break
            self.x, self.v = self.advance(self.x, self.v, tc, s_star * dt)
            tc = tc + s_star * dt
            forced = np.zeros(self.n, dtype=bool)
            forced[who] = True
            self.communicate(tc, forced=forced)
        self.x, self.v = x1, v1

    def run(self) -> RunRecord:
        sc, n, K, h = self.sc, self.n, self.K, self.h
        sched = sc.schedule
        seg_of_step = [sched.index_at(k * h, tol=1e-6 * h) for k in range(K + 1)]
        xs = np.empty((K + 1, n))
        vs = np.empty((K + 1, n))
        xs[0], vs[0] = self.x, self.v
        for k in range(K):
            if seg_of_step[k] != self.seg:
                self.switch_to(seg_of_step[k], k * h)
            self.step(k)
            xs[k + 1], vs[k + 1] = self.x, self.v
        np.maximum(self.max_mis, np.abs(self.x_hat - self.x), out=self.max_mis)
        stats = [
            AgentStats(
                int(self.counts[i]),
                int(self.rebroadcasts[i]),
                float(self.min_gap[i]),
                float(self.max_mis[i]),
            )
            for i in range(n)
        ]
        self.events.sort(key=lambda e: (e.time, e.kind is EventKind.SAMPLE, e.agent))
        return RunRecord(
            scenario=sc,
            times=np.arange(K + 1) * h,
            x=xs,
            v=vs,
            r=self.R[::2],
            events=self.events,
            stats=stats,
            bound_report=None,
        )


def run(sc: Scenario) -> RunRecord:
    """Simulate ``sc`` over ``[0, horizon]`` on the grid ``k * h``."""
    law = sc.trigger
    sched = sc.schedule
    active = sched.active_segments()
    if sc.require_certified and isinstance(law, DirectedThreshold):
        bad = [k for k in active if not gr.is_weight_balanced(sched.graphs[k])]
        if bad:
            raise ScenarioError(f"segments {bad} are not weight-balanced")
    if isinstance(law, UndirectedRelative):
        for k in active:
            if np.any(sched.graphs[k].dout <= 0):
                raise ScenarioError(
                    f"undirected law needs positive out-degree; segment {k} has isolated agents"
                )

    report = guarantee_report(sc)
    if sc.require_certified and not report.certified:
        raise ScenarioError("scenario requires certified guarantees but the schedule is not certifiable")
    warnings: list[str] = []
    if report.certified and report.tau is not None and np.all(report.tau > 0):
        tmin = float(report.tau.min())
        if sc.h > tmin / 10:
            msg = f"step h={sc.h:g} exceeds min inter-event bound / 10 = {tmin / 10:.3g}"
            warnings.append(msg)
            log.warning(msg)

    record = _Simulation(sc).run()
    record.bound_report = report
    record.warnings = warnings
    return record


# -- verdicts -----------------------------------------------------------------


@dataclass
class Check:
    # None means the check does not apply to this run
    passed: bool | None
    detail: str


@dataclass
class Verdict:
    checks: dict[str, Check]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {k: {"passed": c.passed, "detail": c.detail} for k, c in self.checks.items()},
        }


def check_guarantees(
    record: RunRecord,
    report: bd.GuaranteeReport | None = None,
    tail_fraction: float = TAIL_FRACTION,
    drift_tol: float = DRIFT_TOL,
) -> Verdict:
    """Compare a run against its analytic guarantees.  Failures are reported, never raised."""
    report = report if report is not None else record.bound_report
    checks: dict[str, Check] = {}
    gaps = np.array([s.min_inter_event for s in record.stats])
    h = record.scenario.h

    tau = report.tau if report.certified else None
    if tau is None or not np.any(tau > 0):
        checks["inter_event"] = Check(None, "no certified positive inter-event bound")
    else:
        ok = gaps >= tau
        checks["inter_event"] = Check(
            bool(ok.all()),
            "min gap / tau per agent: "
            + ", ".join(f"{g:.4g}/{t:.4g}" for g, t in zip(gaps, tau)),
        )

    if report.certified and report.ultimate_bound is not None:
        tail = record.tail_error(tail_fraction)
        ok = tail <= report.ultimate_bound
        checks["ultimate_bound"] = Check(
            bool(ok.all()),
            f"tail error max {tail.max():.4g} vs bound {report.ultimate_bound.max():.4g}",
        )
    else:
        checks["ultimate_bound"] = Check(None, "no certified ultimate bound")

    balanced = all(
        gr.is_weight_balanced(record.scenario.schedule.graphs[k])
        for k in record.scenario.schedule.active_segments()
    )
    drift = record.sum_v_drift()
    checks["conservation"] = (
        Check(drift <= drift_tol, f"sum(v) drift {drift:.3g} (tol {drift_tol:g})")
        if balanced
        else Check(None, "schedule not weight-balanced")
    )

    counts = record.event_counts
    finite = bool(np.all(np.isfinite(counts)))
    spaced = bool(np.all(gaps >= h * (1 - 1e-9)))
    checks["zeno_free"] = Check(
        finite and spaced, f"events per agent {counts.tolist()}, min gap {gaps.min():.4g} (h={h:g})"
    )
    return Verdict(checks)


# -- comparisons --------------------------------------------------------------


@dataclass
class Comparison:
    names: list[str]
    records: list[RunRecord]
    grid: np.ndarray
    error_curves: np.ndarray  # (len(records), len(grid)) max-agent tracking error

    def count_table(self) -> dict[str, list[int]]:
        return {name: rec.event_counts.tolist() for name, rec in zip(self.names, self.records)}

    def totals(self) -> dict[str, int]:
        return {name: int(rec.event_counts.sum()) for name, rec in zip(self.names, self.records)}

    def to_dict(self) -> dict:
        return {
            "counts": self.count_table(),
            "totals": self.totals(),
            "rebroadcasts": {
                name: [s.rebroadcast_count for s in rec.stats]
                for name, rec in zip(self.names, self.records)
            },
            "tail_error": {
                name: float(rec.tail_error().max()) for name, rec in zip(self.names, self.records)
            },
        }


def run_comparison(scenarios: Sequence[Scenario], grid_points: int = 1001) -> Comparison:
    """Run scenarios that share horizon and inputs; align their error curves."""
    if not scenarios:
        raise ScenarioError("nothing to compare")
    first = scenarios[0]
    for sc in scenarios[1:]:
        if not math.isclose(sc.horizon, first.horizon) or sc.signals != first.signals:
            raise ScenarioError("compared scenarios must share horizon and input signals")
    records = [run(sc) for sc in scenarios]
    grid = np.linspace(0.0, min(r.times[-1] for r in records), grid_points)
    curves = np.array([np.interp(grid, r.times, r.max_error) for r in records])
    names = [sc.name for sc in scenarios]
    return Comparison(names, records, grid, curves)
