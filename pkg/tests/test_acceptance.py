"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear even without -s) or
directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import directed_ring_run, figure_runs  # noqa: E402
from etconsensus import bounds as bd  # noqa: E402
from etconsensus import dynamics as dy  # noqa: E402
from etconsensus import engine  # noqa: E402
from etconsensus import graph as gr  # noqa: E402
from etconsensus import scenarios as S  # noqa: E402
from etconsensus import signals as sg  # noqa: E402
from etconsensus import triggers as tg  # noqa: E402

RING_COUNTS = (39, 40, 42, 40, 39)


def _inflate_tau(report, factor):
    return bd.GuaranteeReport(**{**report.__dict__, "tau": report.tau * factor})


def _gap_vs_tau(rec):
    gaps = np.array([s.min_inter_event for s in rec.stats])
    return gaps, rec.bound_report.tau


def ring_undirected():
    """Undirected unit 5-ring, relative law with radius 0.1, alpha=1, beta=4, 20 s."""
    return S.fig2()[0]


# -- criteria -----------------------------------------------------------------


def guarantee_dominance():
    sc = ring_undirected()
    t0 = time.perf_counter()
    rec = engine.run(sc)
    elapsed = time.perf_counter() - t0
    tail = rec.tail_error()
    bound = rec.bound_report.ultimate_bound
    ok = rec.bound_report.certified and bool(np.all(tail <= bound)) and elapsed < 5.0
    return ok, f"tail error max {tail.max():.4f} <= bound {bound.min():.4f}; runtime {elapsed:.2f}s (<5s)"


def inter_event_bound():
    details, ok = [], True
    for label, rec in (("ring/undirected", figure_runs("fig2")[0]), ("directed ring/directed", directed_ring_run())):
        gaps, tau = _gap_vs_tau(rec)
        this = rec.bound_report.certified and bool(np.all(gaps >= tau))
        probe = engine.check_guarantees(rec, _inflate_tau(rec.bound_report, 100.0))
        flipped = probe.checks["inter_event"].passed is False
        ok &= this and flipped
        details.append(f"{label}: min(gap/tau) {np.min(gaps / tau):.1f}, x100 probe flips={flipped}")
    return ok, "; ".join(details)


def count_reproduction():
    ring = figure_runs("fig2")
    counts = ring[0].event_counts
    per_agent = bool(np.all(np.abs(counts - RING_COUNTS) <= 0.5 * np.array(RING_COUNTS)))
    total = int(counts.sum())
    total_ok = abs(total - 200) <= 0.3 * 200
    d, u = figure_runs("fig3")
    ratio = u.event_counts.sum() / d.event_counts.sum()
    euler = ring[1].event_counts
    euler_ok = bool(np.all(np.abs(euler - 166) <= 2))
    ok = per_agent and total_ok and ratio <= 0.6 and euler_ok
    return ok, (
        f"ring counts {counts.tolist()} total {total} (per-agent ok={per_agent}, total ok={total_ok}); "
        f"relative/threshold ratio {ratio:.3f} (<=0.6); Euler rounds {sorted(set(euler.tolist()))}"
    )


def continuous_limit():
    details, ok = [], True
    for g in (gr.ring(5), gr.ring(5, directed=True)):
        sched = gr.GraphSchedule.constant(g)
        base = dict(schedule=sched, alpha=1.0, beta=4.0, trigger=tg.Continuous(), horizon=20.0)
        rec = engine.run(engine.Scenario(signals=S.oscillating_inputs(), **base))
        rep = rec.bound_report
        bound = rep.inputs.rho * rep.inputs.gamma / (4.0 * rep.inputs.lambda_sigma)
        tail = rec.tail_error().max()
        const = engine.run(engine.Scenario(signals=tuple(sg.Const(c) for c in (1.0, -2.0, 0.5, 3.0, 0.0)), **base))
        tail0 = const.tail_error().max()
        this = rep.inputs.gamma > 0 and tail <= bound + 1e-2 and tail0 <= 1e-3
        ok &= this
        kind = "directed" if not g.is_undirected else "undirected"
        details.append(f"{kind} ring: tail {tail:.4f} <= {bound:.4f}+0.01, constant-input tail {tail0:.1e}")
    return ok, "; ".join(details)


def _balanced_runs():
    runs = list(figure_runs("fig1")) + [figure_runs("fig2")[0]] + list(figure_runs("fig3")) + [directed_ring_run()]
    return [
        r
        for r in runs
        if all(gr.is_weight_balanced(r.scenario.schedule.graphs[k]) for k in r.scenario.schedule.active_segments())
    ]


def conservation():
    runs = _balanced_runs()
    # the edge-breaking study ends at 12 s; extend it to a 20 s horizon here
    runs += [engine.run(sc.replace(horizon=20.0)) for sc in S.fig3()]
    drift = [r.sum_v_drift() for r in runs]
    ok = all(r.scenario.integrator == "rk4" and r.scenario.h == 1e-3 for r in runs) and max(drift) <= 1e-6
    return ok, f"{len(runs)} weight-balanced RK4 runs, max |sum v(t) - sum v(0)| = {max(drift):.2e}"


def transform_diagnostics():
    base = S.directed_ring().replace(x0=(0.5, -1.0, 2.0, 0.0, 1.0), v0=(0.2, -0.3, 0.0, 0.4, -0.3))
    laws = {
        "directed": tg.DirectedThreshold((0.1,) * 5),
        "undirected": tg.UndirectedRelative((0.2,) * 5),
        "continuous": tg.Continuous(),
        "periodic": tg.Periodic(0.12),
    }
    basis = dy.complement_basis(5)
    worst_q1, worst_q2 = 0.0, 0.0
    for law in laws.values():
        sc = base.replace(trigger=law, schedule=gr.GraphSchedule.constant(gr.ring(5)))
        rec = engine.run(sc)
        # to_transformed applied to every grid sample at once
        y = rec.x - rec.r.mean(axis=1, keepdims=True)
        w = rec.v - sc.alpha * (rec.r - rec.r.mean(axis=1, keepdims=True))
        q1 = w.sum(axis=1) / math.sqrt(5)
        q2 = sc.alpha * y @ basis + w @ basis
        ts0 = dy.to_transformed(rec.x[0], rec.v[0], rec.r[0], sc.alpha, basis)
        assert np.allclose(q2[0], ts0.q2N, atol=1e-14)
        decay = q2[0] * np.exp(-sc.alpha * rec.times)[:, None]
        worst_q1 = max(worst_q1, float(np.abs(q1).max()))
        worst_q2 = max(worst_q2, float(np.linalg.norm(q2 - decay, axis=1).max()))
    ok = worst_q1 <= 1e-6 and worst_q2 <= 1e-4
    return ok, f"laws {', '.join(laws)}: max|q1| {worst_q1:.1e} (<=1e-6), max q-decay residual {worst_q2:.1e} (<=1e-4)"


def zeno_freedom():
    runs = [*figure_runs("fig1"), *figure_runs("fig2"), *figure_runs("fig3"), directed_ring_run()]
    ok, worst = True, math.inf
    for r in runs:
        gaps = np.array([s.min_inter_event for s in r.stats])
        counts = r.event_counts
        ok &= bool(np.all(np.isfinite(counts))) and bool(np.all(gaps >= r.scenario.h * (1 - 1e-9)))
        rep = r.bound_report
        if rep.certified and rep.tau is not None and np.all(rep.tau > 0):
            ok &= bool(np.all(gaps >= rep.tau))
        worst = min(worst, float(np.min(gaps / r.scenario.h)))
    return ok, f"{len(runs)} runs, finite counts, min gap / h = {worst:.2f}; certified runs respect tau"


def monotone_inter_event_bound():
    eps = np.linspace(0.01, 0.5, 10)
    alpha = np.linspace(0.2, 5.0, 10)
    c = 10.4
    tau = np.array([[bd.tau_from_c(a, e, c) for a in alpha] for e in eps])
    inc_eps = bool(np.all(np.diff(tau, axis=0) > 0))
    dec_alpha = bool(np.all(np.diff(tau, axis=1) < 0))
    return inc_eps and dec_alpha, f"10x10 grid at c={c}: increasing in eps={inc_eps}, decreasing in alpha={dec_alpha}"


def property_suites():
    rng = np.random.default_rng(2024)
    results = {}

    ok = True
    for _ in range(200):
        n = int(rng.integers(2, 8))
        a = rng.uniform(0, 2, (n, n)) * (rng.uniform(size=(n, n)) < 0.5)
        np.fill_diagonal(a, 0)
        g = gr.WeightedDigraph(a)
        lap = gr.laplacian(g)
        ok &= np.abs(lap @ np.ones(n)).max() <= 1e-12
        tol = 1e-9 * max(1.0, g.dout.max(), g.din.max())
        ok &= gr.is_weight_balanced(g) == (np.abs(np.ones(n) @ lap).max() <= tol)
        b = gr.WeightedDigraph(a + a.T)
        ok &= np.linalg.eigvalsh(gr.sym(gr.laplacian(b))).min() >= -1e-10
        p = rng.permutation(n)
        cyc = np.zeros((n, n))
        cyc[p, np.roll(p, -1)] = rng.uniform(0.5, 2)
        ok &= gr.is_weight_balanced(gr.WeightedDigraph(cyc))
        ok &= np.linalg.eigvalsh(gr.sym(gr.laplacian(gr.WeightedDigraph(cyc)))).min() >= -1e-10
    results["graph"] = bool(ok)

    ok = True
    prims = [sg.Sin(0.5, 0.8), sg.Cos(0.5, 0.6, 0.3), sg.Atan(0.5), sg.Exp(1.0), sg.Rational(2.0, 3.0), sg.Poly((1, -0.5, 0.1)), sg.Const(4.0)]
    trees = prims + [sg.Sum(tuple(prims)), 2.0 * sg.Sum((prims[0], prims[4])) - prims[2]]
    ts = rng.uniform(1e-3, 20, 100)
    d = 1e-5
    for s in trees:
        fd = (s.value(ts + d) - s.value(ts - d)) / (2 * d)
        ex = s.derivative(ts)
        ok &= bool(np.all(np.abs(fd - ex) <= 1e-6 * (1 + np.abs(ex))))
    results["signals"] = bool(ok)

    results["triggers"] = (
        tg.should_fire_directed(0.0, 0.1, 0.1)
        and not tg.should_fire_directed(0.0, 0.0999, 0.1)
        and not tg.should_fire_directed(0.3, 0.3, 0.1)
        and not tg.should_fire_undirected(1.0, 1.0, [(1.0, 2.0)], 1.0, 0.1)
    )

    sc = S.fig3()[1]
    a, b = engine.run(sc), engine.run(sc)
    results["determinism"] = a.events == b.events and np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)

    drift = []
    for fig in ("fig1", "fig2", "fig3"):
        for r1, r2 in zip(figure_runs(fig, 1e-3), figure_runs(fig, 5e-4)):
            if r1.scenario.law_name in ("directed", "undirected"):
                c1, c2 = r1.event_counts, r2.event_counts
                drift.append(float(np.max(np.abs(c2 - c1) / c1)))
    results["refinement"] = max(drift) <= 0.05

    ok = all(results.values())
    detail = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in results.items())
    return ok, f"{detail} (max count drift on halving h: {100 * max(drift):.1f}%)"


CRITERIA = {
    1: ("guarantee-dominance", guarantee_dominance),
    2: ("inter-event-bound", inter_event_bound),
    3: ("event-count-reproduction", count_reproduction),
    4: ("continuous-communication-limit", continuous_limit),
    5: ("integral-state-conservation", conservation),
    6: ("transform-diagnostics", transform_diagnostics),
    7: ("zeno-freedom", zeno_freedom),
    8: ("inter-event-bound-monotonicity", monotone_inter_event_bound),
    9: ("property-suites", property_suites),
}


def _line(num, name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num} {name}: {detail}"


@pytest.mark.parametrize("num", sorted(CRITERIA), ids=[CRITERIA[k][0] for k in sorted(CRITERIA)])
def test_acceptance(num, capsys):
    name, check = CRITERIA[num]
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(num, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num in sorted(CRITERIA):
        name, check = CRITERIA[num]
        ok, detail = check()
        failed += not ok
        print(_line(num, name, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
