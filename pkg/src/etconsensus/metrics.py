"""Post-processing of run records: summaries, CSV/JSON artifacts and SVG plots."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import TAIL_FRACTION, Comparison, RunRecord, Verdict, check_guarantees
from .triggers import EventKind


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class RunSummary:
    name: str
    law: str
    event_count: tuple[int, ...]
    rebroadcast_count: tuple[int, ...]
    min_inter_event: tuple[float, ...]  # +inf when an agent sampled at most once
    mean_inter_event: tuple[float, ...]
    tail_error: float  # sup over the tail window of max_i |x_i - mean(r)|
    ultimate_bound: float | None
    bound_margin: float | None  # ultimate_bound - tail_error
    certified: bool

    @property
    def total_events(self) -> int:
        return sum(self.event_count)

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity; keep the sentinel readable
        for key in ("min_inter_event", "mean_inter_event"):
            d[key] = [None if math.isinf(g) else g for g in d[key]]
        return d


def _check_nonempty(record: RunRecord):
    if record.times.size < 2 or record.x.size == 0:
        raise MetricsError("record holds no trajectory")


def summarize(record: RunRecord, tail_fraction: float = TAIL_FRACTION) -> RunSummary:
    _check_nonempty(record)
    n = record.scenario.n
    means = []
    for i in range(n):
        gaps = record.inter_event_gaps(i)
        means.append(float(gaps.mean()) if gaps.size else math.inf)
    tail = float(record.tail_error(tail_fraction).max())
    rep = record.bound_report
    bound = None
    if rep is not None and rep.ultimate_bound is not None:
        bound = float(np.max(rep.ultimate_bound))
    return RunSummary(
        name=record.scenario.name,
        law=record.scenario.law_name,
        event_count=tuple(int(s.event_count) for s in record.stats),
        rebroadcast_count=tuple(int(s.rebroadcast_count) for s in record.stats),
        min_inter_event=tuple(float(s.min_inter_event) for s in record.stats),
        mean_inter_event=tuple(means),
        tail_error=tail,
        ultimate_bound=bound,
        bound_margin=None if bound is None else bound - tail,
        certified=bool(rep is not None and rep.certified),
    )


# -- files --------------------------------------------------------------------


def _out_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise MetricsError(f"cannot create output directory {p}: {exc}") from None
    return p


def write_series_csv(record: RunRecord, path, decimation: int = 10) -> Path:
    """One row per ``decimation``-th grid sample: t, x_i, v_i, r_i, error_i."""
    _check_nonempty(record)
    if decimation < 1:
        raise MetricsError("decimation must be >= 1")
    n = record.scenario.n
    idx = np.arange(0, len(record.times), decimation)
    if idx[-1] != len(record.times) - 1:
        idx = np.append(idx, len(record.times) - 1)
    err = record.errors
    header = (
        ["t"]
        + [f"x{i}" for i in range(n)]
        + [f"v{i}" for i in range(n)]
        + [f"r{i}" for i in range(n)]
        + [f"err{i}" for i in range(n)]
    )
    path = Path(path)
    _out_dir(path.parent)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in idx:
            w.writerow(
                [repr(float(record.times[k]))]
                + [repr(float(a)) for a in (*record.x[k], *record.v[k], *record.r[k], *err[k])]
            )
    return path


def record_json(record: RunRecord, verdict: Verdict | None = None) -> dict:
    summary = summarize(record)
    return {
        "scenario": record.scenario.name,
        "summary": summary.to_dict(),
        "events": [
            {"agent": e.agent, "time": e.time, "kind": e.kind.value, "value": e.value}
            for e in record.events
        ],
        "stats": [
            {
                "event_count": s.event_count,
                "rebroadcast_count": s.rebroadcast_count,
                "min_inter_event": None if math.isinf(s.min_inter_event) else s.min_inter_event,
                "max_mismatch": s.max_mismatch,
            }
            for s in record.stats
        ],
        "bound_report": record.bound_report.to_dict() if record.bound_report is not None else None,
        "verdict": verdict.to_dict() if verdict is not None else None,
        "warnings": list(record.warnings),
    }


def write_record_json(record: RunRecord, path, verdict: Verdict | None = None) -> Path:
    path = Path(path)
    _out_dir(path.parent)
    path.write_text(json.dumps(record_json(record, verdict), indent=2))
    return path


def comparison_json(cmp: Comparison) -> dict:
    d = cmp.to_dict()
    d["summaries"] = {name: summarize(r).to_dict() for name, r in zip(cmp.names, cmp.records)}
    d["verdicts"] = {
        name: check_guarantees(r).to_dict() for name, r in zip(cmp.names, cmp.records)
    }
    return d


def write_summary_csv(summaries: Sequence[RunSummary], path) -> Path:
    path = Path(path)
    _out_dir(path.parent)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "law", "agent", "event_count", "rebroadcasts", "min_gap", "mean_gap", "tail_error", "bound_margin"])
        for s in summaries:
            for i, c in enumerate(s.event_count):
                w.writerow(
                    [s.name, s.law, i, c, s.rebroadcast_count[i], s.min_inter_event[i], s.mean_inter_event[i], s.tail_error, s.bound_margin]
                )
    return path


# -- plots --------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed hash salt keeps SVG output byte-stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "etconsensus"
    return plt


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise MetricsError(f"cannot write {path}: {exc}") from None
    finally:
        fig.clf()
    return path


def plot_error(record: RunRecord, path, band: float | None = None) -> Path:
    _check_nonempty(record)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(record.times, record.x - record.r.mean(axis=1, keepdims=True), lw=0.8)
    if band is not None:
        for y in (band, -band):
            ax.axhline(y, color="k", ls="--", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("x_i - mean(r)")
    ax.set_title(record.scenario.name)
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out


def plot_raster(record: RunRecord, path) -> Path:
    """Event raster: ``x`` marks samples, ``+`` marks switch rebroadcasts."""
    _check_nonempty(record)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 2.5))
    for kind, marker in ((EventKind.SAMPLE, "x"), (EventKind.SWITCH_REBROADCAST, "+")):
        ev = [(e.time, e.agent) for e in record.events if e.kind is kind]
        if ev:
            t, a = zip(*ev)
            ax.scatter(t, np.asarray(a) + 1, marker=marker, s=14, lw=0.7, label=kind.value)
    ax.set_yticks(range(1, record.scenario.n + 1))
    ax.set_xlim(0, record.times[-1])
    ax.set_xlabel("t")
    ax.set_ylabel("agent")
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out


def plot_comparison(cmp: Comparison, path, band: float = 0.05) -> Path:
    """Overlaid max-agent error curves with ``+-band`` reference lines."""
    if not cmp.records:
        raise MetricsError("empty comparison")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 3))
    for name, curve in zip(cmp.names, cmp.error_curves):
        ax.plot(cmp.grid, curve, lw=0.9, label=name)
    for y in (band, -band):
        ax.axhline(y, color="k", ls="--", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("max_i |x_i - mean(r)|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out


def emit_plots(records, out_dir, prefix: str | None = None) -> list[Path]:
    """Write plots for one record (error + raster) or a :class:`Comparison`
    (overlaid errors plus one raster per run)."""
    out = _out_dir(out_dir)
    if isinstance(records, Comparison):
        stem = prefix or "comparison"
        paths = [plot_comparison(records, out / f"{stem}_error.svg")]
        for name, rec in zip(records.names, records.records):
            paths.append(plot_raster(rec, out / f"{stem}_{name}_events.svg"))
        return paths
    if records is None:
        raise MetricsError("no record to plot")
    stem = prefix or records.scenario.name
    return [
        plot_error(records, out / f"{stem}_error.svg"),
        plot_raster(records, out / f"{stem}_events.svg"),
    ]
