"""Weighted digraphs and piecewise-constant switching schedules.

Edge convention: ``adjacency[i, j] > 0`` means agent ``i`` listens to agent
``j`` (``j`` sends to ``i``).  Agent ``i`` is then an in-neighbor of ``j``,
so when ``j`` samples its state it broadcasts to every ``i`` with
``adjacency[i, j] > 0``.  Agents are indexed from 0.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

BALANCE_RTOL = 1e-9


class GraphError(ValueError):
    """Raised for malformed graphs or schedules."""


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    adjacency: np.ndarray
    weight_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {a.shape}")
        if np.any(a < 0):
            raise GraphError("adjacency weights must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency diagonal must be zero")
        if not np.all(np.isfinite(a)):
            raise GraphError("adjacency weights must be finite")
        if self.weight_bounds is not None:
            lo, hi = self.weight_bounds
            if not 0 < lo <= hi:
                raise GraphError("weight bounds need 0 < a_min <= a_max")
            nz = a[a > 0]
            if nz.size and (nz.min() < lo or nz.max() > hi):
                raise GraphError(f"edge weights outside declared bounds [{lo}, {hi}]")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def dout(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def din(self) -> np.ndarray:
        return self.adjacency.sum(axis=0)

    @property
    def is_undirected(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))

    def edges(self) -> set[tuple[int, int]]:
        rows, cols = np.nonzero(self.adjacency)
        return set(zip(rows.tolist(), cols.tolist()))

    def __eq__(self, other):
        if not isinstance(other, WeightedDigraph):
            return NotImplemented
        return self.weight_bounds == other.weight_bounds and np.array_equal(
            self.adjacency, other.adjacency
        )

    def __repr__(self):
        return f"WeightedDigraph(n={self.n}, edges={len(self.edges())})"


@dataclass(frozen=True)
class SpectralSummary:
    lambda2_hat: float
    laplacian_norm: float
    dout: np.ndarray
    din: np.ndarray


@dataclass(frozen=True)
class ScheduleExtrema:
    laplacian_sup: float
    # None when no segment is strongly connected
    lambda2_inf: float | None
    dout_sup: np.ndarray


@dataclass(frozen=True)
class GraphSchedule:
    """Right-continuous piecewise-constant sequence of graphs.

    ``starts[k]`` is the switching time at which ``graphs[k]`` becomes
    active; ``starts[0]`` must be 0.
    """

    starts: tuple[float, ...]
    graphs: tuple[WeightedDigraph, ...]
    horizon: float = float("inf")
    min_dwell: float | None = None
    labels: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        starts = tuple(float(s) for s in self.starts)
        graphs = tuple(self.graphs)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "graphs", graphs)
        if not graphs or len(starts) != len(graphs):
            raise GraphError("schedule needs one start time per graph, at least one graph")
        if starts[0] != 0.0:
            raise GraphError("first segment must start at t = 0")
        gaps = np.diff(starts)
        if np.any(gaps <= 0):
            raise GraphError("switching times must be strictly increasing")
        if self.min_dwell is not None and gaps.size and gaps.min() < self.min_dwell:
            raise GraphError(
                f"inter-switch gap {gaps.min():g} below declared minimum {self.min_dwell:g}"
            )
        if len({g.n for g in graphs}) != 1:
            raise GraphError("all segments must share the same vertex set")
        if not self.horizon > 0:
            raise GraphError("horizon must be positive")

    @classmethod
    def constant(cls, g: WeightedDigraph, horizon: float = float("inf")) -> "GraphSchedule":
        return cls((0.0,), (g,), horizon=horizon)

    @property
    def n(self) -> int:
        return self.graphs[0].n

    @property
    def switch_times(self) -> tuple[float, ...]:
        return self.starts[1:]

    def index_at(self, t: float, tol: float = 0.0) -> int:
        return bisect.bisect_right(self.starts, t + tol) - 1

    def graph_at(self, t: float) -> WeightedDigraph:
        return self.graphs[self.index_at(t)]

    def segment_end(self, k: int) -> float:
        return self.starts[k + 1] if k + 1 < len(self.starts) else self.horizon

    def active_segments(self) -> list[int]:
        """Indices of segments that start before the horizon."""
        return [k for k, s in enumerate(self.starts) if s < self.horizon]


def laplacian(g: WeightedDigraph) -> np.ndarray:
    """Out-Laplacian ``D_out - A``; rows sum to zero."""
    a = g.adjacency
    lap = -a.copy()
    # set the diagonal as the negated off-diagonal row sum so L @ 1 == 0 exactly
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _default_tol(g: WeightedDigraph) -> float:
    return BALANCE_RTOL * max(1.0, float(g.dout.max(initial=0.0)), float(g.din.max(initial=0.0)))


def is_weight_balanced(g: WeightedDigraph, tol: float | None = None) -> bool:
    if tol is None:
        tol = _default_tol(g)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.max(np.abs(g.dout - g.din), initial=0.0) <= tol)


def is_strongly_connected(g: WeightedDigraph) -> bool:
    if g.n == 1:
        return True
    ncomp, _ = connected_components(g.adjacency > 0, directed=True, connection="strong")
    return ncomp == 1


def union(graphs: Iterable[WeightedDigraph]) -> WeightedDigraph:
    graphs = list(graphs)
    if not graphs:
        raise GraphError("union of no graphs")
    return WeightedDigraph(np.maximum.reduce([g.adjacency for g in graphs]))


def is_jointly_strongly_connected(sched: GraphSchedule, t1: float, t2: float) -> bool:
    if not t1 < t2:
        raise GraphError(f"empty interval [{t1}, {t2})")
    hit = [
        g
        for k, g in enumerate(sched.graphs)
        if sched.starts[k] < t2 and sched.segment_end(k) > t1
    ]
    return is_strongly_connected(union(hit))


def spectral_summary(g: WeightedDigraph, tol: float | None = None) -> SpectralSummary:
    """Second-smallest eigenvalue of Sym(L) and the spectral norm of L.

    Only defined for weight-balanced graphs, where Sym(L) is positive
    semi-definite and its smallest eigenvalue is 0.
    """
    if not is_weight_balanced(g, tol):
        raise GraphError("spectral summary requires a weight-balanced graph")
    lap = laplacian(g)
    eig = np.linalg.eigvalsh(sym(lap))
    lam2 = float(eig[1]) if g.n > 1 else 0.0
    # clip roundoff below zero (Sym(L) is PSD here)
    lam2 = max(lam2, 0.0)
    return SpectralSummary(
        lambda2_hat=lam2,
        laplacian_norm=float(np.linalg.norm(lap, 2)),
        dout=g.dout,
        din=g.din,
    )


def schedule_extrema(sched: GraphSchedule) -> ScheduleExtrema:
    segs = [sched.graphs[k] for k in sched.active_segments()]
    norms = [float(np.linalg.norm(laplacian(g), 2)) for g in segs]
    lam2 = [
        spectral_summary(g).lambda2_hat
        for g in segs
        if is_weight_balanced(g) and is_strongly_connected(g)
    ]
    return ScheduleExtrema(
        laplacian_sup=max(norms),
        lambda2_inf=min(lam2) if lam2 else None,
        dout_sup=np.max([g.dout for g in segs], axis=0),
    )


def in_neighbor_acquisitions(sched: GraphSchedule) -> dict[int, list[float]]:
    """Switching times at which each agent gains a new listener.

    Agent ``i`` acquires an in-neighbor ``j`` at ``s_k`` when
    ``adjacency[j, i]`` goes from zero to positive.
    """
    out: dict[int, list[float]] = {}
    for k in range(1, len(sched.graphs)):
        if sched.starts[k] >= sched.horizon:
            break
        before = sched.graphs[k - 1].adjacency > 0
        after = sched.graphs[k].adjacency > 0
        gained = (after & ~before).any(axis=0)
        for i in np.flatnonzero(gained).tolist():
            out.setdefault(i, []).append(sched.starts[k])
    return out


# -- generators ---------------------------------------------------------------


def ring(n: int, weight: float = 1.0, directed: bool = False) -> WeightedDigraph:
    """Cycle 0-1-...-(n-1)-0.  The directed ring has agent i listening to i+1."""
    a = np.zeros((n, n))
    for i in range(n):
        a[i, (i + 1) % n] = weight
        if not directed:
            a[(i + 1) % n, i] = weight
    return WeightedDigraph(a)


def complete(n: int, weight: float = 1.0) -> WeightedDigraph:
    a = np.full((n, n), float(weight))
    np.fill_diagonal(a, 0.0)
    return WeightedDigraph(a)


def pair(n: int, i: int, j: int, weight: float = 1.0) -> WeightedDigraph:
    """Only agents i and j connected, in both directions."""
    if i == j:
        raise GraphError("pair needs two distinct agents")
    a = np.zeros((n, n))
    a[i, j] = a[j, i] = weight
    return WeightedDigraph(a)


def ring_minus_edge(
    n: int, i: int, j: int, weight: float = 1.0, directed: bool = False
) -> WeightedDigraph:
    a = ring(n, weight, directed).adjacency.copy()
    if a[i, j] == 0 and a[j, i] == 0:
        raise GraphError(f"({i}, {j}) is not a ring edge")
    a[i, j] = a[j, i] = 0.0
    return WeightedDigraph(a)


def edgeless(n: int) -> WeightedDigraph:
    return WeightedDigraph(np.zeros((n, n)))


_GENERATORS = {
    "ring": lambda p: ring(p["n"], p.get("weight", 1.0), p.get("directed", False)),
    "complete": lambda p: complete(p["n"], p.get("weight", 1.0)),
    "pair": lambda p: pair(p["n"], p["i"], p["j"], p.get("weight", 1.0)),
    "ring_minus_edge": lambda p: ring_minus_edge(
        p["n"], p["i"], p["j"], p.get("weight", 1.0), p.get("directed", False)
    ),
    "edgeless": lambda p: edgeless(p["n"]),
}


def graph_from_dict(d: dict) -> WeightedDigraph:
    """Build a graph from a scenario literal.

    Either ``{"adjacency": [[...], ...]}`` or a named generator such as
    ``{"kind": "ring", "n": 5, "weight": 1.0, "directed": true}``.
    """
    bounds = tuple(d["weight_bounds"]) if "weight_bounds" in d else None
    if "adjacency" in d:
        return WeightedDigraph(np.asarray(d["adjacency"], dtype=float), bounds)
    kind = d.get("kind")
    if kind not in _GENERATORS:
        raise GraphError(f"unknown graph kind {kind!r}")
    try:
        g = _GENERATORS[kind](d)
    except KeyError as exc:
        raise GraphError(f"graph {kind!r} missing parameter {exc}") from None
    if bounds is not None:
        g = WeightedDigraph(g.adjacency, bounds)
    return g


def graph_to_dict(g: WeightedDigraph) -> dict:
    d: dict = {"adjacency": g.adjacency.tolist()}
    if g.weight_bounds is not None:
        d["weight_bounds"] = list(g.weight_bounds)
    return d


def schedule_from_dict(d: dict, horizon: float = float("inf")) -> GraphSchedule:
    segs = d["segments"]
    starts = [float(s["start"]) for s in segs]
    graphs = [graph_from_dict(s["graph"]) for s in segs]
    return GraphSchedule(tuple(starts), tuple(graphs), horizon=horizon, min_dwell=d.get("min_dwell"))


def schedule_to_dict(sched: GraphSchedule) -> dict:
    d: dict = {
        "segments": [
            {"start": s, "graph": graph_to_dict(g)} for s, g in zip(sched.starts, sched.graphs)
        ]
    }
    if sched.min_dwell is not None:
        d["min_dwell"] = sched.min_dwell
    return d


def piecewise(segments: Sequence[tuple[float, WeightedDigraph]], horizon: float = float("inf"), **kw) -> GraphSchedule:
    starts, graphs = zip(*segments)
    return GraphSchedule(tuple(starts), tuple(graphs), horizon=horizon, **kw)
