"""Communication laws: when does an agent sample and broadcast its state.

Boundary convention: a threshold law fires when its bound is reached, not
only when it is exceeded.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np


class TriggerError(ValueError):
    pass


class EventKind(str, enum.Enum):
    SAMPLE = "sample"
    SWITCH_REBROADCAST = "rebroadcast"


class TriggerEvent(NamedTuple):
    agent: int
    time: float
    kind: EventKind
    value: float


def _positive_eps(eps) -> tuple[float, ...]:
    eps = tuple(float(e) for e in np.atleast_1d(eps))
    if not eps or min(eps) <= 0:
        raise TriggerError("threshold laws need every eps_i > 0")
    return eps


@dataclass(frozen=True)
class DirectedThreshold:
    """Sample when ``|x_hat_i - x_i| >= eps_i``."""

    eps: tuple[float, ...]
    name = "directed"

    def __post_init__(self):
        object.__setattr__(self, "eps", _positive_eps(self.eps))

    def margin(self, x, x_hat, adjacency, dout) -> np.ndarray:
        """Nonnegative exactly where the agent must sample."""
        return np.abs(x_hat - x) - np.asarray(self.eps)

    def fire_mask(self, x, x_hat, adjacency, dout) -> np.ndarray:
        return self.margin(x, x_hat, adjacency, dout) >= 0

    def to_dict(self):
        return {"law": self.name, "eps": list(self.eps)}


@dataclass(frozen=True)
class UndirectedRelative:
    """Sample when the squared mismatch reaches the neighbor-relative slack."""

    eps: tuple[float, ...]
    name = "undirected"

    def __post_init__(self):
        object.__setattr__(self, "eps", _positive_eps(self.eps))

    @classmethod
    def from_radius(cls, radius, dout_bar) -> "UndirectedRelative":
        """Choose ``eps_i`` so that ``eps_i / (2 sqrt(dout_bar_i)) == radius_i``."""
        radius = np.broadcast_to(np.asarray(radius, dtype=float), np.shape(dout_bar))
        return cls(tuple((2.0 * radius * np.sqrt(dout_bar)).tolist()))

    def slack(self, x_hat, adjacency, dout) -> np.ndarray:
        """Right-hand side of the squared-mismatch test, per agent."""
        if np.any(dout <= 0):
            raise TriggerError(
                f"undirected law undefined for agents with zero out-degree: {np.flatnonzero(dout <= 0).tolist()}"
            )
        eps = np.asarray(self.eps)
        diff = x_hat[:, None] - x_hat[None, :]
        return ((adjacency * diff**2).sum(axis=1) + eps**2) / (4.0 * dout)

    def margin(self, x, x_hat, adjacency, dout) -> np.ndarray:
        return (x_hat - x) ** 2 - self.slack(x_hat, adjacency, dout)

    def fire_mask(self, x, x_hat, adjacency, dout) -> np.ndarray:
        return self.margin(x, x_hat, adjacency, dout) >= 0

    def to_dict(self):
        return {"law": self.name, "eps": list(self.eps)}


@dataclass(frozen=True)
class Continuous:
    name = "continuous"

    def fire_mask(self, x, x_hat, adjacency, dout) -> np.ndarray:
        return np.ones(len(x), dtype=bool)

    def to_dict(self):
        return {"law": self.name}


@dataclass(frozen=True)
class Periodic:
    """Synchronous sampling every ``delta`` seconds, snapped to the nearest grid point."""

    delta: float
    name = "periodic"

    def __post_init__(self):
        if not self.delta > 0:
            raise TriggerError("periodic law needs delta > 0")

    def due(self, t: float, h: float, rounds_done: int) -> bool:
        return t + 0.5 * h > rounds_done * self.delta

    def fire_mask(self, x, x_hat, adjacency, dout) -> np.ndarray:
        raise TriggerError("periodic law is clock driven; use due()")

    def to_dict(self):
        return {"law": self.name, "delta": self.delta}


TriggerLaw = Union[DirectedThreshold, UndirectedRelative, Continuous, Periodic]


def law_from_dict(d: dict, n: int | None = None) -> TriggerLaw:
    law = d.get("law")
    if law in ("directed", "undirected"):
        eps = d["eps"]
        if np.ndim(eps) == 0 and n is not None:
            eps = [eps] * n
        if n is not None and len(eps) != n:
            raise TriggerError(f"expected {n} thresholds, got {len(eps)}")
        return DirectedThreshold(eps) if law == "directed" else UndirectedRelative(eps)
    if law == "continuous":
        return Continuous()
    if law == "periodic":
        return Periodic(float(d["delta"]))
    raise TriggerError(f"unknown trigger law {law!r}")


def should_fire_directed(x: float, x_hat: float, eps_i: float) -> bool:
    if eps_i <= 0:
        raise TriggerError("eps_i must be positive")
    return abs(x_hat - x) >= eps_i


def should_fire_undirected(
    x: float,
    x_hat: float,
    neighbor_xhats: Sequence[tuple[float, float]],
    dout_i: float,
    eps_i: float,
) -> bool:
    """``neighbor_xhats`` holds ``(a_ij, x_hat_j)`` pairs for agent i's out-neighbors."""
    if dout_i <= 0:
        raise TriggerError("undirected law undefined for zero out-degree")
    if eps_i <= 0:
        raise TriggerError("eps_i must be positive")
    disagreement = sum(a * (x_hat - xj) ** 2 for a, xj in neighbor_xhats)
    return (x_hat - x) ** 2 >= (disagreement + eps_i**2) / (4.0 * dout_i)


def threshold_equivalent_eps(eps_i: float, dout_bar_i: float) -> float:
    """Pure-threshold radius implied by the undirected law when neighbors agree."""
    if dout_bar_i <= 0:
        raise TriggerError("dout_bar_i must be positive")
    return eps_i / (2.0 * math.sqrt(dout_bar_i))
