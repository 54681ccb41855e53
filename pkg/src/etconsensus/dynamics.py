"""Right-hand sides of the consensus dynamics and diagnostic coordinates.

State is carried as aggregate vectors ``x`` (agreement), ``v`` (integral
state) and ``x_hat`` (last broadcast values).  All functions take the
Laplacian of the active graph rather than the graph itself so the engine can
cache it per segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .signals import SignalExpr, derivatives, values


@dataclass
class AgentState:
    x: float
    v: float
    x_hat: float
    last_sample_time: float

    @property
    def mismatch(self) -> float:
        return self.x_hat - self.x


@dataclass
class NetworkState:
    t: float
    x: np.ndarray
    v: np.ndarray
    x_hat: np.ndarray
    last_sample: np.ndarray
    segment: int = 0

    @classmethod
    def initial(cls, x0, v0) -> "NetworkState":
        x0 = np.array(x0, dtype=float)
        return cls(
            t=0.0,
            x=x0,
            v=np.array(v0, dtype=float),
            x_hat=x0.copy(),
            last_sample=np.zeros_like(x0),
        )

    def agent(self, i: int) -> AgentState:
        return AgentState(float(self.x[i]), float(self.v[i]), float(self.x_hat[i]), float(self.last_sample[i]))

    @property
    def agents(self) -> list[AgentState]:
        return [self.agent(i) for i in range(len(self.x))]


def _check(lap, *vecs):
    n = lap.shape[0]
    for vec in vecs:
        if np.shape(vec) != (n,):
            raise ValueError(f"dimension mismatch: expected ({n},), got {np.shape(vec)}")


def _check_gains(alpha, beta):
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")


def consensus_rhs(x, v, coupled, lap, r, rdot, alpha, beta):
    """Shared form: ``coupled`` is the vector that enters the Laplacian term."""
    lc = lap @ coupled
    return rdot - alpha * (x - r) - beta * lc - v, alpha * beta * lc


def rhs_continuous(x, v, lap, r, rdot, alpha, beta):
    """Continuous-communication dynamics: neighbors see true states.

    ``r`` and ``rdot`` are the input values and derivatives at the
    evaluation time.  Returns ``(dx, dv)``.
    """
    _check_gains(alpha, beta)
    _check(lap, x, v, r, rdot)
    return consensus_rhs(x, v, x, lap, r, rdot, alpha, beta)


def rhs_event_triggered(x, v, x_hat, lap, r, rdot, alpha, beta):
    """Event-triggered dynamics: every coupling uses last broadcast values."""
    _check_gains(alpha, beta)
    _check(lap, x, v, x_hat, r, rdot)
    return consensus_rhs(x, v, x_hat, lap, r, rdot, alpha, beta)


def rhs_shifted(x_bar, v, x_hat, lap, r, alpha, beta):
    """Derivative-free form in ``x_bar = x - r``; no input derivative is used.

    ``x_hat`` holds broadcast values of ``x`` (not ``x_bar``).  Pass
    ``x_hat=None`` for continuous communication, in which case agents
    exchange ``x_bar + r``.  Returns ``(dx_bar, dv)``.
    """
    _check_gains(alpha, beta)
    if x_hat is None:
        x_hat = x_bar + r
    _check(lap, x_bar, v, x_hat, r)
    lc = lap @ x_hat
    return -alpha * x_bar - beta * lc - v, alpha * beta * lc


def rhs_at(t, x, v, x_hat, lap, signals, alpha, beta):
    """Convenience wrapper evaluating the inputs at ``t``.

    ``x_hat=None`` selects continuous communication.
    """
    r, rdot = values(signals, t), derivatives(signals, t)
    if x_hat is None:
        return rhs_continuous(x, v, lap, r, rdot, alpha, beta)
    return rhs_event_triggered(x, v, x_hat, lap, r, rdot, alpha, beta)


# -- diagnostic coordinates ---------------------------------------------------


def complement_basis(n: int) -> np.ndarray:
    """Orthonormal ``n x (n-1)`` basis of the complement of ``1/sqrt(n)``."""
    if n == 1:
        return np.zeros((1, 0))
    m = np.eye(n)
    m[:, 0] = 1.0 / np.sqrt(n)
    q, _ = np.linalg.qr(m)
    # QR may flip the sign of the first column; either way the rest spans the complement
    return q[:, 1:]


def transfer_matrix(basis: np.ndarray) -> np.ndarray:
    n = basis.shape[0]
    return np.column_stack([np.full(n, 1.0 / np.sqrt(n)), basis])


def projector(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def center(u: np.ndarray) -> np.ndarray:
    """``Pi_N u``"""
    return u - u.mean()


@dataclass(frozen=True)
class TransformedState:
    q1: float
    q2N: np.ndarray
    z1: float
    z2N: np.ndarray
    basis: np.ndarray


def to_transformed(x, v, r, alpha, basis) -> TransformedState:
    """Coordinates that split out the constant-rate modes.

    ``r`` are the input values at the same instant as ``x`` and ``v``.
    """
    x, v, r = (np.asarray(a, dtype=float) for a in (x, v, r))
    n = len(x)
    w = v - alpha * center(r)
    y = x - r.mean()
    e = np.full(n, 1.0 / np.sqrt(n))
    q1 = float(e @ w)
    q2N = alpha * (basis.T @ y) + basis.T @ w
    return TransformedState(q1=q1, q2N=q2N, z1=float(e @ y), z2N=basis.T @ y, basis=basis)


def tracking_error(x, r) -> np.ndarray:
    """``|x_i - mean(r)|`` per agent."""
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.mean(r))


@dataclass(frozen=True)
class InitialNorms:
    """Norms of the initial condition that enter the analytic bounds."""

    z2N: float  # ||Pi (x0 - mean(r0) 1)||
    q2N: float  # ||alpha Pi (x0 - r0) + v0||
    z1: float  # |1^T (x0 - mean(r0) 1)| / sqrt(N)
    shifted: float  # ||Pi (x0 - r0) + v0||, scaled by alpha in the undirected bound


def initial_norms(x0, v0, r0, alpha) -> InitialNorms:
    x0, v0, r0 = (np.asarray(a, dtype=float) for a in (x0, v0, r0))
    n = len(x0)
    y0 = x0 - r0.mean()
    return InitialNorms(
        z2N=float(np.linalg.norm(center(y0))),
        q2N=float(np.linalg.norm(alpha * center(x0 - r0) + v0)),
        z1=float(abs(y0.sum()) / np.sqrt(n)),
        shifted=float(np.linalg.norm(center(x0 - r0) + v0)),
    )


def signal_vectors(signals: Sequence[SignalExpr], ts) -> np.ndarray:
    """Input values on a time grid, shape ``(len(ts), N)``."""
    ts = np.asarray(ts, dtype=float)
    return np.column_stack([np.broadcast_to(s.value(ts), ts.shape) for s in signals])


def signal_derivative_vectors(signals: Sequence[SignalExpr], ts) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    return np.column_stack([np.broadcast_to(s.derivative(ts), ts.shape) for s in signals])
