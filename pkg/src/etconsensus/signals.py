"""Reference signals as small expression trees with closed-form derivatives.

Every node evaluates on scalars or numpy arrays of times.  The JSON form of a
node is ``{"kind": ..., **params}``; see :func:`from_dict`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SAFETY = 1.01


class SignalError(ValueError):
    pass


class SignalExpr:
    kind: str = ""

    def value(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __add__(self, other):
        other = other if isinstance(other, SignalExpr) else Const(float(other))
        return Sum((self, other))

    __radd__ = __add__

    def __mul__(self, k):
        return Scale(float(k), self)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return Scale(-1.0, self)


@dataclass(frozen=True)
class Const(SignalExpr):
    c: float
    kind = "const"

    def value(self, t):
        return self.c + 0.0 * np.asarray(t, dtype=float)

    def derivative(self, t):
        return 0.0 * np.asarray(t, dtype=float)

    def to_dict(self):
        return {"kind": "const", "c": self.c}


@dataclass(frozen=True)
class Sin(SignalExpr):
    """``amp * sin(freq * t + phase)``"""

    amp: float = 1.0
    freq: float = 1.0
    phase: float = 0.0
    kind = "sin"

    def value(self, t):
        return self.amp * np.sin(self.freq * np.asarray(t, dtype=float) + self.phase)

    def derivative(self, t):
        return self.amp * self.freq * np.cos(self.freq * np.asarray(t, dtype=float) + self.phase)

    def to_dict(self):
        return {"kind": "sin", "amp": self.amp, "freq": self.freq, "phase": self.phase}


@dataclass(frozen=True)
class Cos(SignalExpr):
    amp: float = 1.0
    freq: float = 1.0
    phase: float = 0.0
    kind = "cos"

    def value(self, t):
        return self.amp * np.cos(self.freq * np.asarray(t, dtype=float) + self.phase)

    def derivative(self, t):
        return -self.amp * self.freq * np.sin(self.freq * np.asarray(t, dtype=float) + self.phase)

    def to_dict(self):
        return {"kind": "cos", "amp": self.amp, "freq": self.freq, "phase": self.phase}


@dataclass(frozen=True)
class Atan(SignalExpr):
    """``amp * arctan(rate * t)``"""

    rate: float = 1.0
    amp: float = 1.0
    kind = "atan"

    def value(self, t):
        return self.amp * np.arctan(self.rate * np.asarray(t, dtype=float))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.amp * self.rate / (1.0 + (self.rate * t) ** 2)

    def to_dict(self):
        return {"kind": "atan", "rate": self.rate, "amp": self.amp}


@dataclass(frozen=True)
class Exp(SignalExpr):
    """``amp * exp(-rate * t)``"""

    rate: float = 1.0
    amp: float = 1.0
    kind = "exp"

    def value(self, t):
        return self.amp * np.exp(-self.rate * np.asarray(t, dtype=float))

    def derivative(self, t):
        return -self.rate * self.value(t)

    def to_dict(self):
        return {"kind": "exp", "rate": self.rate, "amp": self.amp}


@dataclass(frozen=True)
class Rational(SignalExpr):
    """``amp / (t + offset) ** power`` with ``offset > 0``."""

    offset: float
    power: float = 1.0
    amp: float = 1.0
    kind = "rational"

    def __post_init__(self):
        if not self.offset > 0:
            raise SignalError("rational signal needs offset > 0 (pole on [0, inf) otherwise)")

    def value(self, t):
        return self.amp * (np.asarray(t, dtype=float) + self.offset) ** (-self.power)

    def derivative(self, t):
        return -self.power * self.amp * (np.asarray(t, dtype=float) + self.offset) ** (-self.power - 1)

    def to_dict(self):
        return {"kind": "rational", "offset": self.offset, "power": self.power, "amp": self.amp}


@dataclass(frozen=True)
class Poly(SignalExpr):
    """Polynomial with coefficients in increasing degree."""

    coeffs: tuple[float, ...]
    kind = "poly"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def value(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coeffs)

    def derivative(self, t):
        d = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), d)

    def to_dict(self):
        return {"kind": "poly", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Sum(SignalExpr):
    terms: tuple[SignalExpr, ...]
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise SignalError("sum needs at least one term")

    def value(self, t):
        return sum(term.value(t) for term in self.terms)

    def derivative(self, t):
        return sum(term.derivative(t) for term in self.terms)

    def to_dict(self):
        return {"kind": "sum", "terms": [term.to_dict() for term in self.terms]}


@dataclass(frozen=True)
class Scale(SignalExpr):
    factor: float
    expr: SignalExpr
    kind = "scale"

    def value(self, t):
        return self.factor * self.expr.value(t)

    def derivative(self, t):
        return self.factor * self.expr.derivative(t)

    def to_dict(self):
        return {"kind": "scale", "factor": self.factor, "expr": self.expr.to_dict()}


def from_dict(d: dict) -> SignalExpr:
    kind = d.get("kind")
    p = {k: v for k, v in d.items() if k != "kind"}
    try:
        if kind == "const":
            return Const(float(p["c"]))
        if kind == "sin":
            return Sin(**p)
        if kind == "cos":
            return Cos(**p)
        if kind == "atan":
            return Atan(**p)
        if kind == "exp":
            return Exp(**p)
        if kind == "rational":
            return Rational(**p)
        if kind == "poly":
            return Poly(tuple(p["coeffs"]))
        if kind == "sum":
            return Sum(tuple(from_dict(x) for x in p["terms"]))
        if kind == "scale":
            return Scale(float(p["factor"]), from_dict(p["expr"]))
    except (KeyError, TypeError) as exc:
        raise SignalError(f"bad parameters for signal {kind!r}: {exc}") from None
    raise SignalError(f"unknown signal kind {kind!r}")


def value(s: SignalExpr, t):
    return s.value(t)


def derivative_value(s: SignalExpr, t):
    return s.derivative(t)


def values(signals: Sequence[SignalExpr], t: float) -> np.ndarray:
    return np.array([float(s.value(t)) for s in signals])


def derivatives(signals: Sequence[SignalExpr], t: float) -> np.ndarray:
    return np.array([float(s.derivative(t)) for s in signals])


@dataclass(frozen=True)
class InputBounds:
    kappa: np.ndarray
    gamma: float
    sampled_on: str


def estimate_bounds(
    signals: Sequence[SignalExpr], horizon: float, grid_step: float, safety: float = SAFETY
) -> InputBounds:
    """Grid estimates of ``|dr_i/dt|_ess`` per agent and ``||Pi_N dr/dt||_ess``.

    Both maxima are inflated by ``safety`` (1% by default).
    """
    if not grid_step > 0:
        raise SignalError("grid_step must be positive")
    ts = np.arange(0.0, horizon + 0.5 * grid_step, grid_step)
    rdot = np.vstack([np.broadcast_to(s.derivative(ts), ts.shape) for s in signals])
    kappa = np.abs(rdot).max(axis=1) * safety
    centered = rdot - rdot.mean(axis=0, keepdims=True)
    gamma = float(np.sqrt((centered**2).sum(axis=0)).max()) * safety
    return InputBounds(kappa=kappa, gamma=gamma, sampled_on=f"[0, {horizon:g}] step {grid_step:g}")
