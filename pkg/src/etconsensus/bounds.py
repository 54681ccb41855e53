"""Closed-form guarantees: ultimate tracking-error bounds and inter-event times.

Notation in names: ``lambda_sigma`` is the exponential rate constant of the
projected Laplacian flow (``rho`` its overshoot), ``lambda2_lower`` the
infimum of the second Laplacian eigenvalue over the schedule.  For schedules
that are strongly connected at every instant both coincide and ``rho = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import graph as gr
from .dynamics import InitialNorms, initial_norms
from .signals import SignalExpr, estimate_bounds, values


class BoundsError(ValueError):
    pass


@dataclass(frozen=True)
class GuaranteeInputs:
    alpha: float
    beta: float
    eps: np.ndarray
    kappa: np.ndarray
    gamma: float
    rho: float
    lambda_sigma: float
    lambda2_lower: float
    laplacian_sup: float
    dout_bar: np.ndarray
    init: InitialNorms

    def __post_init__(self):
        for name in ("eps", "kappa", "dout_bar"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.alpha > 0 and self.beta > 0):
            raise BoundsError("alpha and beta must be positive")
        if self.rho < 1:
            raise BoundsError("rho must be >= 1")
        if self.gamma < 0 or np.any(self.kappa < 0) or np.any(self.eps < 0):
            raise BoundsError("gamma, kappa and eps must be nonnegative")

    @property
    def eps_norm(self) -> float:
        return float(np.linalg.norm(self.eps))


@dataclass
class GuaranteeReport:
    law: str
    certified: bool
    ultimate_bound: np.ndarray | None = None
    tau: np.ndarray | None = None
    c: np.ndarray | None = None
    eta_or_zeta: float | None = None
    rate: float | None = None
    # alternative readings of the constants, reported next to the main values
    variants: dict = field(default_factory=dict)
    inputs: GuaranteeInputs | None = None

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            return v

        d = {
            "law": self.law,
            "certified": self.certified,
            "ultimate_bound": conv(self.ultimate_bound),
            "tau": conv(self.tau),
            "c": conv(self.c),
            "eta_or_zeta": self.eta_or_zeta,
            "rate": self.rate,
            "variants": conv(self.variants),
        }
        if self.inputs is not None:
            d["inputs"] = conv(
                {k: v for k, v in asdict(self.inputs).items() if k != "init"}
                | {"init": asdict(self.inputs.init)}
            )
        return d


def peak_factor(alpha: float, rate: float) -> float:
    """``max_t (exp(-rate t) - exp(-alpha t)) / (alpha - rate)``.

    Equals ``((b/a)^(b/(a-b)) - (b/a)^(a/(a-b))) / (a - b)`` for ``a != b`` and
    ``1 / (b e)`` at ``a == b`` (a = alpha, b = rate).  Evaluated through the
    equivalent ``(b/a)^(b/(a-b)) / a``, which has no cancellation near a == b.
    """
    if not (alpha > 0 and rate > 0):
        raise BoundsError("rates must be positive")
    if alpha == rate:
        return 1.0 / (rate * math.e)
    u = (alpha - rate) / rate
    return math.exp(-math.log1p(u) / u) / alpha


def eta(inputs: GuaranteeInputs, eps_power: int = 2) -> float:
    """Bound on ``||z_{2:N}(t)||`` under the directed law.

    ``eps_power=2`` squares ``||eps||`` inside the steady-state term;
    ``eps_power=1`` uses ``||eps||``, consistent with the directed ultimate
    bound.  Both are reported.
    """
    p = inputs
    if not (p.lambda_sigma > 0):
        raise BoundsError("lambda_sigma must be positive")
    b = p.beta * p.lambda_sigma
    steady = p.rho * (p.gamma + p.beta * p.laplacian_sup * p.eps_norm**eps_power) / b
    return steady + p.init.z2N + p.rho * p.init.q2N * peak_factor(p.alpha, b)


def c_i(inputs: GuaranteeInputs, eta_or_zeta: float, agent: int) -> float:
    p = inputs
    return (
        p.kappa[agent]
        + (p.alpha + 2.0 * p.beta * p.dout_bar[agent]) * math.hypot(eta_or_zeta, p.init.z1)
        + p.init.q2N
        + p.alpha * eta_or_zeta
    )


def tau_from_c(alpha: float, eps: float, c: float) -> float:
    """``ln(1 + alpha eps / c) / alpha``: time for a mismatch growing at most
    like ``alpha |e| + c`` to travel from 0 to ``eps``."""
    if c == 0:
        # mismatch never grows
        return math.inf
    return math.log1p(alpha * eps / c) / alpha


def tau_directed(inputs: GuaranteeInputs, agent: int, eta_value: float | None = None) -> float:
    """Lower bound on the inter-sample times of ``agent`` under the directed law."""
    if eta_value is None:
        eta_value = eta(inputs)
    c = c_i(inputs, eta_value, agent)
    return tau_from_c(inputs.alpha, inputs.eps[agent], c)


def zeta(inputs: GuaranteeInputs, variant: str = "standard") -> float:
    """Bound on ``||z_{2:N}(t)||`` under the undirected law.

    ``variant="standard"`` offsets by ``alpha ||Pi(x0 - r0) + v0|| / 2``;
    ``variant="lyapunov"`` by ``||q_{2:N}(0)|| / (beta lambda2)``, the offset a
    Lyapunov level-set argument on ``|z_{2:N}|^2 / 2`` yields.
    """
    p = inputs
    if not p.lambda2_lower > 0:
        raise BoundsError("lambda2_lower must be positive (connected schedule)")
    g = p.gamma / (p.beta * p.lambda2_lower)
    if variant == "standard":
        offset = p.alpha * p.init.shifted / 2.0 + g
    elif variant == "lyapunov":
        offset = p.init.q2N / (p.beta * p.lambda2_lower) + g
    else:
        raise BoundsError(f"unknown zeta variant {variant!r}")
    level = offset + math.sqrt(offset**2 + p.eps_norm**2 / (2.0 * p.lambda2_lower))
    return max(p.init.z2N, level)


def tau_undirected(inputs: GuaranteeInputs, agent: int, zeta_value: float | None = None) -> float:
    if zeta_value is None:
        zeta_value = zeta(inputs)
    c = c_i(inputs, zeta_value, agent)
    return tau_from_c(inputs.alpha, inputs.eps[agent] / (2.0 * math.sqrt(inputs.dout_bar[agent])), c)


def ultimate_bound_directed(inputs: GuaranteeInputs) -> float:
    p = inputs
    return p.rho * (p.gamma + p.beta * p.laplacian_sup * p.eps_norm) / (p.beta * p.lambda_sigma)


def ultimate_bound_continuous(inputs: GuaranteeInputs) -> float:
    return inputs.rho * inputs.gamma / (inputs.beta * inputs.lambda_sigma)


def ultimate_bound_undirected(inputs: GuaranteeInputs) -> float:
    p = inputs
    if not p.lambda2_lower > 0:
        raise BoundsError("lambda2_lower must be positive (connected schedule)")
    g = p.gamma / (p.beta * p.lambda2_lower)
    return g + math.sqrt(g**2 + p.eps_norm**2 / (2.0 * p.lambda2_lower))


@dataclass(frozen=True)
class Certification:
    rho: float
    lambda_sigma: float


def certify_lambda_sigma(sched: gr.GraphSchedule) -> Certification | None:
    """``rho = 1`` and ``lambda_sigma = inf lambda2_hat`` when every segment is
    strongly connected and weight-balanced; ``None`` otherwise."""
    lam = []
    for k in sched.active_segments():
        g = sched.graphs[k]
        if not (gr.is_weight_balanced(g) and gr.is_strongly_connected(g)):
            return None
        lam.append(gr.spectral_summary(g).lambda2_hat)
    return Certification(rho=1.0, lambda_sigma=min(lam))


def build_inputs(
    schedule: gr.GraphSchedule,
    signals: Sequence[SignalExpr],
    alpha: float,
    beta: float,
    eps,
    x0,
    v0,
    horizon: float,
    rho: float | None = None,
    lambda_sigma: float | None = None,
    grid_step: float = 1e-3,
) -> tuple[GuaranteeInputs | None, bool]:
    """Assemble guarantee inputs for a scenario.

    Returns ``(inputs, certified)``.  Without certification, user-supplied
    ``rho`` and ``lambda_sigma`` are used if both are given, else ``None``.
    """
    cert = certify_lambda_sigma(schedule)
    certified = cert is not None
    if cert is None:
        if rho is None or lambda_sigma is None:
            return None, False
        cert = Certification(rho, lambda_sigma)
    ext = gr.schedule_extrema(schedule)
    ib = estimate_bounds(signals, horizon, grid_step)
    n = schedule.n
    inputs = GuaranteeInputs(
        alpha=alpha,
        beta=beta,
        eps=np.broadcast_to(np.asarray(eps, dtype=float), (n,)).copy(),
        kappa=ib.kappa,
        gamma=ib.gamma,
        rho=cert.rho,
        lambda_sigma=cert.lambda_sigma,
        lambda2_lower=ext.lambda2_inf if ext.lambda2_inf is not None else cert.lambda_sigma,
        laplacian_sup=ext.laplacian_sup,
        dout_bar=ext.dout_sup,
        init=initial_norms(x0, v0, values(signals, 0.0), alpha),
    )
    return inputs, certified


def _all_undirected_connected(schedule: gr.GraphSchedule) -> bool:
    return all(
        schedule.graphs[k].is_undirected and gr.is_strongly_connected(schedule.graphs[k])
        for k in schedule.active_segments()
    )


def report_for(law_name: str, inputs: GuaranteeInputs | None, certified: bool, schedule=None) -> GuaranteeReport:
    """Evaluate every guarantee that applies to ``law_name``."""
    if inputs is None:
        return GuaranteeReport(law=law_name, certified=False)
    n = len(inputs.eps)
    agents = range(n)
    if law_name == "directed":
        e = eta(inputs)
        e1 = eta(inputs, eps_power=1)
        b = inputs.beta * inputs.lambda_sigma
        return GuaranteeReport(
            law=law_name,
            certified=certified,
            ultimate_bound=np.full(n, ultimate_bound_directed(inputs)),
            tau=np.array([tau_directed(inputs, i, e) for i in agents]),
            c=np.array([c_i(inputs, e, i) for i in agents]),
            eta_or_zeta=e,
            rate=min(inputs.alpha, b),
            variants={
                "eta_eps_norm": e1,
                "tau_eps_norm": np.array([tau_directed(inputs, i, e1) for i in agents]),
                "ultimate_bound_lambda2": inputs.rho
                * (inputs.gamma + inputs.beta * inputs.laplacian_sup * inputs.eps_norm)
                / (inputs.beta * inputs.lambda2_lower),
            },
            inputs=inputs,
        )
    if law_name == "undirected":
        if schedule is not None and not _all_undirected_connected(schedule):
            return GuaranteeReport(law=law_name, certified=False, inputs=inputs)
        z = zeta(inputs)
        zl = zeta(inputs, "lyapunov")
        return GuaranteeReport(
            law=law_name,
            certified=certified,
            ultimate_bound=np.full(n, ultimate_bound_undirected(inputs)),
            tau=np.array([tau_undirected(inputs, i, z) for i in agents]),
            c=np.array([c_i(inputs, z, i) for i in agents]),
            eta_or_zeta=z,
            # V = |z|^2 / 2 decays at beta*lambda2, so |z| at half that
            rate=min(inputs.alpha, inputs.beta * inputs.lambda2_lower / 2.0),
            variants={
                "zeta_lyapunov": zl,
                "tau_lyapunov": np.array([tau_undirected(inputs, i, zl) for i in agents]),
            },
            inputs=inputs,
        )
    if law_name == "continuous":
        return GuaranteeReport(
            law=law_name,
            certified=certified,
            ultimate_bound=np.full(n, ultimate_bound_continuous(inputs)),
            tau=np.zeros(n),
            rate=min(inputs.alpha, inputs.beta * inputs.lambda_sigma),
            inputs=inputs,
        )
    # sampled-data baselines carry no analytic guarantee here
    return GuaranteeReport(law=law_name, certified=False, inputs=inputs)
