"""Distributed and centralized first-order methods behind one stepping interface.

Every method is a pair of functions ``init_<name>(suite, x0, ...)`` and
``step_<name>(state, suite, W)``. States are values: a step never mutates its
input. Row ``i`` of every iterate matrix belongs to agent ``i``; centralized
methods keep a single row started from the mean of ``x0``.

Use :func:`initialize` and :func:`step` to drive any method by name.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import InvalidParam, NonFinite, NotStronglyConvex, StepTooLarge
from .schedules import StepSchedule, next_alpha, schedule_eta

__all__ = [
    "AlgoState",
    "METHODS",
    "DISTRIBUTED",
    "CENTRALIZED",
    "initialize",
    "step",
    "default_tau",
    "init_acc_dngd_sc",
    "step_acc_dngd_sc",
    "init_acc_dngd_nsc",
    "step_acc_dngd_nsc",
    "init_cngd_sc",
    "step_cngd_sc",
    "init_cngd_nsc",
    "step_cngd_nsc",
    "init_cgd",
    "step_cgd",
    "init_dgd",
    "step_dgd",
    "init_dng",
    "step_dng",
    "init_dnc",
    "step_dnc",
    "init_extra",
    "step_extra",
    "init_acc_dgd",
    "step_acc_dgd",
]


@dataclass
class AlgoState:
    """Iterates of one method at iteration ``t``.

    ``grad`` holds the per-agent gradients at the point each method queries
    (``y`` for the momentum methods, ``x`` otherwise), cached so every step
    evaluates each local gradient exactly once.
    """

    method: str
    t: int
    x: np.ndarray
    v: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    grad: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None
    grad_prev: Optional[np.ndarray] = None
    alpha: float = float("nan")
    eta: float = float("nan")
    comm: int = 0
    schedule: Optional[StepSchedule] = None
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def query_point(self) -> np.ndarray:
        """Matrix at which ``grad`` was evaluated."""
        return self.y if self.y is not None else self.x

    @property
    def tracks_gradient(self) -> bool:
        return self.s is not None

    def check_finite(self):
        for name in ("x", "v", "y", "s"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise NonFinite(f"{self.method}: non-finite {name} at t={self.t}")
        return self


def row_mean(M: np.ndarray) -> np.ndarray:
    """Mean of the rows, anchored at the first row so identical rows give it exactly."""
    return M[0] + (M - M[0]).mean(axis=0)


def _x0_block(suite, x0):
    if x0 is None:
        return np.zeros((suite.n, suite.dim))
    x0 = np.array(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.tile(x0, (suite.n, 1))
    if x0.shape != (suite.n, suite.dim):
        raise InvalidParam(f"initial point must be ({suite.n}, {suite.dim}), got {x0.shape}")
    return x0


def _central_x0(suite, x0):
    return _x0_block(suite, x0).mean(axis=0, keepdims=True)


def _central_grad(suite, x):
    return suite.global_grad(x[0])[None, :]


def _positive(name, value):
    if not value > 0:
        raise InvalidParam(f"{name} must be positive, got {value}")
    return float(value)


# -- accelerated gradient-tracking methods ------------------------------------


def init_acc_dngd_sc(suite, x0=None, eta=None) -> AlgoState:
    eta = _positive("eta", eta)
    if not suite.mu > 0:
        raise NotStronglyConvex("the strongly convex method needs mu > 0")
    alpha = math.sqrt(suite.mu * eta)
    if not alpha < 1:
        raise StepTooLarge(f"sqrt(mu * eta) = {alpha:.4g} must be below 1")
    x = _x0_block(suite, x0)
    g = suite.grads(x)
    return AlgoState("acc_dngd_sc", 0, x, v=x.copy(), y=x.copy(), s=g.copy(), grad=g, alpha=alpha, eta=eta)


def step_acc_dngd_sc(state: AlgoState, suite, W) -> AlgoState:
    a, eta = state.alpha, state.eta
    wy = W @ state.y
    x1 = wy - eta * state.s
    v1 = (1 - a) * (W @ state.v) + a * wy - (eta / a) * state.s
    y1 = (x1 + a * v1) / (1 + a)
    g1 = suite.grads(y1)
    s1 = W @ state.s + g1 - state.grad
    return replace(state, t=state.t + 1, x=x1, v=v1, y=y1, s=s1, grad=g1, comm=state.comm + 1).check_finite()


def init_acc_dngd_nsc(suite, x0=None, schedule: StepSchedule = None, init_mode="relaxed") -> AlgoState:
    """Start the convex method; ``init_mode`` is ``"exact"`` (averaged gradient) or ``"relaxed"``."""
    if schedule is None or schedule.variant not in ("fixed", "vanishing"):
        raise InvalidParam("the convex method needs a fixed or vanishing schedule")
    eta0 = schedule_eta(schedule, 0)
    if not eta0 * suite.L < 1:
        raise StepTooLarge(f"eta_0 * L = {eta0 * suite.L:.4g} must be below 1")
    x = _x0_block(suite, x0)
    g = suite.grads(x)
    mode = init_mode.lower()
    if mode == "exact":
        s = np.tile(row_mean(g), (suite.n, 1))
    elif mode == "relaxed":
        s = g.copy()
    else:
        raise InvalidParam(f"init_mode must be 'exact' or 'relaxed', got {init_mode!r}")
    return AlgoState(
        "acc_dngd_nsc", 0, x, v=x.copy(), y=x.copy(), s=s, grad=g,
        alpha=math.sqrt(eta0 * suite.L), eta=eta0, schedule=schedule, params={"init_mode": mode},
    )


def step_acc_dngd_nsc(state: AlgoState, suite, W) -> AlgoState:
    a, eta = state.alpha, state.eta
    eta1 = schedule_eta(state.schedule, state.t + 1)
    a1 = next_alpha(a, eta, eta1)
    x1 = W @ state.y - eta * state.s
    v1 = W @ state.v - (eta / a) * state.s
    y1 = (1 - a1) * x1 + a1 * v1
    g1 = suite.grads(y1)
    s1 = W @ state.s + g1 - state.grad
    return replace(
        state, t=state.t + 1, x=x1, v=v1, y=y1, s=s1, grad=g1, alpha=a1, eta=eta1, comm=state.comm + 1
    ).check_finite()


def init_acc_dgd(suite, x0=None, eta=None, schedule: StepSchedule = None) -> AlgoState:
    schedule = schedule or StepSchedule.fixed(_positive("eta", eta))
    x = _x0_block(suite, x0)
    g = suite.grads(x)
    return AlgoState("acc_dgd", 0, x, s=g.copy(), grad=g, eta=schedule_eta(schedule, 0), schedule=schedule)


def step_acc_dgd(state: AlgoState, suite, W) -> AlgoState:
    x1 = W @ state.x - state.eta * state.s
    g1 = suite.grads(x1)
    s1 = W @ state.s + g1 - state.grad
    return replace(
        state, t=state.t + 1, x=x1, s=s1, grad=g1,
        eta=schedule_eta(state.schedule, state.t + 1), comm=state.comm + 1,
    ).check_finite()


# -- centralized references ---------------------------------------------------


def init_cngd_sc(suite, x0=None, eta=None) -> AlgoState:
    eta = _positive("eta", eta)
    if not suite.mu > 0:
        raise NotStronglyConvex("the strongly convex method needs mu > 0")
    x = _central_x0(suite, x0)
    return AlgoState(
        "cngd_sc", 0, x, v=x.copy(), y=x.copy(), grad=_central_grad(suite, x),
        alpha=math.sqrt(suite.mu * eta), eta=eta,
    )


def step_cngd_sc(state: AlgoState, suite, W=None) -> AlgoState:
    a, eta, g = state.alpha, state.eta, state.grad
    x1 = state.y - eta * g
    v1 = (1 - a) * state.v + a * state.y - (eta / a) * g
    y1 = (x1 + a * v1) / (1 + a)
    return replace(state, t=state.t + 1, x=x1, v=v1, y=y1, grad=_central_grad(suite, y1)).check_finite()


def init_cngd_nsc(suite, x0=None, eta=None, alpha0=0.5, schedule: StepSchedule = None) -> AlgoState:
    schedule = schedule or StepSchedule.fixed(_positive("eta", eta))
    if not 0 < alpha0 < 1:
        raise InvalidParam(f"alpha0 must lie in (0, 1), got {alpha0}")
    x = _central_x0(suite, x0)
    return AlgoState(
        "cngd_nsc", 0, x, v=x.copy(), y=x.copy(), grad=_central_grad(suite, x),
        alpha=float(alpha0), eta=schedule_eta(schedule, 0), schedule=schedule,
    )


def step_cngd_nsc(state: AlgoState, suite, W=None) -> AlgoState:
    a, eta, g = state.alpha, state.eta, state.grad
    eta1 = schedule_eta(state.schedule, state.t + 1)
    a1 = next_alpha(a, eta, eta1)
    x1 = state.y - eta * g
    v1 = state.v - (eta / a) * g
    y1 = (1 - a1) * x1 + a1 * v1
    return replace(
        state, t=state.t + 1, x=x1, v=v1, y=y1, grad=_central_grad(suite, y1), alpha=a1, eta=eta1
    ).check_finite()


def init_cgd(suite, x0=None, eta=None) -> AlgoState:
    x = _central_x0(suite, x0)
    return AlgoState("cgd", 0, x, grad=_central_grad(suite, x), eta=_positive("eta", eta))


def step_cgd(state: AlgoState, suite, W=None) -> AlgoState:
    x1 = state.x - state.eta * state.grad
    return replace(state, t=state.t + 1, x=x1, grad=_central_grad(suite, x1)).check_finite()


# -- distributed baselines ----------------------------------------------------


def init_dgd(suite, x0=None, c=None, schedule: StepSchedule = None) -> AlgoState:
    """Consensus plus local gradient; the first step uses the schedule at ``t = 1``."""
    schedule = schedule or StepSchedule.invsqrt(_positive("c", c))
    x = _x0_block(suite, x0)
    return AlgoState("dgd", 0, x, grad=suite.grads(x), eta=schedule_eta(schedule, 1), schedule=schedule)


def step_dgd(state: AlgoState, suite, W) -> AlgoState:
    x1 = W @ state.x - state.eta * state.grad
    return replace(
        state, t=state.t + 1, x=x1, grad=suite.grads(x1),
        eta=schedule_eta(state.schedule, state.t + 2), comm=state.comm + 1,
    ).check_finite()


def init_dng(suite, x0=None, c=None) -> AlgoState:
    c = _positive("c", c)
    x = _x0_block(suite, x0)
    sched = StepSchedule.harmonic(c)
    return AlgoState("dng", 0, x, y=x.copy(), grad=suite.grads(x), eta=schedule_eta(sched, 0), schedule=sched)


def step_dng(state: AlgoState, suite, W) -> AlgoState:
    t = state.t
    x1 = W @ state.y - state.eta * state.grad
    y1 = x1 + (t / (t + 3)) * (x1 - state.x)
    return replace(
        state, t=t + 1, x=x1, y=y1, grad=suite.grads(y1),
        eta=schedule_eta(state.schedule, t + 1), comm=state.comm + 1,
    ).check_finite()


def default_tau(t: int) -> int:
    """Inner consensus rounds growing like ``log2(t)``."""
    return int(math.ceil(math.log2(t + 2)))


def init_dnc(suite, x0=None, eta=None, tau_fn: Callable[[int], int] = None) -> AlgoState:
    eta = _positive("eta", eta)
    if eta * suite.L > 1 + 1e-12:
        raise StepTooLarge(f"eta * L = {eta * suite.L:.4g} exceeds 1")
    x = _x0_block(suite, x0)
    return AlgoState(
        "dnc", 0, x, y=x.copy(), grad=suite.grads(x), eta=eta,
        params={"tau_fn": tau_fn or default_tau},
    )


def _mix_power(W, M, k):
    for _ in range(k):
        M = W @ M
    return M


def step_dnc(state: AlgoState, suite, W) -> AlgoState:
    t = state.t
    tau_fn = state.params["tau_fn"]
    tx = ty = int(tau_fn(t))
    if tx < 0:
        raise InvalidParam("tau must be non-negative")
    x1 = _mix_power(W, state.y - state.eta * state.grad, tx)
    y1 = _mix_power(W, x1 + (t / (t + 3)) * (x1 - state.x), ty)
    return replace(
        state, t=t + 1, x=x1, y=y1, grad=suite.grads(y1), comm=state.comm + tx + ty
    ).check_finite()


def init_extra(suite, x0=None, eta=None) -> AlgoState:
    x = _x0_block(suite, x0)
    return AlgoState("extra", 0, x, grad=suite.grads(x), eta=_positive("eta", eta))


def step_extra(state: AlgoState, suite, W) -> AlgoState:
    eta = state.eta
    if state.t == 0:
        x1 = W @ state.x - eta * state.grad
    else:
        # (I + W) x_t - (I + W)/2 x_{t-1}
        x1 = state.x + W @ state.x - 0.5 * (state.x_prev + W @ state.x_prev) - eta * (state.grad - state.grad_prev)
    return replace(
        state, t=state.t + 1, x=x1, x_prev=state.x, grad=suite.grads(x1), grad_prev=state.grad,
        comm=state.comm + 1,
    ).check_finite()


# -- dispatch -----------------------------------------------------------------

METHODS = {
    "acc_dngd_sc": (init_acc_dngd_sc, step_acc_dngd_sc),
    "acc_dngd_nsc": (init_acc_dngd_nsc, step_acc_dngd_nsc),
    "acc_dgd": (init_acc_dgd, step_acc_dgd),
    "cngd_sc": (init_cngd_sc, step_cngd_sc),
    "cngd_nsc": (init_cngd_nsc, step_cngd_nsc),
    "cgd": (init_cgd, step_cgd),
    "dgd": (init_dgd, step_dgd),
    "dng": (init_dng, step_dng),
    "dnc": (init_dnc, step_dnc),
    "extra": (init_extra, step_extra),
}
CENTRALIZED = frozenset({"cngd_sc", "cngd_nsc", "cgd"})
DISTRIBUTED = frozenset(METHODS) - CENTRALIZED


def initialize(method: str, suite, x0=None, **params) -> AlgoState:
    try:
        init, _ = METHODS[method]
    except KeyError:
        raise InvalidParam(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None
    return init(suite, x0, **params)


def step(state: AlgoState, suite, W=None) -> AlgoState:
    _, fn = METHODS[state.method]
    if state.method in DISTRIBUTED:
        if W is None:
            raise InvalidParam(f"{state.method} needs a weight matrix")
        W = np.asarray(W, dtype=float)
        if W.shape != (state.n, state.n):
            raise InvalidParam(f"weight matrix must be {state.n}x{state.n}, got {W.shape}")
    return fn(state, suite, W)
