"""Step-size schedules, the momentum recursion, and theoretical step-size limits."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import InvalidParam

__all__ = [
    "StepSchedule",
    "schedule_eta",
    "next_alpha",
    "sc_step_bound",
    "vanishing_step_conditions",
    "fixed_nsc_step_bound",
]

VARIANTS = ("fixed", "vanishing", "harmonic", "invsqrt")


@dataclass(frozen=True)
class StepSchedule:
    """A step-size rule ``t -> eta_t``.

    ``fixed``      eta
    ``vanishing``  eta / (t + t0)^beta
    ``harmonic``   c / (t + 1)
    ``invsqrt``    c / sqrt(t), defined for t >= 1
    """

    variant: str
    eta: float = 0.0
    t0: float = 1.0
    beta: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParam(f"unknown schedule variant {self.variant!r}")
        if self.variant in ("fixed", "vanishing") and not self.eta > 0:
            raise InvalidParam(f"eta must be positive, got {self.eta}")
        if self.variant in ("harmonic", "invsqrt") and not self.c > 0:
            raise InvalidParam(f"c must be positive, got {self.c}")
        if self.variant == "vanishing":
            if not 0 < self.beta < 2:
                raise InvalidParam(f"beta must lie in (0, 2), got {self.beta}")
            if self.t0 < 1:
                raise InvalidParam(f"t0 must be >= 1, got {self.t0}")

    @classmethod
    def fixed(cls, eta):
        return cls("fixed", eta=float(eta))

    @classmethod
    def vanishing(cls, eta, t0=1.0, beta=0.61):
        return cls("vanishing", eta=float(eta), t0=float(t0), beta=float(beta))

    @classmethod
    def harmonic(cls, c):
        return cls("harmonic", c=float(c))

    @classmethod
    def invsqrt(cls, c):
        return cls("invsqrt", c=float(c))

    def __call__(self, t: int) -> float:
        return schedule_eta(self, t)

    def scaled(self, factor: float) -> "StepSchedule":
        """Same rule with the leading constant multiplied by ``factor``."""
        return StepSchedule(self.variant, self.eta * factor, self.t0, self.beta, self.c * factor)

    def describe(self) -> str:
        if self.variant == "fixed":
            return f"{self.eta:.6g}"
        if self.variant == "vanishing":
            return f"{self.eta:.6g}/(t+{self.t0:g})^{self.beta:g}"
        if self.variant == "harmonic":
            return f"{self.c:.6g}/(t+1)"
        return f"{self.c:.6g}/sqrt(t)"


def schedule_eta(s: StepSchedule, t: int) -> float:
    if t < 0:
        raise InvalidParam(f"iteration index must be non-negative, got {t}")
    if s.variant == "fixed":
        return s.eta
    if s.variant == "vanishing":
        return s.eta / (t + s.t0) ** s.beta
    if s.variant == "harmonic":
        return s.c / (t + 1)
    if t < 1:
        raise InvalidParam("the 1/sqrt(t) schedule starts at t = 1")
    return s.c / math.sqrt(t)


def next_alpha(alpha_t: float, eta_t: float, eta_next: float) -> float:
    """Root in (0, 1) of ``a^2 = (eta_next / eta_t) (1 - a) alpha_t^2``."""
    if not 0 < alpha_t < 1:
        raise InvalidParam(f"alpha_t must lie in (0, 1), got {alpha_t}")
    if not (eta_t > 0 and eta_next > 0):
        raise InvalidParam("step sizes must be positive")
    if eta_next > eta_t:
        raise InvalidParam(f"step sizes must not increase ({eta_next} > {eta_t})")
    a = 2.0 / (1.0 + math.sqrt(1.0 + 4.0 * eta_t / (eta_next * alpha_t * alpha_t)))
    resid = a * a - (eta_next / eta_t) * (1.0 - a) * alpha_t * alpha_t
    if abs(resid) > 1e-12:
        raise InvalidParam(f"momentum recursion residual {resid:.3e} too large")
    return a


def _check_sigma_l_mu(sigma, L, mu):
    if not 0 < sigma < 1:
        raise InvalidParam(f"sigma must lie in (0, 1), got {sigma}")
    if not 0 < mu <= L:
        raise InvalidParam(f"need 0 < mu <= L, got mu={mu}, L={L}")


def sc_step_bound(sigma: float, L: float, mu: float) -> float:
    """Largest step for which the strongly convex method provably converges linearly."""
    _check_sigma_l_mu(sigma, L, mu)
    return sigma**3 * (1 - sigma) ** 3 / (250.0**2 * L) * (mu / L) ** (3.0 / 7.0)


def fixed_nsc_step_bound(sigma: float, L: float, mu: float) -> float:
    """Step limit for the fixed-step convex method on locally strongly convex problems."""
    _check_sigma_l_mu(sigma, L, mu)
    return min(sigma**2 / (9**3 * L), mu**1.5 * (1 - sigma) ** 3 / (L**2.5 * 6912**1.5))


def vanishing_step_conditions(sigma, L, beta, t0, eta, R, v0_dist) -> tuple[bool, dict]:
    """Evaluate the three sufficient conditions for the vanishing-step guarantee.

    Returns ``(all_ok, details)`` where ``details`` maps ``"i"``, ``"ii"``,
    ``"iii"`` to ``(ok, threshold)``. Thresholds are lower bounds on ``t0``
    for ``"i"`` and upper bounds on ``eta`` for the others.
    """
    if not 0.6 < beta < 2:
        raise InvalidParam(f"beta must lie in (0.6, 2), got {beta}")
    if not 0 < sigma < 1 or L <= 0 or eta <= 0 or t0 < 1 or R < 0 or v0_dist <= 0:
        raise InvalidParam("need 0 < sigma < 1, L > 0, eta > 0, t0 >= 1, R >= 0, v0_dist > 0")
    q = min(((sigma + 3) / (sigma + 2) * 0.75) ** (sigma / (28 * beta)), (16 / (15 + sigma)) ** (1 / beta))
    t0_min = 1.0 / (q - 1.0) if q > 1 else math.inf
    eta_ii = min(sigma**2 / (9**3 * L), (1 - sigma) ** 3 / (6144 * L))
    # D(beta, t0) underflows quickly; stay in log space until the final power
    log_d = -2 * math.log(t0 + 3) - (16 + 6 / (2 - beta))
    log_inner = (
        log_d
        + math.log(beta - 0.6)
        + 2 * math.log(1 - sigma)
        - math.log(9216)
        - (2 - beta) * math.log(t0 + 1)
        - (2 / 3) * math.log(L)
        - math.log(4 + R**2 / v0_dist**2)
    )
    eta_iii = math.exp(1.5 * log_inner)
    details = {"i": (t0 > t0_min, t0_min), "ii": (eta < eta_ii, eta_ii), "iii": (eta < eta_iii, eta_iii)}
    return all(ok for ok, _ in details.values()), details
