"""Tuned step sizes for the reference experiments.

Each preset stores tuned values for a reference problem of known ``L``
together with ``scale``: the step expressed in units of ``1/L`` of that
problem (the reference centralized gradient step is exactly ``1/L``, so
``scale = eta / eta_cgd``). Regenerated problems have a different ``L``;
:meth:`Preset.params` rescales by default so the step stays tuned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

from .exceptions import InvalidParam
from .schedules import StepSchedule

__all__ = ["Preset", "PRESETS", "get_preset", "preset_names"]

NSC_BETA = 0.61


@dataclass(frozen=True)
class Preset:
    name: str
    method: str
    variant: str  # fixed | vanishing | harmonic | invsqrt
    value: float  # eta, or the numerator c of a decaying rule
    unit: float  # reference centralized step, i.e. 1/L of the reference problem
    alpha: float | None = None  # as printed; informational
    beta: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return self.value / self.unit

    @property
    def eta(self) -> float:
        return self.value

    def schedule(self, L: float | None = None) -> StepSchedule:
        """Step rule, rescaled to a problem with smoothness ``L`` when given."""
        v = self.value if L is None else self.scale / L
        if self.variant == "fixed":
            return StepSchedule.fixed(v)
        if self.variant == "vanishing":
            return StepSchedule.vanishing(v, 1.0, self.beta)
        if self.variant == "harmonic":
            return StepSchedule.harmonic(v)
        return StepSchedule.invsqrt(v)

    def params(self, L: float | None = None) -> dict:
        """Keyword arguments for ``algorithms.initialize``."""
        s = self.schedule(L)
        m = self.method
        if m in ("acc_dngd_sc", "cngd_sc", "cgd", "extra") or (m == "acc_dgd" and s.variant == "fixed"):
            return {"eta": s.eta}
        if m in ("acc_dngd_nsc", "dgd"):
            return {"schedule": s}
        if m == "cngd_nsc":
            return {"eta": s.eta, **self.extra}
        if m == "dng":
            return {"c": s.c}
        raise InvalidParam(f"preset {self.name} has no parameter mapping for {m}")

    def describe(self) -> str:
        core = {
            "fixed": f"eta={self.value:g}",
            "vanishing": f"eta={self.value:g}/(t+1)^{self.beta:g}",
            "harmonic": f"eta_t={self.value:g}/(t+1)",
            "invsqrt": f"eta_t={self.value:g}/sqrt(t)",
        }[self.variant]
        a = f", alpha={self.alpha:g}" if self.alpha is not None else ""
        return f"{self.name}: {self.method} {core}{a} (eta*L={self.scale:.6g})"


def _build():
    out = {}

    def add(name, method, variant, value, unit, alpha=None, beta=0.0, **extra):
        out[name] = Preset(name, method, variant, value, unit, alpha, beta, extra)

    # least squares, three topologies
    for topo, sc, sc_a, adgd, cn_a in (
        ("random", 0.00017, 0.011821, 0.00030675, 0.035508),
        ("kcycle", 0.00013, 0.010338, 0.00015337, 0.035508),
        ("grid", 0.00006, 0.0071159, 0.00010736, 0.035977),
    ):
        u = 0.0015337
        p = f"fig1_{topo}_"
        add(p + "acc_dngd_sc", "acc_dngd_sc", "fixed", sc, u, sc_a)
        add(p + "dng", "dng", "harmonic", 0.00076687, u)
        add(p + "dgd", "dgd", "invsqrt", 0.0015337, u)
        add(p + "extra", "extra", "fixed", 0.00092025, u)
        add(p + "acc_dgd", "acc_dgd", "fixed", adgd, u)
        add(p + "cgd", "cgd", "fixed", u, u)
        add(p + "cngd_sc", "cngd_sc", "fixed", u, u, cn_a)

    # logistic regression
    for topo, u, sc, sc_a, dng, extra, adgd, cn_a in (
        ("random", 0.32667, 0.03, 0.016707, 0.16334, 0.16334, 0.081669, 0.055131),
        ("kcycle", 0.32667, 0.015, 0.011814, 0.16334, 0.081669, 0.032667, 0.055131),
        ("grid", 0.42319, 0.015, 0.014345, 0.2116, 0.2116, 0.063479, 0.076193),
    ):
        p = f"fig2_{topo}_"
        add(p + "acc_dngd_sc", "acc_dngd_sc", "fixed", sc, u, sc_a)
        add(p + "dng", "dng", "harmonic", dng, u)
        add(p + "dgd", "dgd", "invsqrt", u, u)
        add(p + "extra", "extra", "fixed", extra, u)
        add(p + "acc_dgd", "acc_dgd", "fixed", adgd, u)
        add(p + "cgd", "cgd", "fixed", u, u)
        add(p + "cngd_sc", "cngd_sc", "fixed", u, u, cn_a)

    # piecewise objective, convex but not strongly convex
    for topo, u, van, fix, fix_a in (
        ("random", 0.0055283, 0.0027642, 0.0027642, 0.70711),
        ("kcycle", 0.0055283, 0.0027642, 0.0022113, 0.63246),
        ("grid", 0.0049856, 0.0024928, 0.0014957, 0.54772),
    ):
        p = f"fig3_{topo}_"
        add(p + "acc_dngd_nsc_vanishing", "acc_dngd_nsc", "vanishing", van, u, 0.70711, NSC_BETA)
        add(p + "acc_dngd_nsc_fixed", "acc_dngd_nsc", "fixed", fix, u, fix_a)
        add(p + "dng", "dng", "harmonic", van, u)
        add(p + "dgd", "dgd", "invsqrt", u, u)
        add(p + "extra", "extra", "fixed", u, u)
        add(p + "acc_dgd", "acc_dgd", "fixed", fix, u)
        add(p + "cgd", "cgd", "fixed", u, u)
        add(p + "cngd_nsc", "cngd_nsc", "fixed", u, u, 0.5, alpha0=0.5)

    # individual-error and time-varying runs
    add("fig4_case1_acc_dngd_sc", "acc_dngd_sc", "fixed", 0.00017, 0.0015337, 0.011821)
    add("fig4_case3_acc_dngd_nsc_fixed", "acc_dngd_nsc", "fixed", 0.0027642, 0.0055283, 0.70711)
    add("fig5_case1_acc_dngd_sc", "acc_dngd_sc", "fixed", 0.000011717, 0.0015337, 0.0031445)
    add("fig5_case3_acc_dngd_nsc_fixed", "acc_dngd_nsc", "fixed", 0.0014957, 0.0049856, 0.54772)
    return MappingProxyType(out)


PRESETS = _build()


def preset_names() -> list[str]:
    return list(PRESETS)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidParam(f"unknown preset {name!r}") from None
