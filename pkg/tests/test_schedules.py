import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from accdngd.exceptions import InvalidParam
from accdngd.schedules import (
    StepSchedule,
    fixed_nsc_step_bound,
    next_alpha,
    sc_step_bound,
    schedule_eta,
    vanishing_step_conditions,
)


def test_schedule_values():
    assert schedule_eta(StepSchedule.vanishing(0.5, 1, 0.61), 0) == 0.5
    assert schedule_eta(StepSchedule.fixed(0.003), 12345) == 0.003
    assert schedule_eta(StepSchedule.harmonic(0.1), 9) == pytest.approx(0.01, rel=1e-15)
    assert schedule_eta(StepSchedule.invsqrt(2.0), 4) == 1.0
    with pytest.raises(InvalidParam):
        schedule_eta(StepSchedule.invsqrt(2.0), 0)


@pytest.mark.parametrize("kw", [dict(eta=-1.0), dict(eta=1.0, beta=2.0), dict(eta=1.0, beta=0.5, t0=0.5)])
def test_schedule_validation(kw):
    with pytest.raises(InvalidParam):
        StepSchedule("vanishing", **kw)
    with pytest.raises(InvalidParam):
        StepSchedule("bogus", eta=1.0)


def test_vanishing_non_increasing():
    s = StepSchedule.vanishing(0.3, 2, 1.3)
    vals = [s(t) for t in range(200)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_next_alpha_constant_step():
    # a^2 = (1 - a) / 4  =>  a = (-1 + sqrt(17)) / 8 = 2 / (1 + sqrt(17))
    assert next_alpha(0.5, 1.0, 1.0) == pytest.approx((math.sqrt(17) - 1) / 8, abs=1e-15)
    assert next_alpha(0.5, 1.0, 1.0) == pytest.approx(0.390388, abs=1e-6)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-8, 1.0), st.floats(0.01, 1.0))
def test_next_alpha_residual_and_monotone(a, eta, ratio):
    eta_next = eta * ratio
    b = next_alpha(a, eta, eta_next)
    assert 0 < b < a
    assert abs(b * b - (eta_next / eta) * (1 - b) * a * a) <= 1e-12


def test_next_alpha_rejects():
    with pytest.raises(InvalidParam):
        next_alpha(1.0, 1.0, 1.0)
    with pytest.raises(InvalidParam):
        next_alpha(0.5, 1.0, 2.0)


def test_sc_step_bound():
    assert sc_step_bound(0.5, 1.0, 1.0) == pytest.approx(0.5**3 * 0.5**3 / 62500, rel=1e-15)
    assert sc_step_bound(0.5, 1.0, 1.0) == pytest.approx(2.5e-7, rel=1e-12)
    vals = [sc_step_bound(0.5, 1.0, mu) for mu in (1e-12, 1e-6, 1e-3, 0.5, 1.0)]
    assert vals[0] < 1e-11 and vals == sorted(vals)
    with pytest.raises(InvalidParam):
        sc_step_bound(1.0, 1.0, 0.5)


def test_fixed_nsc_step_bound():
    assert fixed_nsc_step_bound(0.5, 1.0, 1.0) == pytest.approx(min(0.25 / 729, 0.125 / 6912**1.5), rel=1e-15)
    assert fixed_nsc_step_bound(0.5, 3.0, 3.0) == pytest.approx(0.125 / (3.0 * 6912**1.5), rel=1e-12)
    vals = [fixed_nsc_step_bound(0.5, 1.0, mu) for mu in (1e-4, 1e-2, 1.0)]
    assert vals == sorted(vals)


def test_vanishing_conditions():
    sigma, L = 0.9, 2.0
    eta_ii = min(sigma**2 / (729 * L), (1 - sigma) ** 3 / (6144 * L))
    ok, d = vanishing_step_conditions(sigma, L, 0.61, 1.0, 0.99 * eta_ii, 1.0, 1.0)
    assert d["ii"][0] and d["ii"][1] == pytest.approx(eta_ii, rel=1e-15)
    q = min(((sigma + 3) / (sigma + 2) * 0.75) ** (sigma / (28 * 0.61)), (16 / (15 + sigma)) ** (1 / 0.61))
    assert d["i"][1] == pytest.approx(1 / (q - 1), rel=1e-12)
    assert d["i"][0] is (1.0 > 1 / (q - 1))
    # direct evaluation of the third threshold for comparison
    D = 1 / ((1 + 3) ** 2 * math.exp(16 + 6 / (2 - 0.61)))
    direct = (D * 0.01 * 0.1**2 / (9216 * 2 ** (2 - 0.61) * L ** (2 / 3) * 5)) ** 1.5
    assert d["iii"][1] == pytest.approx(direct, rel=1e-10)
    assert not ok
    with pytest.raises(InvalidParam):
        vanishing_step_conditions(sigma, L, 0.6, 1.0, 1e-9, 1.0, 1.0)


def test_scaled_schedule():
    s = StepSchedule.vanishing(0.5, 1, 0.61).scaled(0.5)
    assert s(0) == 0.25 and s.beta == 0.61
