import io

import numpy as np
import pytest

from accdngd import algorithms as alg
from accdngd.analysis import TraceRecord, check_inexact_gradient, linear_rate, loglog_slope, record
from accdngd.exceptions import InvalidParam, NonPositiveError
from accdngd.schedules import StepSchedule


def synth(ts, errs):
    return [TraceRecord(int(t), float(e), float(e), 0.0, 0.0, 0.0, 0.0, 0.0, int(t)) for t, e in zip(ts, errs)]


def test_loglog_planted():
    t = np.arange(1, 2001)
    assert loglog_slope(synth(t, 1.0 / t**2), 10, 2000) == pytest.approx(-2.0, abs=1e-6)
    assert loglog_slope(synth(t, 5.0 / t**1.4), 10, 2000) == pytest.approx(-1.4, abs=1e-6)
    assert loglog_slope((t, 5.0 / t**1.4), 10, 2000) == pytest.approx(-1.4, abs=1e-6)


def test_loglog_geometric_steepens():
    t = np.arange(1, 3001)
    e = 0.99**t
    slopes = [loglog_slope(synth(t, e), 1, T) for T in (100, 1000, 3000)]
    assert slopes[0] > slopes[1] > slopes[2]


def test_linear_rate_planted():
    t = np.arange(0, 500)
    rate, r2 = linear_rate(synth(t, 0.9**t), 0, 300)
    assert rate == pytest.approx(0.9, abs=1e-9) and r2 == pytest.approx(1.0, abs=1e-12)
    rate, _ = linear_rate(synth(t, 3 * 0.99**t), 0, 499)
    assert rate == pytest.approx(0.99, abs=1e-9)
    _, r2 = linear_rate(synth(t[1:], 1.0 / t[1:]), 1, 499)
    assert r2 < 0.9


def test_fit_errors():
    t = np.arange(1, 10)
    e = np.ones(9)
    e[4] = 0.0
    with pytest.raises(NonPositiveError):
        loglog_slope(synth(t, e), 1, 9)
    with pytest.raises(NonPositiveError):
        linear_rate(synth(t, e), 1, 9)
    with pytest.raises(InvalidParam):
        loglog_slope(synth(t, np.ones(9)), 5, 5)
    with pytest.raises(InvalidParam):
        loglog_slope(synth(t, np.ones(9)), 0, 5)


def test_record_consensus_and_optimum(case1_20):
    s = case1_20
    st = alg.initialize("acc_dngd_sc", s, s.xstar, eta=0.01 / s.L)
    r = record(st, s)
    assert r.consensus_y == 0.0
    # trackers start at the local gradients, which disagree even at the optimum
    local = s.grads(np.tile(s.xstar, (s.n, 1)))
    assert r.consensus_s == pytest.approx(np.linalg.norm(local - local.mean(axis=0)))
    assert abs(r.avg_obj_err) <= 1e-9 and abs(r.max_individual_err) <= 1e-9
    assert r.grad_norm <= 1e-9 and r.comm_count == 0
    assert record(st, s) == r
    assert abs(record(st, s, fstar=s.fstar).avg_obj_err) <= 1e-9


def test_record_full_consensus(case3_20):
    st = alg.initialize("acc_dngd_nsc", case3_20, np.array([0.3, -1.0, 2.0, 0.5]),
                        schedule=StepSchedule.fixed(0.1 / case3_20.L), init_mode="exact")
    r = record(st, case3_20)
    assert r.consensus_y == 0.0 and r.consensus_s == 0.0


def test_record_single_agent(case1_20):
    st = alg.initialize("cgd", case1_20, np.ones(3), eta=0.5 / case1_20.L)
    st = alg.step(st, case1_20)
    r = record(st, case1_20)
    assert r.consensus_y == 0.0 and np.isnan(r.consensus_s) and r.avg_obj_err > 0


def test_record_fields_track_state(case1_20, er20, x0_20):
    st = alg.initialize("acc_dngd_sc", case1_20, x0_20, eta=0.05 / case1_20.L)
    for _ in range(5):
        st = alg.step(st, case1_20, er20.w)
    r = record(st, case1_20)
    assert r.t == 5 and r.comm_count == 5 and r.eta_t == st.eta and r.alpha_t == st.alpha
    ybar = st.y.mean(axis=0)
    assert r.consensus_y == pytest.approx(np.linalg.norm(st.y - ybar))
    assert r.avg_obj_err == pytest.approx(np.mean(case1_20.global_values(st.x) - case1_20.fstar), rel=1e-8)
    assert r.avg_obj_err >= -1e-9


def test_inexact_gradient_consensus_state(case1_20):
    st = alg.initialize("acc_dngd_sc", case1_20, np.array([1.0, 2.0, -1.0]), eta=0.01 / case1_20.L)
    rep = check_inexact_gradient(st, case1_20, 100, rng=0)
    assert rep.violations == 0
    # w = ybar: lower side reads fhat <= f(ybar), tight at consensus
    first = rep.rows[0]
    assert first["dist"] == 0.0 and abs(first["margin"]) <= 1e-9 * max(1, abs(first["value"]))


def test_inexact_gradient_mid_run(case1_20, er20, x0_20, case3_20):
    st = alg.initialize("acc_dngd_sc", case1_20, x0_20, eta=0.05 / case1_20.L)
    for k in range(200):
        st = alg.step(st, case1_20, er20.w)
        if k % 20 == 0:
            rep = check_inexact_gradient(st, case1_20, 100, rng=k)
            assert rep.violations == 0, rep.failures()[:3]
    s3 = case3_20
    st = alg.initialize("acc_dngd_nsc", s3, np.random.default_rng(1).normal(0, 1, (20, 4)),
                        schedule=StepSchedule.vanishing(0.5 / s3.L, 1, 0.61))
    for k in range(100):
        st = alg.step(st, s3, er20.w)
    assert check_inexact_gradient(st, s3, 100, rng=5).violations == 0


def test_report_csv(case1_20):
    st = alg.initialize("acc_dngd_sc", case1_20, np.ones(3), eta=0.01 / case1_20.L)
    rep = check_inexact_gradient(st, case1_20, 5, rng=0)
    buf = io.StringIO()
    rep.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "check,dist,value,bound,margin,ok" and len(lines) == 11
