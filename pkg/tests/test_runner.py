import filecmp
import math

import numpy as np
import pytest

from accdngd import algorithms as alg
from accdngd.analysis import TRACE_FIELDS, loglog_slope, record
from accdngd.config import AlgorithmSpec, parse_config
from accdngd.exceptions import InvalidParam
from accdngd.graphs import second_singular
from accdngd.runner import OUTPUT_ENV, build_problem, emit_csv, output_dir, read_trace, resolve_params, run, summarize
from accdngd.schedules import sc_step_bound

BASE = """\
[experiment]
iterations = {T}
record_every = {every}
seed = 5

[graph]
spec = er:12,0.4

[objective]
case = case1
"""


def same(a, b):
    # NaN marks fields a method does not have, so compare NaN-aware
    return len(a) == len(b) and np.array_equal(np.array([r.as_tuple() for r in a], dtype=float),
                                                np.array([r.as_tuple() for r in b], dtype=float), equal_nan=True)


def cfg(algos, T=100, every=10, extra=""):
    return parse_config(BASE.format(T=T, every=every) + extra + algos)


ACC = "[algorithm:acc]\nmethod = acc_dngd_sc\neta_times_L = 0.1\n"
EXTRA = "[algorithm:extra]\nmethod = extra\neta_times_L = 0.3\n"
BOOM = "[algorithm:boom]\nmethod = acc_dngd_sc\neta_times_L = 0.95\n"


def test_record_every_rows():
    r = run(cfg(ACC))
    tr = r.algorithms[0].trace
    assert [x.t for x in tr] == list(range(0, 101, 10))
    r = run(cfg(ACC, T=25, every=10))
    assert [x.t for x in r.algorithms[0].trace] == [0, 10, 20, 25]


def test_trace_matches_manual_loop():
    c = cfg(ACC, T=30, every=1)
    prob = build_problem(c)
    r = run(c)
    st = alg.initialize("acc_dngd_sc", prob.suite, prob.x0, eta=0.1 / prob.suite.L)
    manual = [record(st, prob.suite)]
    for _ in range(30):
        st = alg.step(st, prob.suite, prob.weights.w)
        manual.append(record(st, prob.suite))
    assert r.algorithms[0].trace == manual


def test_shared_instance_and_start():
    c = cfg(ACC + EXTRA)
    p1, p2 = build_problem(c), build_problem(cfg(EXTRA))
    assert np.array_equal(p1.x0, p2.x0) and np.array_equal(p1.weights.w, p2.weights.w)
    assert p1.suite.fstar == p2.suite.fstar
    assert np.std(p1.x0) == pytest.approx(5.0, rel=0.3)
    assert not np.array_equal(build_problem(c.with_seed(6)).x0, p1.x0)


def test_divergence_isolated(tmp_path):
    with_boom = run(cfg(ACC + BOOM + EXTRA, T=600, every=20))
    without = run(cfg(ACC + EXTRA, T=600, every=20))
    boom = with_boom.by_label("boom")
    assert boom.status == "diverged" and boom.diverged_at is not None and with_boom.diverged
    assert with_boom.by_label("acc").trace == without.by_label("acc").trace
    assert same(with_boom.by_label("extra").trace, without.by_label("extra").trace)
    assert math.isnan(boom.summary["loglog_slope"])
    emit_csv(with_boom, tmp_path)
    rows = (tmp_path / "summary.csv").read_text().splitlines()
    assert rows[2].startswith("boom,acc_dngd_sc,") and ",diverged," in rows[2]


def test_start_failure_gives_header_only(tmp_path):
    r = run(cfg("[algorithm:bad]\nmethod = acc_dngd_nsc\neta_times_L = 2.0\n" + ACC))
    bad = r.by_label("bad")
    assert bad.status.startswith("error") and bad.trace == []
    emit_csv(r, tmp_path)
    assert (tmp_path / "bad.csv").read_text() == ",".join(TRACE_FIELDS) + "\n"


def test_emit_deterministic_and_readable(tmp_path):
    c = cfg(ACC + EXTRA, T=200, every=20)
    emit_csv(run(c), tmp_path / "a")
    emit_csv(run(c), tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not (cmp.left_only or cmp.right_only)
    for name in ("acc.csv", "extra.csv", "meta.ini", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    res = run(c)
    assert read_trace(tmp_path / "a" / "acc.csv") == res.by_label("acc").trace
    meta = (tmp_path / "a" / "meta.ini").read_text()
    assert parse_config(meta) == c
    assert f"L = {res.L!r}" in meta and "sigma = " in meta and "fstar = " in meta


def test_summary_recomputable():
    res = run(cfg(ACC + EXTRA, T=400, every=10))
    for a in res.algorithms:
        assert summarize(a, 100, 400) == a.summary
        assert a.summary["final_avg_obj_err"] == a.trace[-1].avg_obj_err
    ex = res.by_label("extra")
    assert ex.summary["loglog_slope"] == loglog_slope(ex.trace, 100, 400)


def test_time_varying_shared_graph_sequence():
    c = cfg(ACC, T=50, every=5, extra="[time_varying]\nremove_fraction = 0.75\n")
    p = build_problem(c)
    W3 = p.mixing(3)
    assert np.array_equal(W3, p.mixing(3)) and not np.array_equal(W3, p.mixing(4))
    assert np.abs(W3.sum(axis=0) - 1).max() <= 1e-12 and np.abs(W3 - W3.T).max() == 0
    kept = int(np.count_nonzero(np.triu(W3, 1)))
    assert kept == math.floor(0.25 * p.graph.n_edges + 0.5)
    assert np.array_equal(build_problem(c).mixing(7), p.mixing(7))
    r1, r2 = run(c), run(c)
    assert r1.algorithms[0].trace == r2.algorithms[0].trace


def test_resolve_params_sources(case1_20):
    s = case1_20
    sig = 0.8
    assert resolve_params(AlgorithmSpec("a", "acc_dngd_sc", eta=1e-4), s, sig) == {"eta": 1e-4}
    assert resolve_params(AlgorithmSpec("a", "acc_dngd_sc", eta_times_L=0.2), s, sig)["eta"] == 0.2 / s.L
    b = resolve_params(AlgorithmSpec("a", "acc_dngd_sc", bound_fraction=0.5), s, sig)["eta"]
    assert b == 0.5 * sc_step_bound(sig, s.L, s.mu)
    p = resolve_params(AlgorithmSpec("a", "acc_dngd_nsc", eta_times_L=0.5, beta=0.61), s, sig)
    assert p["schedule"].variant == "vanishing" and p["schedule"].beta == 0.61
    p = resolve_params(AlgorithmSpec("a", "dgd", c_times_L=1.0), s, sig)
    assert p["schedule"].variant == "invsqrt"
    assert resolve_params(AlgorithmSpec("a", "dng", c=0.1), s, sig) == {"c": 0.1}
    p = resolve_params(AlgorithmSpec("a", "fig", preset="fig1_random_acc_dngd_sc"), s, sig, "absolute")
    assert p == {"eta": 0.00017}
    with pytest.raises(InvalidParam):
        resolve_params(AlgorithmSpec("a", "extra", eta=0.1, schedule="vanishing"), s, sig)
    with pytest.raises(InvalidParam):
        resolve_params(AlgorithmSpec("a", "extra", eta=0.1, alpha0=0.3), s, sig)


def test_output_dir_precedence(monkeypatch, tmp_path):
    c = cfg(ACC)
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    with pytest.raises(InvalidParam):
        output_dir(c)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert output_dir(c) == tmp_path / "env"
    assert output_dir(c, tmp_path / "cli") == tmp_path / "cli"


def test_metropolis_static_weights():
    c = parse_config(BASE.format(T=5, every=1).replace("er:12,0.4", "grid2d:3x3\nweights = metropolis") + ACC)
    p = build_problem(c)
    assert p.sigma == second_singular(p.weights.w)
