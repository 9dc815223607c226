"""Run a configured experiment and write its traces."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import algorithms as alg
from . import graphs, objectives
from .analysis import TRACE_FIELDS, TraceRecord, linear_rate, loglog_slope, record
from .config import AlgorithmSpec, ExperimentConfig, emit_config
from .exceptions import AccDNGDError, InvalidParam, NonFinite, NonPositiveError
from .presets import get_preset
from .schedules import StepSchedule, fixed_nsc_step_bound, sc_step_bound

__all__ = ["Problem", "AlgoResult", "ExperimentResult", "build_problem", "resolve_params", "run", "emit_csv",
           "settle_time", "tune_fixed_step",
           "OUTPUT_ENV"]

log = logging.getLogger(__name__)

OUTPUT_ENV = "ACCDNGD_OUTPUT_DIR"
SUMMARY_FIELDS = ("label", "method", "step", "status", "diverged_at", "final_t", "final_avg_obj_err",
                  "final_max_individual_err", "final_consensus_y", "loglog_slope", "linear_rate", "linear_r2")


@dataclass
class Problem:
    suite: objectives.ObjectiveSuite
    graph: graphs.Graph
    weights: graphs.WeightMatrix | None
    x0: np.ndarray
    tv_seed: int | None
    remove_fraction: float | None

    @property
    def sigma(self) -> float:
        return self.weights.sigma if self.weights is not None else float("nan")

    def mixing(self, t: int) -> np.ndarray:
        """Weight matrix used for the step from ``t`` to ``t + 1``."""
        if self.remove_fraction is None:
            return self.weights.w
        # every algorithm sees the same graph at a given t: the stream is keyed by (seed, t)
        rng = np.random.default_rng([self.tv_seed, t])
        g = graphs.sample_time_varying(self.graph, self.remove_fraction, rng)
        return graphs.metropolis_weights(g).w


@dataclass
class AlgoResult:
    label: str
    method: str
    step: str
    trace: list
    status: str = "ok"
    diverged_at: int | None = None
    wall_time: float = 0.0
    summary: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    sigma: float
    L: float
    mu: float
    fstar: float
    n: int
    dim: int
    algorithms: list

    @property
    def diverged(self) -> bool:
        return any(a.status != "ok" for a in self.algorithms)

    def by_label(self, label: str) -> AlgoResult:
        for a in self.algorithms:
            if a.label == label:
                return a
        raise KeyError(label)


def _streams(seed: int):
    # fixed four-way split so the algorithm list never perturbs the instance
    graph_ss, data_ss, init_ss, tv_ss = np.random.SeedSequence(seed).spawn(4)
    return graph_ss, data_ss, init_ss, tv_ss


def build_problem(cfg: ExperimentConfig) -> Problem:
    graph_ss, data_ss, init_ss, tv_ss = _streams(cfg.seed)
    g = graphs.parse_graph_spec(cfg.graph, np.random.default_rng(graph_ss))
    if cfg.time_varying:
        w = graphs.metropolis_weights(g)
    elif cfg.weights == "laplacian":
        w = graphs.laplacian_weights(g)
    else:
        w = graphs.metropolis_weights(g)
    data_rng = np.random.default_rng(cfg.objective_seed if cfg.objective_seed is not None else data_ss)
    kw = {}
    if cfg.dim is not None:
        kw["dim"] = cfg.dim
    if cfg.samples_per_agent is not None:
        if cfg.case == "case3":
            raise InvalidParam("samples_per_agent does not apply to case3")
        kw["samples_per_agent"] = cfg.samples_per_agent
    gen = {"case1": objectives.gen_case1, "case2": objectives.gen_case2, "case3": objectives.gen_case3}[cfg.case]
    suite = gen(g.n, rng=data_rng, **kw)
    x0 = np.random.default_rng(init_ss).normal(0.0, cfg.init_sd, size=(g.n, suite.dim))
    tv_seed = int(tv_ss.generate_state(1)[0])
    return Problem(suite, g, w, x0, tv_seed, cfg.remove_fraction)


def resolve_params(spec: AlgorithmSpec, suite, sigma: float, preset_steps: str = "relative") -> dict:
    """Turn a step specification into keyword arguments for ``algorithms.initialize``."""
    m = spec.method
    if spec.preset is not None:
        p = get_preset(spec.preset)
        params = p.params(suite.L if preset_steps == "relative" else None)
    else:
        if spec.bound_fraction is not None:
            if m == "acc_dngd_sc":
                value = spec.bound_fraction * sc_step_bound(sigma, suite.L, suite.mu)
            elif not suite.mu > 0:
                raise InvalidParam("the fixed-step limit for the convex method needs mu > 0")
            else:
                value = spec.bound_fraction * fixed_nsc_step_bound(sigma, suite.L, suite.mu)
        elif spec.eta is not None or spec.c is not None:
            value = spec.eta if spec.eta is not None else spec.c
        else:
            rel = spec.eta_times_L if spec.eta_times_L is not None else spec.c_times_L
            value = rel / suite.L
        params = _explicit_params(spec, value)
    if spec.alpha0 is not None:
        if m != "cngd_nsc":
            raise InvalidParam("alpha0 only applies to cngd_nsc")
        params["alpha0"] = spec.alpha0
    if spec.init_mode is not None:
        if m != "acc_dngd_nsc":
            raise InvalidParam("init_mode only applies to acc_dngd_nsc")
        params["init_mode"] = spec.init_mode
    return params


def _explicit_params(spec: AlgorithmSpec, value: float) -> dict:
    m = spec.method
    default = {"dgd": "invsqrt", "dng": "harmonic"}.get(m, "vanishing" if spec.beta is not None else "fixed")
    variant = spec.schedule or default
    t0 = spec.t0 if spec.t0 is not None else 1.0
    if variant == "fixed":
        sched = StepSchedule.fixed(value)
    elif variant == "vanishing":
        sched = StepSchedule.vanishing(value, t0, spec.beta if spec.beta is not None else 0.61)
    elif variant == "harmonic":
        sched = StepSchedule.harmonic(value)
    else:
        sched = StepSchedule.invsqrt(value)

    if m in ("acc_dngd_sc", "cngd_sc", "cgd", "extra", "dnc", "cngd_nsc"):
        if variant != "fixed":
            raise InvalidParam(f"{m} takes a fixed step")
        return {"eta": value}
    if m in ("acc_dngd_nsc", "acc_dgd", "dgd"):
        return {"schedule": sched}
    if m == "dng":
        if variant != "harmonic":
            raise InvalidParam("dng uses the c/(t+1) rule")
        return {"c": value}
    raise InvalidParam(f"no step mapping for {m}")


def _describe(params: dict) -> str:
    if "schedule" in params:
        return params["schedule"].describe()
    if "eta" in params:
        return f"{params['eta']:.6g}"
    return f"{params['c']:.6g}/(t+1)"


def _run_one(spec, problem, cfg) -> AlgoResult:
    suite = problem.suite
    T, every = cfg.iterations, cfg.record_every
    start = time.perf_counter()
    try:
        params = resolve_params(spec, suite, problem.sigma, cfg.preset_steps)
        res = AlgoResult(spec.label, spec.method, _describe(params), [])
        state = alg.initialize(spec.method, suite, problem.x0, **params)
    except AccDNGDError as exc:
        log.warning("%s: could not start: %s", spec.label, exc)
        return AlgoResult(spec.label, spec.method, "", [], status=f"error: {type(exc).__name__}")
    trace = res.trace
    trace.append(record(state, suite))
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            for t in range(T):
                state = alg.step(state, suite, problem.mixing(t) if spec.method in alg.DISTRIBUTED else None)
                if state.t % every == 0 or state.t == T:
                    r = record(state, suite)
                    if not all(math.isfinite(v) for v in (r.avg_obj_err, r.max_individual_err)):
                        raise NonFinite("non-finite error metric")
                    trace.append(r)
        except NonFinite:
            res.status, res.diverged_at = "diverged", t + 1
            log.warning("%s diverged at t=%d", spec.label, res.diverged_at)
    res.wall_time = time.perf_counter() - start
    res.summary = summarize(res, cfg.effective_burn_in(), T)
    return res


def summarize(res: AlgoResult, burn_in: int, horizon: int) -> dict:
    """Final errors and fitted rates; recomputable from ``res.trace`` alone."""
    last = res.trace[-1] if res.trace else None
    out = {
        "label": res.label,
        "method": res.method,
        "step": res.step,
        "status": res.status,
        "diverged_at": "" if res.diverged_at is None else res.diverged_at,
        "final_t": last.t if last else "",
        "final_avg_obj_err": last.avg_obj_err if last else float("nan"),
        "final_max_individual_err": last.max_individual_err if last else float("nan"),
        "final_consensus_y": last.consensus_y if last else float("nan"),
        "loglog_slope": float("nan"),
        "linear_rate": float("nan"),
        "linear_r2": float("nan"),
    }
    lo = max(burn_in, 1)
    if res.status == "ok" and last is not None and last.t > lo:
        try:
            out["loglog_slope"] = loglog_slope(res.trace, lo, horizon)
            out["linear_rate"], out["linear_r2"] = linear_rate(res.trace, lo, horizon)
        except (NonPositiveError, InvalidParam):
            pass
    return out


def run(cfg: ExperimentConfig) -> ExperimentResult:
    """Build the problem once and run every configured algorithm from the shared start."""
    problem = build_problem(cfg)
    s = problem.suite
    results = [_run_one(spec, problem, cfg) for spec in cfg.algorithms]
    return ExperimentResult(cfg, problem.sigma, s.L, s.mu, s.fstar, s.n, s.dim, results)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    d = override or os.environ.get(OUTPUT_ENV) or cfg.output
    if not d:
        raise InvalidParam("no output directory: pass one, set experiment.output, or set " + OUTPUT_ENV)
    return Path(d)


def emit_csv(result: ExperimentResult, path) -> Path:
    """Write ``<label>.csv`` per algorithm, ``summary.csv`` and ``meta.ini`` under ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for a in result.algorithms:
        with open(out / f"{a.label}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_FIELDS)
            for r in a.trace:
                w.writerow([_fmt(v) for v in r.as_tuple()])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for a in result.algorithms:
            w.writerow([_fmt(a.summary.get(k, "")) for k in SUMMARY_FIELDS])
    const = [
        "[constants]",
        f"version = {__version__}",
        f"n = {result.n}",
        f"dim = {result.dim}",
        f"sigma = {_fmt(result.sigma)}",
        f"L = {_fmt(result.L)}",
        f"mu = {_fmt(result.mu)}",
        f"fstar = {_fmt(result.fstar)}",
        "",
    ]
    (out / "meta.ini").write_text(emit_config(result.config) + "\n" + "\n".join(const), encoding="utf-8")
    return out


def read_trace(path) -> list:
    """Load a per-algorithm CSV written by :func:`emit_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != TRACE_FIELDS:
        raise InvalidParam(f"unexpected header in {path}")
    conv = [int, float, float, float, float, float, float, float, int]
    return [TraceRecord(*(c(v) for c, v in zip(conv, row))) for row in rows[1:]]


def settle_time(trace, target: float, field: str = "avg_obj_err"):
    """First recorded ``t`` after which ``field`` stays below ``target``; ``None`` if it never does."""
    last_bad = None
    for i, r in enumerate(trace):
        if not getattr(r, field) < target:
            last_bad = i
    if last_bad is None:
        return trace[0].t if trace else None
    return trace[last_bad + 1].t if last_bad + 1 < len(trace) else None


def tune_fixed_step(cfg: ExperimentConfig, method: str, grid, target: float, horizon: int):
    """Pick the ``eta_times_L`` in ``grid`` whose error settles below ``target`` soonest.

    Returns ``(best, table)`` where ``table`` maps each candidate to its settle
    time (``None`` when it diverged or never settled). Ties go to the smaller step.
    """
    table = {}
    for k in sorted(grid):
        spec = AlgorithmSpec(label="tune", method=method, eta_times_L=float(k))
        trial = replace(cfg, algorithms=(spec,), iterations=horizon, record_every=1)
        a = run(trial).algorithms[0]
        table[k] = settle_time(a.trace, target) if a.status == "ok" else None
    ok = {k: t for k, t in table.items() if t is not None}
    if not ok:
        raise InvalidParam(f"no step in {sorted(grid)} settles below {target:g} within {horizon} iterations")
    best = min(ok, key=lambda k: (ok[k], k))
    return best, table
