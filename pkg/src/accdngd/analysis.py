"""Per-iteration metrics, empirical rate fits and the inexact-gradient check."""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable

import numpy as np

from .algorithms import row_mean as _row_mean
from .exceptions import InvalidParam, NonPositiveError

__all__ = [
    "TraceRecord",
    "TRACE_FIELDS",
    "record",
    "loglog_slope",
    "linear_rate",
    "Report",
    "check_inexact_gradient",
    "records_to_arrays",
]


@dataclass(frozen=True)
class TraceRecord:
    t: int
    avg_obj_err: float
    max_individual_err: float
    consensus_y: float
    consensus_s: float
    grad_norm: float
    eta_t: float
    alpha_t: float
    comm_count: int

    def as_tuple(self):
        return astuple(self)


TRACE_FIELDS = tuple(f.name for f in fields(TraceRecord))


def record(state, suite, fstar: float | None = None) -> TraceRecord:
    """Snapshot the convergence and consensus metrics of ``state``.

    Errors are measured against ``fstar`` when given, else against the
    suite's own reference (which uses an exact form where one exists).
    """

    def err(P):
        if fstar is None:
            return suite.excess(P)
        return suite.global_values(P) - fstar

    q = state.query_point
    g = _row_mean(state.grad)
    cons_y = float(np.linalg.norm(q - _row_mean(q)))
    cons_s = float(np.linalg.norm(state.s - g)) if state.s is not None else float("nan")
    return TraceRecord(
        t=int(state.t),
        avg_obj_err=float(err(state.x).mean()),
        max_individual_err=float(err(q).max()),
        consensus_y=cons_y,
        consensus_s=cons_s,
        grad_norm=float(np.linalg.norm(g)),
        eta_t=float(state.eta),
        alpha_t=float(state.alpha),
        comm_count=int(state.comm),
    )


def _window(trace, t_min, t_max, field):
    if not t_max > t_min:
        raise InvalidParam(f"need t_max > t_min, got [{t_min}, {t_max}]")
    if isinstance(trace, tuple) and len(trace) == 2:
        t, e = (np.asarray(a, dtype=float) for a in trace)
    else:
        t = np.array([r.t for r in trace], dtype=float)
        e = np.array([getattr(r, field) for r in trace], dtype=float)
    keep = (t >= t_min) & (t <= t_max)
    t, e = t[keep], e[keep]
    if t.size < 2:
        raise InvalidParam(f"fewer than two records in window [{t_min}, {t_max}]")
    if not np.all(e > 0):
        bad = t[~(e > 0)][0]
        raise NonPositiveError(f"non-positive {field} at t={bad:g}")
    return t, e


def loglog_slope(trace, t_min: int, t_max: int, field: str = "avg_obj_err") -> float:
    """Least-squares slope of ``log(err)`` against ``log(t)`` over ``[t_min, t_max]``.

    ``trace`` is a sequence of :class:`TraceRecord` or a ``(t, err)`` pair of arrays.
    """
    if t_min < 1:
        raise InvalidParam("t_min must be >= 1 for a log-log fit")
    t, e = _window(trace, t_min, t_max, field)
    return float(np.polyfit(np.log(t), np.log(e), 1)[0])


def linear_rate(trace, t_min: int, t_max: int, field: str = "avg_obj_err") -> tuple[float, float]:
    """Fit ``log(err) = a + t log(rate)``; returns ``(rate, r_squared)``."""
    t, e = _window(trace, t_min, t_max, field)
    le = np.log(e)
    slope, icept = np.polyfit(t, le, 1)
    resid = le - (slope * t + icept)
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(math.exp(slope)), r2


@dataclass
class Report:
    """Rows of ``(check, params, value, bound, margin, ok)`` from a numeric certification."""

    name: str
    rows: list

    @property
    def violations(self) -> int:
        return sum(not r["ok"] for r in self.rows)

    @property
    def n_checks(self) -> int:
        return len(self.rows)

    def worst(self):
        return min(self.rows, key=lambda r: r["margin"]) if self.rows else None

    def failures(self):
        return [r for r in self.rows if not r["ok"]]

    def to_csv(self, path_or_file) -> None:
        keys = sorted({k for r in self.rows for k in r} - {"check", "value", "bound", "margin", "ok"})
        header = ["check", *keys, "value", "bound", "margin", "ok"]

        def emit(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.rows:
                w.writerow([_fmt(r.get(k, "")) for k in header])

        if hasattr(path_or_file, "write"):
            emit(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                emit(fh)

    def summary(self) -> str:
        w = self.worst()
        tail = f", worst margin {w['margin']:.3e} ({w['check']})" if w else ""
        return f"{self.name}: {self.n_checks} checks, {self.violations} violations{tail}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def check_inexact_gradient(state, suite, samples: int = 100, rng=None, tol: float = 1e-9, mu=None) -> Report:
    """Sandwich the averaged gradient between the two inexact-oracle bounds.

    With ``ybar`` the mean query point, ``g`` the mean local gradient and
    ``fhat = mean_i [f_i(y_i) + <grad f_i(y_i), ybar - y_i>]``, every sampled
    ``w`` must satisfy

        fhat + <g, w - ybar> + mu/2 |w - ybar|^2
            <= f(w) <=
        fhat + <g, w - ybar> + L |w - ybar|^2 + (L/n) |y - 1 ybar|^2.

    A side counts as violated when it fails by more than ``tol * max(1, |f(w)|)``.
    """
    rng = np.random.default_rng(rng)
    mu = suite.mu if mu is None else mu
    y, G = state.query_point, state.grad
    n = y.shape[0]
    if n != suite.n:
        raise InvalidParam("inexact-gradient check needs a distributed state")
    ybar = y.mean(axis=0)
    g = G.mean(axis=0)
    fhat = float(np.mean(suite.values(y) + np.einsum("ik,ik->i", G, ybar - y)))
    spread = float(np.sum((y - ybar) ** 2))
    radius = 1.0 + float(np.linalg.norm(ybar)) + math.sqrt(spread)
    dirs = rng.normal(size=(samples, suite.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    scales = radius * 10.0 ** rng.uniform(-4, 1, samples)
    W = np.vstack([ybar, ybar + dirs[: samples - 1] * scales[: samples - 1, None]]) if samples > 0 else ybar[None]
    fw = suite.global_values(W)
    rows = []
    for w, f in zip(W, fw):
        d = w - ybar
        lin = fhat + g @ d
        lower = lin + 0.5 * mu * (d @ d)
        upper = lin + suite.L * (d @ d) + suite.L / n * spread
        slack = tol * max(1.0, abs(f))
        rows.append(dict(check="lower", dist=float(np.linalg.norm(d)), value=float(f), bound=float(lower),
                         margin=float(f - lower), ok=bool(f - lower >= -slack)))
        rows.append(dict(check="upper", dist=float(np.linalg.norm(d)), value=float(f), bound=float(upper),
                         margin=float(upper - f), ok=bool(upper - f >= -slack)))
    return Report("inexact_gradient", rows)


def records_to_arrays(trace: Iterable[TraceRecord]) -> dict:
    recs = list(trace)
    return {f: np.array([getattr(r, f) for r in recs]) for f in TRACE_FIELDS}
