"""Synthetic local cost functions for distributed optimization experiments.

Three families are provided:

* least squares (``case1``): ``f_i(x) = mean_m (<u_im, x> - v_im)^2``
* logistic regression (``case2``): ``f_i(x) = mean_m [softplus(<u_im, x>) - v_im <u_im, x>]``
* a flat-bottomed convex function (``case3``): ``f_i(x) = phi(<a_i, x>) + <b_i, x>``
  where ``phi(y) = y^m / m`` for ``|y| <= 1`` and ``|y| - (m - 1)/m`` outside.

Every suite evaluates all agents at once: row ``i`` of the input matrix is the
point at which agent ``i`` evaluates its own function. Samples are stored in
padded ``(n, M_max, N)`` arrays with per-sample weights ``1/M_i`` so agents may
hold different numbers of samples.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.special import expit

from .exceptions import DegenerateLabels, InvalidParam, NoConvergence, NonFinite, SingularSystem

__all__ = [
    "ObjectiveSuite",
    "QuadraticSuite",
    "LogisticSuite",
    "PiecewiseSuite",
    "gen_case1",
    "gen_case2",
    "gen_case3",
    "solve_reference",
    "softplus",
    "save_suite",
    "load_suite",
]

FORMAT_VERSION = 1
# (gradient norm, iteration cap) at which a logistic reference solve switches to Newton
NEWTON_HANDOFF = (1e-6, 20_000)


def softplus(z):
    """``log(1 + exp(z))`` without overflow."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"non-finite {what}")
    return arr


def _pad(rows, width=None):
    """Stack ragged per-agent sample arrays into a padded block plus weights."""
    rows = [np.atleast_1d(np.asarray(r, dtype=float)) for r in rows]
    if not rows or any(r.shape[0] == 0 for r in rows):
        raise InvalidParam("every agent needs at least one sample")
    m_max = max(r.shape[0] for r in rows)
    tail = rows[0].shape[1:]
    out = np.zeros((len(rows), m_max) + tail)
    wts = np.zeros((len(rows), m_max))
    for i, r in enumerate(rows):
        if r.shape[1:] != tail:
            raise InvalidParam("inconsistent feature dimension across agents")
        out[i, : r.shape[0]] = r
        wts[i, : r.shape[0]] = 1.0 / r.shape[0]
    return out, wts


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class ObjectiveSuite:
    """Base class: ``n`` local functions on ``R^dim`` with shared constants.

    Subclasses implement ``values`` and ``grads``. ``L``, ``mu``, ``xstar`` and
    ``fstar`` are filled in by the generators (or by :func:`solve_reference`).
    """

    kind = "base"

    def __init__(self, n, dim):
        self.n = int(n)
        self.dim = int(dim)
        self.L = float("nan")
        self.mu = 0.0
        self.xstar = np.zeros(self.dim)
        self.fstar = float("nan")

    # -- per-agent evaluation ------------------------------------------------
    def values(self, X) -> np.ndarray:
        raise NotImplementedError

    def grads(self, X) -> np.ndarray:
        raise NotImplementedError

    def _check_block(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.dim):
            raise InvalidParam(f"expected a ({self.n}, {self.dim}) block, got {X.shape}")
        return _finite(X, "input point")

    def _agent_slice(self, i):
        raise NotImplementedError

    def local_value(self, i, x) -> float:
        return float(self._agent_slice(i).values(np.asarray(x, dtype=float)[None, :])[0])

    def local_grad(self, i, x) -> np.ndarray:
        return self._agent_slice(i).grads(np.asarray(x, dtype=float)[None, :])[0]

    # -- global evaluation ---------------------------------------------------
    def global_value(self, x) -> float:
        return float(self.global_values(np.atleast_2d(x))[0])

    def global_grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.grads(np.broadcast_to(x, (self.n, self.dim))).mean(axis=0)

    def global_values(self, P) -> np.ndarray:
        """Global objective at each row of ``P``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return np.array([self.values(np.broadcast_to(p, (self.n, self.dim))).mean() for p in P])

    def excess(self, P) -> np.ndarray:
        """``f(p) - f*`` for each row of ``P``."""
        return self.global_values(P) - self.fstar

    def global_hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad_terms(self, x) -> tuple[np.ndarray, int]:
        """Sum of absolute summands of the global gradient at ``x`` and their count.

        Used to bound the rounding error of a gradient evaluation.
        """
        raise NotImplementedError

    def grad_floor(self, x) -> float:
        """Gradient norm attainable in double precision at ``x``."""
        mag, count = self.grad_terms(x)
        return float(4.0 * np.sqrt(count) * np.finfo(float).eps * np.linalg.norm(mag))

    @property
    def strongly_convex(self) -> bool:
        return self.mu > 0

    def _arrays(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, dim={self.dim}, L={self.L:.6g}, mu={self.mu:.6g})"


class QuadraticSuite(ObjectiveSuite):
    """Least-squares local costs."""

    kind = "case1"

    def __init__(self, features, targets):
        U, wts = _pad(features)
        V, _ = _pad(targets)
        super().__init__(U.shape[0], U.shape[2])
        self.U, self.V, self.wts = _ro(U), _ro(V), _ro(wts)
        # f(x) - f* = (x - x*)^T A (x - x*) with A the averaged second moment
        self.A = _ro(np.einsum("im,imk,iml->kl", wts, U, U) / self.n)
        self.c = _ro(np.einsum("im,imk,im->k", wts, U, V) / self.n)
        hess = 2.0 * np.einsum("im,imk,iml->ikl", wts, U, U)
        eig = np.linalg.eigvalsh(hess)
        self.L = float(eig[:, -1].max())
        self.mu = float(max(eig[:, 0].min(), 0.0))

    def _agent_slice(self, i):
        m = self.wts[i] > 0
        return QuadraticSuite([self.U[i][m]], [self.V[i][m]])

    def values(self, X):
        X = self._check_block(X)
        r = np.einsum("imk,ik->im", self.U, X) - self.V
        return _finite(np.einsum("im,im->i", self.wts, r * r), "objective value")

    def grads(self, X):
        X = self._check_block(X)
        r = np.einsum("imk,ik->im", self.U, X) - self.V
        return _finite(2.0 * np.einsum("im,imk->ik", self.wts * r, self.U), "gradient")

    def global_values(self, P):
        P = _finite(np.atleast_2d(np.asarray(P, dtype=float)), "input point")
        r = np.einsum("imk,pk->pim", self.U, P) - self.V[None]
        return _finite(np.einsum("im,pim->p", self.wts, r * r) / self.n, "objective value")

    def excess(self, P):
        D = np.atleast_2d(np.asarray(P, dtype=float)) - self.xstar
        return _finite(np.einsum("pk,kl,pl->p", D, self.A, D), "objective value")

    def global_hessian(self, x=None):
        return 2.0 * np.array(self.A)

    def grad_terms(self, x):
        r = np.abs(np.einsum("imk,k->im", self.U, np.asarray(x, dtype=float)) - self.V)
        mag = 2.0 * np.einsum("im,imk->k", self.wts * r, np.abs(self.U)) / self.n
        return mag, int(np.count_nonzero(self.wts)) * self.dim

    def _arrays(self):
        return {"U": self.U, "V": self.V, "wts": self.wts}


class LogisticSuite(ObjectiveSuite):
    """Logistic-regression local costs with labels in {0, 1}."""

    kind = "case2"

    def __init__(self, features, labels):
        U, wts = _pad(features)
        V, _ = _pad(labels)
        super().__init__(U.shape[0], U.shape[2])
        if not np.all(np.isin(V, (0.0, 1.0))):
            raise InvalidParam("labels must be 0 or 1")
        self.U, self.V, self.wts = _ro(U), _ro(V), _ro(wts)
        gram = 0.25 * np.einsum("im,imk,iml->ikl", wts, U, U)
        self.L = float(np.linalg.eigvalsh(gram)[:, -1].max())

    def _agent_slice(self, i):
        m = self.wts[i] > 0
        return LogisticSuite([self.U[i][m]], [self.V[i][m]])

    def values(self, X):
        X = self._check_block(X)
        z = np.einsum("imk,ik->im", self.U, X)
        return _finite(np.einsum("im,im->i", self.wts, softplus(z) - self.V * z), "objective value")

    def grads(self, X):
        X = self._check_block(X)
        z = np.einsum("imk,ik->im", self.U, X)
        return _finite(np.einsum("im,imk->ik", self.wts * (expit(z) - self.V), self.U), "gradient")

    def global_values(self, P):
        P = _finite(np.atleast_2d(np.asarray(P, dtype=float)), "input point")
        z = np.einsum("imk,pk->pim", self.U, P)
        loss = softplus(z) - self.V[None] * z
        return _finite(np.einsum("im,pim->p", self.wts, loss) / self.n, "objective value")

    def global_hessian(self, x):
        z = np.einsum("imk,k->im", self.U, np.asarray(x, dtype=float))
        p = expit(z)
        return np.einsum("im,imk,iml->kl", self.wts * p * (1.0 - p), self.U, self.U) / self.n

    def grad_terms(self, x):
        z = np.einsum("imk,k->im", self.U, np.asarray(x, dtype=float))
        mag = np.einsum("im,imk->k", self.wts * np.abs(expit(z) - self.V), np.abs(self.U)) / self.n
        return mag, int(np.count_nonzero(self.wts)) * self.dim

    def _arrays(self):
        return {"U": self.U, "V": self.V, "wts": self.wts}


class PiecewiseSuite(ObjectiveSuite):
    """``f_i(x) = phi(<a_i, x>) + <b_i, x>`` with a degree-``m`` flat bottom."""

    kind = "case3"

    def __init__(self, a, b, m=12):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if a.shape != b.shape:
            raise InvalidParam(f"a and b shapes differ: {a.shape} vs {b.shape}")
        if int(m) != m or m < 2:
            raise InvalidParam(f"exponent m must be an integer >= 2, got {m}")
        super().__init__(*a.shape)
        self.a, self.b, self.m = _ro(a), _ro(b), int(m)
        self.bbar = _ro(b.mean(axis=0))
        # curvature lives only on the inner branch
        self.L = float((self.m - 1) * np.max(np.sum(a * a, axis=1)))
        self.mu = 0.0

    def _agent_slice(self, i):
        return PiecewiseSuite(self.a[i : i + 1], self.b[i : i + 1], self.m)

    def phi(self, y):
        y = np.asarray(y, dtype=float)
        inner = np.abs(y) <= 1.0
        yc = np.where(inner, y, 0.0)
        return np.where(inner, yc**self.m / self.m, np.abs(y) - (self.m - 1) / self.m)

    def dphi(self, y):
        y = np.asarray(y, dtype=float)
        inner = np.abs(y) <= 1.0
        return np.where(inner, np.where(inner, y, 0.0) ** (self.m - 1), np.sign(y))

    def values(self, X):
        X = self._check_block(X)
        y = np.einsum("ik,ik->i", self.a, X)
        return _finite(self.phi(y) + np.einsum("ik,ik->i", self.b, X), "objective value")

    def grads(self, X):
        X = self._check_block(X)
        y = np.einsum("ik,ik->i", self.a, X)
        return _finite(self.dphi(y)[:, None] * self.a + self.b, "gradient")

    def global_values(self, P):
        P = _finite(np.atleast_2d(np.asarray(P, dtype=float)), "input point")
        # summing the linear parts first avoids cancellation near the optimum
        return _finite(self.phi(P @ self.a.T).mean(axis=1) + P @ self.bbar, "objective value")

    def global_hessian(self, x):
        y = self.a @ np.asarray(x, dtype=float)
        inner = np.abs(y) <= 1.0
        c = np.where(inner, (self.m - 1) * np.where(inner, y, 0.0) ** (self.m - 2), 0.0)
        return np.einsum("i,ik,il->kl", c, self.a, self.a) / self.n

    def grad_terms(self, x):
        d = np.abs(self.dphi(self.a @ np.asarray(x, dtype=float)))
        mag = (d[:, None] * np.abs(self.a) + np.abs(self.b)).sum(axis=0) / self.n
        return mag, 2 * self.n * self.dim

    def _arrays(self):
        return {"a": self.a, "b": self.b, "m": np.array(self.m)}


# ---------------------------------------------------------------------------
# generators


def gen_case1(n, samples_per_agent=50, dim=3, rng=None, tol=1e-12) -> QuadraticSuite:
    """Noisy linear-regression data with an intercept column."""
    rng = np.random.default_rng(rng)
    _check_sizes(n, samples_per_agent, dim)
    truth = rng.uniform(0.0, 1.0, dim)
    U = np.ones((n, samples_per_agent, dim))
    U[:, :, :-1] = rng.normal(0.0, 20.0, (n, samples_per_agent, dim - 1))
    V = U @ truth + rng.normal(0.0, 10.0, (n, samples_per_agent))
    suite = QuadraticSuite(list(U), list(V))
    solve_reference(suite, tol)
    return suite


def gen_case2(n, samples_per_agent=100, dim=3, rng=None, tol=1e-12) -> LogisticSuite:
    """Logistic data; ``mu`` is the smallest Hessian eigenvalue at the optimum."""
    rng = np.random.default_rng(rng)
    _check_sizes(n, samples_per_agent, dim)
    truth = rng.uniform(0.0, 1.0, dim)
    U = np.ones((n, samples_per_agent, dim))
    U[:, :, :-1] = rng.normal(0.0, 10.0, (n, samples_per_agent, dim - 1))
    V = (rng.random((n, samples_per_agent)) < expit(U @ truth)).astype(float)
    suite = LogisticSuite(list(U), list(V))
    try:
        solve_reference(suite, tol)
    except NoConvergence as exc:
        flat = [i for i in range(n) if np.ptp(V[i]) == 0]
        if flat:
            raise DegenerateLabels(f"agents {flat} hold a single label class") from exc
        raise
    return suite


def gen_case3(n, dim=4, rng=None, m=12, tol=1e-12) -> PiecewiseSuite:
    rng = np.random.default_rng(rng)
    if n < 1 or dim < 1:
        raise InvalidParam("n and dim must be positive")
    a = rng.normal(size=(n, dim))
    b = rng.normal(size=(n, dim))
    b[-1] = -b[:-1].sum(axis=0)
    suite = PiecewiseSuite(a, b, m)
    solve_reference(suite, tol)
    return suite


def _check_sizes(n, per_agent, dim):
    if n < 1 or per_agent < 1 or dim < 2:
        raise InvalidParam(f"need n >= 1, samples >= 1, dim >= 2; got {n}, {per_agent}, {dim}")


# ---------------------------------------------------------------------------
# reference optimum


def solve_reference(suite: ObjectiveSuite, tol: float = 1e-12, max_iter: int = 1_000_000):
    """Compute ``(xstar, fstar)`` and store them (plus ``mu`` for logistic suites) on the suite.

    Least squares is solved directly. The other suites run a centralized
    Nesterov method with function-value restarts from the origin; logistic
    suites switch to Newton steps once ``NEWTON_HANDOFF`` is met. The target is ``max(tol, suite.grad_floor(x))``: below the
    rounding floor of a gradient evaluation the norm is noise.
    """
    if tol < 1e-12:
        raise InvalidParam(f"tol must be >= 1e-12, got {tol}")
    if isinstance(suite, QuadraticSuite):
        x = _solve_normal_equations(suite)
    else:
        if isinstance(suite, LogisticSuite):
            x = _nesterov_restart(suite, max(tol, NEWTON_HANDOFF[0]), min(max_iter, NEWTON_HANDOFF[1]))
        else:
            x = _nesterov_restart(suite, tol, max_iter)
        if isinstance(suite, LogisticSuite) and not _small_grad(suite, x, tol):
            x = _newton_polish(suite, x, tol)
    if not _small_grad(suite, x, tol):
        gnorm = np.linalg.norm(suite.global_grad(x))
        raise NoConvergence(f"reference gradient norm {gnorm:.3e} above tol {tol:.1e}")
    suite.xstar = _ro(x)
    suite.fstar = float(suite.global_values(x[None, :])[0])
    if isinstance(suite, LogisticSuite):
        suite.mu = float(np.linalg.eigvalsh(suite.global_hessian(x))[0])
    return suite.xstar, suite.fstar


def _small_grad(suite, x, tol):
    return np.linalg.norm(suite.global_grad(x)) <= max(tol, suite.grad_floor(x))


def _solve_normal_equations(suite):
    A, c = np.asarray(suite.A), np.asarray(suite.c)
    if np.linalg.matrix_rank(A) < suite.dim:
        raise SingularSystem("aggregate Hessian is singular")
    x = np.linalg.solve(A, c)
    for _ in range(3):
        x = x + np.linalg.solve(A, c - A @ x)
    return x


def _nesterov_restart(suite, tol, max_iter):
    """Centralized Nesterov with ``alpha_{t+1}^2 = (1 - alpha_{t+1}) alpha_t^2`` and restarts."""
    eta = 1.0 / suite.L
    x = np.zeros(suite.dim)
    best, best_g = x, np.linalg.norm(suite.global_grad(x))
    if _small_grad(suite, x, tol):
        return best
    v, y, alpha = x.copy(), x.copy(), 1.0
    f_prev = suite.global_value(x)
    for _ in range(max_iter):
        g = suite.global_grad(y)
        gn = np.linalg.norm(g)
        if gn < best_g:
            best, best_g = y.copy(), gn
            if _small_grad(suite, y, tol):
                break
        x_new = y - eta * g
        v = v - (eta / alpha) * g
        alpha_next = 2.0 / (1.0 + np.sqrt(1.0 + 4.0 / alpha**2))
        f_new = suite.global_value(x_new)
        if f_new > f_prev:
            # restart the momentum from the last iterate
            v, y, alpha = x.copy(), x.copy(), 1.0
            continue
        x, f_prev = x_new, f_new
        y = (1.0 - alpha_next) * x + alpha_next * v
        alpha = alpha_next
    return best


def _newton_polish(suite, x, tol, steps=20):
    for _ in range(steps):
        if _small_grad(suite, x, tol):
            break
        g = suite.global_grad(x)
        x = x - np.linalg.solve(suite.global_hessian(x), g)
    return x


# ---------------------------------------------------------------------------
# persistence

_KINDS = {"case1": QuadraticSuite, "case2": LogisticSuite, "case3": PiecewiseSuite}


def save_suite(suite: ObjectiveSuite, path) -> None:
    """Write a self-describing ``.npz`` archive with raw data and constants."""
    np.savez(
        path,
        format_version=np.array(FORMAT_VERSION),
        kind=np.array(suite.kind),
        L=np.array(suite.L),
        mu=np.array(suite.mu),
        fstar=np.array(suite.fstar),
        xstar=np.asarray(suite.xstar),
        **suite._arrays(),
    )


def load_suite(path) -> ObjectiveSuite:
    with np.load(Path(path), allow_pickle=False) as z:
        if int(z["format_version"]) != FORMAT_VERSION:
            raise InvalidParam(f"unsupported suite format version {int(z['format_version'])}")
        kind = str(z["kind"])
        if kind == "case3":
            suite = PiecewiseSuite(z["a"], z["b"], int(z["m"]))
        elif kind in _KINDS:
            mask = z["wts"] > 0
            suite = _KINDS[kind]([u[k] for u, k in zip(z["U"], mask)], [v[k] for v, k in zip(z["V"], mask)])
        else:
            raise InvalidParam(f"unknown suite kind {kind!r}")
        suite.L, suite.mu, suite.fstar = float(z["L"]), float(z["mu"]), float(z["fstar"])
        suite.xstar = _ro(z["xstar"])
    return suite
