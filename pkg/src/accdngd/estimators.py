"""scikit-learn style estimators that fit by simulating a network of agents.

Rows of ``X`` are split across ``n_agents`` (contiguous blocks, or by an
explicit ``groups`` array passed to ``fit``). Each agent sees only its block;
the agents agree on a common model through the accelerated gradient-tracking
iteration over ``graph``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from scipy.special import expit
from sklearn.utils.validation import check_is_fitted, validate_data

from . import algorithms as alg
from .exceptions import InvalidParam, NoConvergence
from .graphs import laplacian_weights, metropolis_weights, parse_graph_spec
from .objectives import LogisticSuite, QuadraticSuite
from .schedules import StepSchedule

__all__ = ["DistributedLinearRegression", "DistributedLogisticRegression"]


def _split(X, y, n_agents, groups):
    if groups is None:
        if n_agents > len(X):
            raise InvalidParam(f"{n_agents} agents but only {len(X)} samples")
        idx = np.array_split(np.arange(len(X)), n_agents)
    else:
        groups = np.asarray(groups)
        if groups.shape != (len(X),):
            raise InvalidParam("groups must have one entry per sample")
        idx = [np.flatnonzero(groups == g) for g in np.unique(groups)]
    return [X[i] for i in idx], [y[i] for i in idx]


class _DistributedBase(BaseEstimator):
    def _design(self, X):
        return np.hstack([X, np.ones((len(X), 1))]) if self.fit_intercept else X

    def _weights(self, n):
        spec = (self.graph or "kcycle:{n},1").format(n=n)
        g = parse_graph_spec(spec, np.random.default_rng(self.random_state))
        if g.n != n:
            raise InvalidParam(f"graph has {g.n} nodes but there are {n} agents")
        return laplacian_weights(g) if self.weights == "laplacian" else metropolis_weights(g)

    def _solve(self, suite, method, params):
        W = self._weights(suite.n).w
        state = alg.initialize(method, suite, np.zeros((suite.n, suite.dim)), **params)
        history = []
        for _ in range(self.max_iter):
            state = alg.step(state, suite, W)
            if state.t % self.check_every == 0:
                gnorm = float(np.linalg.norm(state.grad.mean(axis=0)))
                spread = float(np.linalg.norm(state.x - state.x.mean(axis=0)))
                history.append((state.t, gnorm, spread))
                if gnorm <= self.tol and spread <= self.tol:
                    break
        else:
            if self.strict:
                raise NoConvergence(f"no convergence within {self.max_iter} iterations")
        self.n_iter_ = state.t
        self.history_ = np.array(history).reshape(-1, 3)
        self.agent_coefs_ = state.x.copy()
        self.smoothness_ = suite.L
        return state.x.mean(axis=0)

    def _unpack(self, w):
        if self.fit_intercept:
            self.coef_, self.intercept_ = w[:-1], float(w[-1])
        else:
            self.coef_, self.intercept_ = w, 0.0

    def _decision(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_ + self.intercept_


class DistributedLinearRegression(RegressorMixin, _DistributedBase):
    """Least squares solved by agents that each hold a slice of the rows.

    Uses the strongly convex accelerated method when every agent's local
    problem is strongly convex, and the convex variant otherwise.
    """

    def __init__(self, n_agents=10, graph=None, weights="laplacian", eta_times_L=0.1, fit_intercept=True,
                 max_iter=20_000, tol=1e-8, check_every=10, strict=False, random_state=None):
        self.n_agents = n_agents
        self.graph = graph
        self.weights = weights
        self.eta_times_L = eta_times_L
        self.fit_intercept = fit_intercept
        self.max_iter = max_iter
        self.tol = tol
        self.check_every = check_every
        self.strict = strict
        self.random_state = random_state

    def fit(self, X, y, groups=None):
        X, y = validate_data(self, X, y, y_numeric=True)
        feats, targs = _split(self._design(X), y.astype(float), self.n_agents, groups)
        suite = QuadraticSuite(feats, targs)
        eta = self.eta_times_L / suite.L
        if suite.mu > 0 and np.sqrt(suite.mu * eta) < 1:
            w = self._solve(suite, "acc_dngd_sc", {"eta": eta})
            self.method_ = "acc_dngd_sc"
        else:
            w = self._solve(suite, "acc_dngd_nsc", {"schedule": StepSchedule.fixed(eta)})
            self.method_ = "acc_dngd_nsc"
        self._unpack(w)
        return self

    def predict(self, X):
        return self._decision(X)


class DistributedLogisticRegression(ClassifierMixin, _DistributedBase):
    """Binary logistic regression fitted by the convex accelerated method.

    ``step`` is ``"vanishing"`` (``eta / (t + 1)^0.61``) or ``"fixed"``;
    ``eta_times_L`` sets ``eta`` relative to the data's smoothness constant.
    """

    def __init__(self, n_agents=10, graph=None, weights="laplacian", step="vanishing", eta_times_L=0.5, beta=0.61,
                 fit_intercept=True, max_iter=20_000, tol=1e-6, check_every=10, strict=False, random_state=None):
        self.n_agents = n_agents
        self.graph = graph
        self.weights = weights
        self.step = step
        self.eta_times_L = eta_times_L
        self.beta = beta
        self.fit_intercept = fit_intercept
        self.max_iter = max_iter
        self.tol = tol
        self.check_every = check_every
        self.strict = strict
        self.random_state = random_state

    def fit(self, X, y, groups=None):
        X, y = validate_data(self, X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise InvalidParam(f"binary classification only; got {len(self.classes_)} classes")
        labels = (y == self.classes_[1]).astype(float)
        feats, labs = _split(self._design(X), labels, self.n_agents, groups)
        suite = LogisticSuite(feats, labs)
        eta = self.eta_times_L / suite.L
        if self.step == "vanishing":
            sched = StepSchedule.vanishing(eta, 1.0, self.beta)
        elif self.step == "fixed":
            sched = StepSchedule.fixed(eta)
        else:
            raise InvalidParam("step must be 'vanishing' or 'fixed'")
        self._unpack(self._solve(suite, "acc_dngd_nsc", {"schedule": sched}))
        return self

    def decision_function(self, X):
        return self._decision(X)

    def predict_proba(self, X):

        p = expit(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
