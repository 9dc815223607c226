"""Consensus-error gain matrices and numeric certification of their spectral bounds.

The spectral radius of each 3x3 gain matrix is computed twice: by a dense
eigensolver, and as the largest real root of the characteristic polynomial
written in the shifted variable ``d = zeta - sigma``. The shifted form stays
well conditioned as ``eta -> 0``, where the eigenvalues of ``G`` cluster at
``sigma`` and a dense solver loses about a third of the digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import Report, loglog_slope
from .exceptions import InvalidParam
from .schedules import StepSchedule, next_alpha, schedule_eta

__all__ = [
    "GainMatrixSC",
    "GainMatrixNSC",
    "gain_matrix_sc",
    "gain_matrix_nsc",
    "sc_eta_limit",
    "certify_sc_gain_radius",
    "certify_nsc_gain_perron",
    "certify_momentum_decay",
    "CERT_GRID",
]

# sigma, L, mu/L combinations every certification is run on
CERT_GRID = {"sigma": (0.3, 0.6, 0.9), "L": (1.0, 100.0), "mu_ratio": (1e-3, 1e-1)}


def _largest_real_root(coeffs, seed):
    """Largest real root of a monic cubic in ``d``, polished by Newton from ``seed``."""
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-9 * np.abs(roots).max()].real
    d = float(real.max()) if real.size else float(seed)
    dp = np.polyder(coeffs)
    for _ in range(3):
        step = np.polyval(coeffs, d) / np.polyval(dp, d)
        d -= step
    return d


def _perron(G):
    vals, vecs = np.linalg.eig(G)
    k = int(np.argmax(np.abs(vals)))
    theta = vals[k]
    others = np.delete(np.abs(vals), k)
    simple_real = abs(theta.imag) <= 1e-12 * abs(theta) and np.all(others < abs(theta))
    chi = vecs[:, k].real / vecs[2, k].real
    return float(theta.real), chi, bool(simple_real)


@dataclass(frozen=True)
class GainMatrixSC:
    eta: float
    sigma: float
    L: float
    mu: float
    alpha: float
    G: np.ndarray
    rho: float  # from the shifted characteristic polynomial
    rho_eig: float  # from the dense eigensolver
    charpoly_residual: float
    eig_residual: float
    perron_simple: bool

    def charpoly(self, zeta):
        return _charpoly_sc(np.asarray(zeta) - self.sigma, self.eta, self.sigma, self.L, self.alpha)


@dataclass(frozen=True)
class GainMatrixNSC:
    eta: float
    sigma: float
    L: float
    G: np.ndarray
    theta: float
    theta_eig: float
    chi: np.ndarray  # closed form from theta, normalized chi[2] = 1
    chi_eig: np.ndarray
    charpoly_residual: float
    eig_residual: float
    perron_simple: bool

    def charpoly(self, zeta):
        return np.polyval(_nsc_coeffs(self.eta, self.sigma, self.L), np.asarray(zeta) - self.sigma)


def _sc_k(eta, sigma, L, alpha):
    eL = eta * L
    k1 = 4 * eL + sigma * eL
    k2 = 2 * eL**2 * (4 + sigma) + eL * sigma * (2 + alpha * sigma) + 2 * eL * alpha**2 * sigma * (2 + alpha * sigma) / (1 + alpha)
    return k1, k2


def _charpoly_sc(d, eta, sigma, L, alpha):
    k1, k2 = _sc_k(eta, sigma, L, alpha)
    c = 2 * alpha * sigma / (1 + alpha)
    return d * (d + c) * (d - 2 * eta * L) - (k1 * (d - 2 * eta * L) + k2)


def _sc_coeffs(eta, sigma, L, alpha):
    k1, k2 = _sc_k(eta, sigma, L, alpha)
    c = 2 * alpha * sigma / (1 + alpha)
    e2 = 2 * eta * L
    # d (d + c)(d - e2) - k1 (d - e2) - k2
    return np.array([1.0, c - e2, -c * e2 - k1, k1 * e2 - k2])


def _nsc_coeffs(eta, sigma, L):
    eL = eta * L
    # (d^2 - 5 eL)(d - 2 eL) - 2 eL sigma - 10 eL^2
    return np.array([1.0, -2 * eL, -5 * eL, -2 * eL * sigma])


def _check_params(eta, sigma, L):
    if not (eta > 0 and L > 0 and 0 < sigma < 1):
        raise InvalidParam(f"need eta > 0, L > 0, 0 < sigma < 1; got {eta}, {L}, {sigma}")


def gain_matrix_sc(eta: float, sigma: float, L: float, mu: float) -> GainMatrixSC:
    _check_params(eta, sigma, L)
    if not 0 < mu <= L:
        raise InvalidParam(f"need 0 < mu <= L, got mu={mu}")
    a = math.sqrt(mu * eta)
    if not a < 1:
        raise InvalidParam(f"sqrt(mu * eta) = {a} must be below 1")
    eL = eta * L
    G = np.array(
        [
            [(1 - a) * sigma, a * sigma, eL / a],
            [(1 - a) / (1 + a) * a * sigma, (1 + a * a) / (1 + a) * sigma, 2 * eL],
            [a * sigma, 2.0, sigma + 2 * eL],
        ]
    )
    rho_eig, chi, simple = _perron(G)
    d = _largest_real_root(_sc_coeffs(eta, sigma, L, a), rho_eig - sigma)
    return GainMatrixSC(
        eta, sigma, L, mu, a, G, sigma + d, rho_eig,
        charpoly_residual=float(abs(_charpoly_sc(rho_eig - sigma, eta, sigma, L, a))),
        eig_residual=float(np.linalg.norm(G @ chi - rho_eig * chi)),
        perron_simple=simple,
    )


def gain_matrix_nsc(eta: float, sigma: float, L: float) -> GainMatrixNSC:
    _check_params(eta, sigma, L)
    G = np.array([[sigma, 0.0, eta], [sigma, sigma, 2 * eta], [L, 2 * L, sigma + 2 * eta * L]])
    theta_eig, chi_eig, simple = _perron(G)
    coeffs = _nsc_coeffs(eta, sigma, L)
    d = _largest_real_root(coeffs, theta_eig - sigma)
    chi1 = eta / d
    chi = np.array([chi1, (sigma * chi1 + 2 * eta) / d, 1.0])
    return GainMatrixNSC(
        eta, sigma, L, G, sigma + d, theta_eig, chi, chi_eig,
        charpoly_residual=float(abs(np.polyval(coeffs, theta_eig - sigma))),
        eig_residual=float(np.linalg.norm(G @ chi_eig - theta_eig * chi_eig)),
        perron_simple=simple,
    )


# -- certification -------------------------------------------------------------


def _row(check, value, bound, tol, lower_is_bound=False, **params):
    """``value <= bound`` (or ``>=`` when ``lower_is_bound``) with relative slack ``tol``."""
    margin = (value - bound) if lower_is_bound else (bound - value)
    ok = margin >= -tol * max(1.0, abs(bound))
    return dict(check=check, value=float(value), bound=float(bound), margin=float(margin), ok=bool(ok), **params)


def _log_uniform(rng, hi, count, span=8.0):
    """``count`` samples log-uniform on ``[hi * 10^-span, hi)`` plus the point ``0.999 hi``."""
    pts = hi * 10.0 ** rng.uniform(-span, 0.0, max(count - 1, 0))
    return np.append(np.minimum(pts, 0.999 * hi), 0.999 * hi)


def sc_eta_limit(sigma: float, L: float) -> float:
    return min((1 - sigma) ** 3 / (512 * L), sigma**3 / (64 * L))


def _numeric_rows(gm, tol, params):
    return [
        _row("eig_residual", gm.eig_residual, 1e-10, 0.0, **params),
        _row("charpoly_residual", gm.charpoly_residual, 1e-8, 0.0, **params),
        dict(check="perron_simple", value=float(gm.perron_simple), bound=1.0, margin=float(gm.perron_simple) - 1.0,
             ok=gm.perron_simple, **params),
    ]


def certify_sc_gain_radius(sigma, L, mu, eta_samples: int = 100, rng=None, tol: float = 1e-9) -> Report:
    """Check ``sigma + (sigma eta L)^(1/3) < rho < sigma + 4 (eta L)^(1/3) < (1 + sigma)/2``.

    Step sizes are drawn log-uniformly below ``sc_eta_limit(sigma, L)``.
    """
    rng = np.random.default_rng(rng)
    rows = []
    for eta in _log_uniform(rng, sc_eta_limit(sigma, L), eta_samples):
        gm = gain_matrix_sc(eta, sigma, L, mu)
        p = dict(sigma=sigma, L=L, mu=mu, eta=float(eta))
        eL = eta * L
        upper = sigma + 4 * eL ** (1 / 3)
        rows.append(_row("rho_lower", gm.rho, sigma + (sigma * eL) ** (1 / 3), tol, lower_is_bound=True, **p))
        rows.append(_row("rho_upper", gm.rho, upper, tol, **p))
        rows.append(_row("upper_below_mid", upper, (1 + sigma) / 2, tol, **p))
        rows.extend(_numeric_rows(gm, tol, p))
    return Report("sc_gain_radius", rows)


def certify_nsc_gain_perron(sigma, L, eta_samples: int = 100, rng=None, tol: float = 1e-9) -> Report:
    """Check the Perron root and vector bounds of the convex-case gain matrix.

    Three step ranges are sampled: ``eta L < 1`` for the radius upper bound and
    the second vector entry; ``eta < sqrt(sigma)/(2 sqrt(2) L)`` for the radius
    lower bound and first entry; pairs below ``sigma^2/(729 L)`` for the growth
    ratios of both entries.
    """
    rng = np.random.default_rng(rng)
    rows = []
    for eta in _log_uniform(rng, 1.0 / L, eta_samples):
        gm = gain_matrix_nsc(eta, sigma, L)
        p = dict(sigma=sigma, L=L, eta=float(eta), range="etaL<1")
        rows.append(_row("theta_above_sigma", gm.theta, sigma, 0.0, lower_is_bound=True, **p))
        rows[-1]["ok"] = bool(gm.theta > sigma)
        rows.append(_row("theta_upper", gm.theta, sigma + 4 * (eta * L) ** (1 / 3), tol, **p))
        rows.append(_row("chi2_upper", gm.chi[1], 2 * eta ** (1 / 3) / L ** (2 / 3), tol, **p))
        rows.append(_row("chi3_one", gm.chi[2], 1.0, 0.0, **p))
        rows.append(_row("chi_matches_solver", float(np.abs(gm.chi - gm.chi_eig).max() / np.abs(gm.chi).max()),
                         1e-6, 0.0, **p))
        rows.extend(_numeric_rows(gm, tol, p))
    for eta in _log_uniform(rng, math.sqrt(sigma) / (2 * math.sqrt(2) * L), eta_samples):
        gm = gain_matrix_nsc(eta, sigma, L)
        p = dict(sigma=sigma, L=L, eta=float(eta), range="eta<sqrt(sigma)/(2sqrt2 L)")
        s = (sigma * eta * L) ** (1 / 3)
        rows.append(_row("theta_lower", gm.theta, sigma + s, tol, lower_is_bound=True, **p))
        rows.append(_row("chi1_upper", gm.chi[0], eta / s, tol, **p))
    hi = sigma**2 / (729 * L)
    z = _log_uniform(rng, hi, 2 * eta_samples)
    pairs = [(max(a, b), min(a, b)) for a, b in zip(z[0::2], z[1::2])]
    pairs.append((0.5 * hi, 0.5 * hi))
    for z1, z2 in pairs:
        g1, g2 = gain_matrix_nsc(z1, sigma, L), gain_matrix_nsc(z2, sigma, L)
        p = dict(sigma=sigma, L=L, eta=float(z1), eta2=float(z2), range="pairs<sigma^2/(729L)")
        lr = math.log(z1 / z2)
        # compare logarithms: the exponents reach 28/0.3 and overflow otherwise
        rows.append(_row("chi1_ratio", math.log(g1.chi[0] / g2.chi[0]), 6 / sigma * lr, tol, **p))
        rows.append(_row("chi2_ratio", math.log(g1.chi[1] / g2.chi[1]), 28 / sigma * lr, tol, **p))
    return Report("nsc_gain_perron", rows)


def momentum_sequences(eta, t0, beta, L, T):
    """``alpha_t`` and ``lambda_t = prod_{k<t} (1 - alpha_k)`` for ``t = 0..T``."""
    sched = StepSchedule.fixed(eta) if beta == 0 else StepSchedule.vanishing(eta, t0, beta)
    etas = np.array([schedule_eta(sched, t) for t in range(T + 1)])
    alpha = np.empty(T + 1)
    alpha[0] = math.sqrt(etas[0] * L)
    for t in range(T):
        alpha[t + 1] = next_alpha(alpha[t], etas[t], etas[t + 1])
    lam = np.concatenate([[1.0], np.cumprod(1.0 - alpha[:-1])])
    return alpha, lam


def certify_momentum_decay(eta, t0, beta, L, T: int = 10_000, tol: float = 1e-9) -> Report:
    """Check ``alpha_t <= 2/(t+1)`` and ``lambda_t >= D(beta, t0) / (t + t0)^(2 - beta)``.

    ``beta = 0`` means a fixed step ``eta``. The report also carries the fitted
    log-log slope of ``lambda_t`` over the last decade of the horizon.
    """
    if not 0 <= beta < 2:
        raise InvalidParam(f"beta must lie in [0, 2), got {beta}")
    if t0 < 1 or T < 10:
        raise InvalidParam("need t0 >= 1 and T >= 10")
    eta0 = eta / t0**beta
    if not 0 < eta0 < 1 / (4 * L):
        raise InvalidParam(f"need 0 < eta_0 < 1/(4L), got eta_0 L = {eta0 * L}")
    alpha, lam = momentum_sequences(eta, t0, beta, L, T)
    t = np.arange(T + 1)
    log_d = -2 * math.log(t0 + 3) - (16 + 6 / (2 - beta))
    lam_bound = np.exp(log_d - (2 - beta) * np.log(t + t0))
    p = dict(eta=eta, t0=t0, beta=beta, L=L)
    rows = []
    for k in t:
        rows.append(_row("alpha_upper", alpha[k], 2 / (k + 1), tol, t=int(k), **p))
        rows.append(_row("lambda_lower", lam[k], lam_bound[k], tol, lower_is_bound=True, t=int(k), **p))
    rows.append(_row("lambda_at_zero", lam[0], 1.0, 0.0, t=0, **p))
    step_up = float(np.max(np.diff(alpha)))
    rows.append(dict(check="alpha_decreasing", value=step_up, bound=0.0, margin=-step_up, ok=step_up < 0, t=int(T), **p))
    slope = loglog_slope((t[1:], lam[1:]), max(1, T // 10), T)
    rows.append(dict(check="lambda_loglog_slope", value=slope, bound=-(2 - beta), margin=0.0, ok=True, t=int(T), **p))
    return Report("momentum_decay", rows)
