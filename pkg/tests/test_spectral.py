import itertools
import math

import numpy as np
import pytest

from accdngd.exceptions import InvalidParam
from accdngd.spectral import (
    CERT_GRID,
    certify_momentum_decay,
    certify_nsc_gain_perron,
    certify_sc_gain_radius,
    gain_matrix_nsc,
    gain_matrix_sc,
    sc_eta_limit,
)
from accdngd.spectral import momentum_sequences


@pytest.mark.parametrize("eta,sigma,L,mu", [(1e-4, 0.6, 1.0, 0.01), (3e-7, 0.9, 100.0, 0.1), (0.01, 0.3, 2.0, 2.0)])
def test_sc_charpoly_matches_determinant(eta, sigma, L, mu):
    gm = gain_matrix_sc(eta, sigma, L, mu)
    for z in (0.1, 0.7, 1.3, gm.rho):
        det = np.linalg.det(z * np.eye(3) - gm.G)
        assert gm.charpoly(z) == pytest.approx(det, abs=1e-12)


@pytest.mark.parametrize("eta,sigma,L", [(1e-3, 0.6, 1.0), (1e-6, 0.9, 100.0), (0.2, 0.3, 2.0)])
def test_nsc_charpoly_matches_determinant(eta, sigma, L):
    gm = gain_matrix_nsc(eta, sigma, L)
    for z in (0.1, 0.7, 1.3, gm.theta):
        det = np.linalg.det(z * np.eye(3) - gm.G)
        assert gm.charpoly(z) == pytest.approx(det, abs=1e-10 * max(1, L))


def test_sc_matrix_entries():
    eta, sigma, L, mu = 1e-3, 0.5, 1.0, 0.25
    a = math.sqrt(mu * eta)
    G = gain_matrix_sc(eta, sigma, L, mu).G
    assert G[0, 0] == pytest.approx((1 - a) * sigma)
    assert G[0, 2] == pytest.approx(eta * L / a)
    assert G[2, 2] == pytest.approx(sigma + 2 * eta * L)
    assert np.all(G >= 0)


def test_sc_perron_simple_and_dominant():
    gm = gain_matrix_sc(1e-5, 0.6, 1.0, 0.01)
    vals = np.linalg.eigvals(gm.G)
    k = np.argmax(np.abs(vals))
    assert gm.perron_simple and abs(vals[k].imag) < 1e-12
    assert all(abs(v) < vals[k].real for i, v in enumerate(vals) if i != k)
    assert gm.rho == pytest.approx(vals[k].real, rel=1e-6)


def test_nsc_small_step_limit():
    gm = gain_matrix_nsc(1e-15, 0.6, 1.0)
    assert np.allclose(gm.G, [[0.6, 0, 0], [0.6, 0.6, 0], [1.0, 2.0, 0.6]], atol=1e-14)
    assert gm.theta == pytest.approx(0.6, abs=1e-4)


def test_nsc_perron_vector():
    gm = gain_matrix_nsc(1e-3, 0.7, 2.0)
    assert gm.chi[2] == 1.0 and np.all(gm.chi > 0)
    assert np.linalg.norm(gm.G @ gm.chi - gm.theta * gm.chi) <= 1e-12
    assert np.allclose(gm.chi, gm.chi_eig, rtol=1e-6)
    assert 0.7 < gm.theta < 0.7 + 4 * (2e-3) ** (1 / 3)
    d = gm.theta - 0.7
    assert gm.chi[1] == pytest.approx(d / 4 - 1e-3 - 1e-3 / (2 * d), rel=1e-10)


def test_gain_matrix_param_errors():
    with pytest.raises(InvalidParam):
        gain_matrix_nsc(1e-3, 1.0, 1.0)
    with pytest.raises(InvalidParam):
        gain_matrix_sc(1e-3, 0.5, 1.0, 2.0)


def test_sc_radius_grid_certified():
    total = 0
    for sigma, L, ratio in itertools.product(*CERT_GRID.values()):
        rep = certify_sc_gain_radius(sigma, L, ratio * L, 100, rng=11)
        assert rep.violations == 0, rep.failures()[:2]
        total += rep.n_checks
    assert total >= 12 * 100


def test_sc_radius_examples():
    assert certify_sc_gain_radius(0.6, 1.0, 0.01, 100, rng=1).violations == 0
    # degenerate mu = L
    assert certify_sc_gain_radius(0.6, 1.0, 1.0, 100, rng=2).violations == 0
    rep = certify_sc_gain_radius(0.6, 1.0, 0.01, 1, rng=3)
    assert rep.rows[0]["eta"] == pytest.approx(0.999 * sc_eta_limit(0.6, 1.0))


def test_nsc_perron_grid_certified():
    for sigma, L in itertools.product(CERT_GRID["sigma"], CERT_GRID["L"]):
        rep = certify_nsc_gain_perron(sigma, L, 100, rng=12)
        assert rep.violations == 0, rep.failures()[:2]
    assert certify_nsc_gain_perron(0.7, 2.0, 200, rng=4).violations == 0


def test_nsc_ratio_equality_case():
    rep = certify_nsc_gain_perron(0.7, 2.0, 3, rng=0)
    eq = [r for r in rep.rows if r["check"].endswith("ratio") and r["eta"] == r["eta2"]]
    assert eq and all(r["value"] == 0.0 and r["bound"] == 0.0 and r["ok"] for r in eq)


def test_certification_detects_violation():
    # the same machinery must flag a bound that is false: tighten the radius
    # upper bound to sigma + (eta L)^(1/3) / 100 and expect failures
    from accdngd.spectral import _row

    gm = gain_matrix_sc(1e-6, 0.6, 1.0, 0.01)
    bad = _row("rho_upper", gm.rho, 0.6 + (1e-6) ** (1 / 3) / 100, 1e-9)
    assert not bad["ok"]


def test_momentum_decay_certified():
    for L in (1.0, 100.0):
        rep = certify_momentum_decay(1 / (8 * L), 1, 0.61, L, 10_000)
        assert rep.violations == 0
        slope = next(r["value"] for r in rep.rows if r["check"] == "lambda_loglog_slope")
        assert -1.5 < slope < -1.3
    assert certify_momentum_decay(1 / 8, 1, 0.0, 1.0, 5000).violations == 0


def test_momentum_sequences():
    alpha, lam = momentum_sequences(1 / 8, 1, 0.61, 1.0, 50)
    assert lam[0] == 1.0 and alpha[0] == pytest.approx(math.sqrt(1 / 8))
    assert np.all(np.diff(alpha) < 0)
    assert lam[3] == pytest.approx(np.prod(1 - alpha[:3]))


def test_momentum_decay_param_errors():
    with pytest.raises(InvalidParam):
        certify_momentum_decay(1.0, 1, 0.61, 1.0, 100)
    with pytest.raises(InvalidParam):
        certify_momentum_decay(0.1, 1, 2.0, 1.0, 100)
