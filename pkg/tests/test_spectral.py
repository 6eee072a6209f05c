import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import minimize_scalar

from conftest import BM, CP, MERO, MERO_FV, MERO_ONE
from levyqsd import CPExpDrift, DomainError, compute_spectral, phi, phi_extended, phi_prime, psi
from levyqsd.levy import psi_raw
from strategies import any_model


def test_closed_form_rates():
    sd = compute_spectral(BM)
    assert sd.theta0 == 1.0 and sd.lambda0 == 0.5
    sd = compute_spectral(CP)
    assert sd.theta0 == pytest.approx(1 - math.sqrt(0.5), abs=1e-15)
    assert sd.lambda0 == pytest.approx(3 - 2 * math.sqrt(2), abs=1e-15)
    assert sd.r == 1.0


def test_no_qsd_when_drift_vanishes():
    sd = compute_spectral(CPExpDrift(1.0, 1.0, 1.0))
    assert sd.theta0 == 0.0 and sd.lambda0 == 0.0 and not sd.has_qsd


def test_upward_drift_still_has_phi():
    # psi(b) = b - 2b/(b+1) vanishes at b = 1
    sd = compute_spectral(CPExpDrift(1.0, 2.0, 1.0))
    assert sd.lambda0 == 0.0
    assert phi(sd, 0.0) == pytest.approx(1.0, abs=1e-13)
    assert psi(sd.model, phi(sd, 3.0)) == pytest.approx(3.0, rel=1e-12)


@pytest.mark.parametrize("m", [MERO, MERO_FV, MERO_ONE])
def test_meromorphic_theta0_against_minimiser(m):
    sd = compute_spectral(m)
    r = m.canonical.boundary
    res = minimize_scalar(lambda b: psi(m, b), bounds=(-r + 1e-9, 0.0), method="bounded",
                          options={"xatol": 1e-12})
    assert sd.theta0 == pytest.approx(-res.x, abs=1e-6)
    assert sd.lambda0 == pytest.approx(-res.fun, rel=1e-10)
    assert abs(psi_raw(m, -sd.theta0, 1)) < 1e-12
    assert sd.lambda0 == pytest.approx(-psi(m, -sd.theta0), rel=1e-10)
    assert 0 < sd.theta0 < sd.r


def test_phi_examples():
    sd = compute_spectral(BM)
    assert phi(sd, 2.0) == pytest.approx(math.sqrt(5) - 1, abs=1e-15)
    assert phi(sd, 0.0) == 0.0
    assert phi(compute_spectral(CP), 1.0) == pytest.approx(math.sqrt(8) / 4, abs=1e-15)
    with pytest.raises(DomainError):
        phi(sd, -0.1)


def test_phi_zero_for_every_model(model):
    assert phi(compute_spectral(model), 0.0) == 0.0


def test_phi_extended_examples():
    sd = compute_spectral(BM)
    assert phi_extended(sd, -0.5) == -1.0
    assert phi_extended(sd, -0.375) == pytest.approx(-0.5, abs=1e-15)
    with pytest.raises(DomainError):
        phi_extended(sd, -0.6)


def test_phi_prime_examples():
    sd = compute_spectral(BM)
    assert phi_prime(sd, 0.0) == 1.0
    assert phi_prime(sd, -0.375) == pytest.approx(2.0, rel=1e-14)
    assert phi_prime(compute_spectral(CP), 0.0) == pytest.approx(1.0, rel=1e-14)
    assert phi_prime(sd, -0.5) == math.inf


def test_phi_extended_at_minus_lambda0(model):
    sd = compute_spectral(model)
    assert phi_extended(sd, -sd.lambda0) == -sd.theta0
    # continuity from the right, through the bisection branch and beyond it
    for eps in (1e-9, 1e-7, 1e-4):
        b = phi_extended(sd, -sd.lambda0 * (1 - eps))
        assert -sd.theta0 < b
        assert b + sd.theta0 < 10 * math.sqrt(eps)


def test_round_trip_grid(model):
    sd = compute_spectral(model)
    qs = np.linspace(-0.999 * sd.lambda0, 10.0, 200)
    betas = np.array([phi_extended(sd, q) for q in qs])
    for q, b in zip(qs, betas):
        assert abs(psi(model, b) - q) <= 1e-10 * max(1.0, abs(q))
    assert np.all(np.diff(betas) > 0)
    # concave: second divided differences are non-positive up to rounding
    dd = np.diff(betas, 2)
    assert np.all(dd <= 1e-12)


def test_esscher_consistency(model):
    sd = compute_spectral(model)
    for theta in np.linspace(0.05, 0.95, 7) * sd.theta0:
        assert phi_extended(sd, psi(model, -theta)) == pytest.approx(-theta, abs=1e-10)


def test_phi_prime_finite_difference(model):
    sd = compute_spectral(model)
    for q in (-0.5 * sd.lambda0, 0.0, 1.3):
        exact = phi_prime(sd, q)
        e = [abs((phi_extended(sd, q + h) - phi_extended(sd, q - h)) / (2 * h) - exact) for h in (1e-3, 1e-4)]
        assert math.log10(e[0] / e[1]) >= 1.9


@settings(max_examples=50, deadline=None)
@given(any_model)
def test_round_trip_random_models(m):
    sd = compute_spectral(m)
    assert sd.lambda0 > 0
    assert sd.lambda0 == pytest.approx(-psi(m, -sd.theta0), rel=1e-10)
    assert psi_raw(m, -sd.theta0, 1) == pytest.approx(0.0, abs=1e-9)
    qs = np.concatenate([np.linspace(-0.999 * sd.lambda0, 0.0, 20), np.linspace(0.1, 10.0, 20)])
    prev = -math.inf
    for q in qs:
        b = phi_extended(sd, q)
        assert abs(psi(m, b) - q) <= 1e-10 * max(1.0, abs(q))
        assert b > prev
        prev = b


def test_spectral_is_cached():
    assert compute_spectral(MERO) is compute_spectral(MERO)
