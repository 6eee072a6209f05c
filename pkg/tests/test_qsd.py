import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import quad
from scipy.optimize import brentq

from conftest import BM, CP, CP_FAST, MERO, MERO_FV, MERO_ONE
from levyqsd import (CPExpDrift, DomainError, build_qsd, compute_spectral, lambda_scan, order_check,
                     psi, qsd_laplace, qsd_sample)
from strategies import any_model

FAMILIES = [BM, CP_FAST, MERO, MERO_FV, MERO_ONE]
FAMILY_IDS = ["bm", "cp_fast", "mero", "mero_fv", "mero_one"]


def gamma2_median():
    # independent oracle: root of 1 - (1 + x) e^{-x} = 1/2
    return brentq(lambda x: 1 - (1 + x) * math.exp(-x) - 0.5, 0.5, 3.0, xtol=1e-14)


# --- build_qsd -------------------------------------------------------------------------


def test_bm_minimal_qsd_is_gamma2():
    q = build_qsd(BM, None, 0.5)
    xs = np.linspace(0, 50, 2001)
    assert np.max(np.abs(q.density(xs) - xs * np.exp(-xs))) < 1e-13
    assert q.mass == pytest.approx(1.0, abs=1e-8)
    assert q.tail_rate == -1.0
    assert q.tail_coeff == math.inf


def test_bm_sub_minimal_qsd_closed_form():
    q = build_qsd(BM, None, 0.375)
    xs = np.linspace(0, 30, 301)
    want = 1.5 * np.exp(-xs) * np.sinh(xs / 2)
    assert np.max(np.abs(q.density(xs) - want)) < 1e-13
    assert abs(q.mass - 1) <= 1e-5
    assert q.tail_rate == pytest.approx(-0.5, abs=1e-14)
    assert q.tail_coeff == pytest.approx(2.0, rel=1e-13)


@pytest.mark.parametrize("m", FAMILIES + [CP], ids=FAMILY_IDS + ["cp"])
def test_lambda_above_lambda0_rejected(m):
    sd = compute_spectral(m)
    with pytest.raises(DomainError, match="lambda0"):
        build_qsd(m, sd, 1.2 * sd.lambda0)
    with pytest.raises(DomainError):
        build_qsd(m, sd, 0.0)
    with pytest.raises(DomainError):
        build_qsd(m, sd, -0.1)


def test_no_qsd_when_lambda0_is_zero():
    m = CPExpDrift(1.0, 2.0, 1.0)
    with pytest.raises(DomainError, match="no quasi-stationary"):
        build_qsd(m, None, 0.1)


@pytest.mark.parametrize("m", FAMILIES + [CP], ids=FAMILY_IDS + ["cp"])
@pytest.mark.parametrize("frac", [0.25, 0.5, 1.0])
def test_mass_is_one(m, frac):
    sd = compute_spectral(m)
    q = build_qsd(m, sd, frac * sd.lambda0)
    assert abs(q.mass - 1) <= 1e-5
    assert np.all(q.grid.values >= 0)


@pytest.mark.parametrize("m", FAMILIES, ids=FAMILY_IDS)
def test_mass_against_adaptive_quadrature(m):
    sd = compute_spectral(m)
    q = build_qsd(m, sd, 0.5 * sd.lambda0)
    tot, _ = quad(lambda x: q.density(x), 0, 50, limit=400, epsabs=1e-12)
    tot += quad(lambda x: q.density(x), 50, np.inf, limit=200, epsabs=1e-14)[0]
    assert tot == pytest.approx(1.0, abs=1e-6)


def test_density_zero_left_of_origin():
    q = build_qsd(MERO, None, 0.3)
    assert q.density(-1.0) == 0.0
    assert q.cdf(-1.0) == 0.0


@pytest.mark.parametrize("m", FAMILIES, ids=FAMILY_IDS)
def test_cdf_continuous_at_x_max_and_tends_to_mass(m):
    sd = compute_spectral(m)
    for lam in (0.5 * sd.lambda0, sd.lambda0):
        q = build_qsd(m, sd, lam)
        left = q.cdf(q.x_max - 1e-9)
        right = q.cdf(q.x_max + 1e-9)
        assert abs(left - right) < 1e-8
        assert q.cdf(1e4) == pytest.approx(q.mass, abs=1e-6)
        xs = np.linspace(0, 80, 801)
        assert np.all(np.diff(q.cdf(xs)) >= -1e-15)


def test_cdf_table_against_gamma2():
    q = build_qsd(BM, None, 0.5)
    xs = np.linspace(0, 20, 201)
    assert np.max(np.abs(q.cdf(xs) - stats.gamma(2).cdf(xs))) < 1e-6
    assert q.cdf(60.0) == pytest.approx(stats.gamma(2).cdf(60.0), abs=1e-7)


def test_inverse_cdf_round_trip():
    q = build_qsd(MERO, None, 0.4)
    u = np.linspace(0.01, 0.99, 50)
    assert np.max(np.abs(q.cdf(q.inverse_cdf(u)) - u)) < 1e-6


# --- Laplace transforms ----------------------------------------------------------------


def test_qsd_laplace_examples():
    assert qsd_laplace(BM, 0.5, 0.0) == 1.0
    assert qsd_laplace(BM, 0.5, 1.0) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(DomainError):
        qsd_laplace(BM, 0.6, 1.0)
    with pytest.raises(DomainError):
        qsd_laplace(BM, 0.5, -1.0)


def test_bm_laplace_against_gamma2_transform():
    # Gamma(2,1) has Laplace transform 1/(1+beta)^2
    q = build_qsd(BM, None, 0.5)
    for beta in (0.5, 1.0, 2.0, 5.0):
        assert q.laplace(beta) == pytest.approx((1 + beta) ** -2, abs=1e-10)
        assert qsd_laplace(BM, 0.5, beta) == pytest.approx((1 + beta) ** -2, abs=1e-15)


@pytest.mark.parametrize("m", FAMILIES + [CP], ids=FAMILY_IDS + ["cp"])
@pytest.mark.parametrize("frac", [0.25, 0.5, 1.0])
def test_quadrature_laplace_agreement(m, frac):
    sd = compute_spectral(m)
    lam = frac * sd.lambda0
    q = build_qsd(m, sd, lam)
    for beta in (0.5, 1.0, 2.0, 5.0):
        assert abs(q.laplace(beta) - qsd_laplace(m, lam, beta, sd)) <= 1e-5


@settings(max_examples=25, deadline=None)
@given(any_model, st.floats(0.1, 1.0), st.floats(0.0, 20.0))
def test_laplace_closed_form_in_unit_interval(m, frac, beta):
    sd = compute_spectral(m)
    v = qsd_laplace(m, frac * sd.lambda0, beta, sd)
    assert 0 < v <= 1
    # non-increasing in beta
    assert qsd_laplace(m, frac * sd.lambda0, beta + 0.5, sd) <= v


# --- sampling --------------------------------------------------------------------------


def test_sample_empty_and_negative():
    q = build_qsd(BM, None, 0.5)
    assert qsd_sample(q, 0, 1).size == 0
    with pytest.raises(ValueError):
        qsd_sample(q, -1, 1)


def test_sample_deterministic():
    q = build_qsd(MERO, None, 0.5)
    assert np.array_equal(qsd_sample(q, 1000, 42), qsd_sample(q, 1000, 42))
    assert not np.array_equal(qsd_sample(q, 1000, 42), qsd_sample(q, 1000, 43))


def test_bm_sample_moments_and_median():
    q = build_qsd(BM, None, 0.5)
    n = 100_000
    x = qsd_sample(q, n, 2024)
    # Gamma(2,1): mean 2, variance 2
    assert abs(x.mean() - 2.0) <= 3 * math.sqrt(2 / n)
    med = gamma2_median()
    assert med == pytest.approx(1.6783469, abs=1e-7)
    # median standard error 1 / (2 f(med) sqrt(n))
    se = 1 / (2 * med * math.exp(-med) * math.sqrt(n))
    assert abs(np.median(x) - med) <= 3 * se


@pytest.mark.parametrize("m", FAMILIES, ids=FAMILY_IDS)
def test_sample_ks_against_table(m):
    sd = compute_spectral(m)
    q = build_qsd(m, sd, 0.5 * sd.lambda0)
    n = 100_000
    x = qsd_sample(q, n, 7)
    ks = stats.kstest(x, q.cdf).statistic
    assert ks <= 1.63 / math.sqrt(n)


def test_sample_ks_against_gamma2():
    q = build_qsd(BM, None, 0.5)
    n = 100_000
    assert stats.kstest(qsd_sample(q, n, 11), stats.gamma(2).cdf).statistic <= 1.63 / math.sqrt(n)


def test_tail_sampler_beyond_x_max():
    # a short table forces the analytic tail to carry visible mass
    q = build_qsd(BM, None, 0.5, x_max=3.0)
    n = 100_000
    x = qsd_sample(q, n, 5)
    assert np.mean(x > 3.0) == pytest.approx(stats.gamma(2).sf(3.0), abs=4 * math.sqrt(0.2 / n))
    assert stats.kstest(x, stats.gamma(2).cdf).statistic <= 1.63 / math.sqrt(n)


# --- order structure ---------------------------------------------------------------------


def test_order_check_examples():
    v = order_check(BM, 0.1, 0.5, np.linspace(0, 10, 100))
    assert v.passed is True
    assert v.max_increment_plain < 0 and v.max_increment_scaled < 0
    v = order_check(BM, 0.3, 0.3, np.linspace(0, 10, 100))
    assert v.passed and v.max_increment_plain == 0.0
    assert order_check(BM, 0.1, 0.5, [1.0]).passed
    with pytest.raises(DomainError):
        order_check(BM, 0.5, 0.1, np.linspace(0, 1, 5))
    with pytest.raises(DomainError):
        order_check(BM, 0.1, 0.6, np.linspace(0, 1, 5))


@pytest.mark.parametrize("m", FAMILIES + [CP], ids=FAMILY_IDS + ["cp"])
def test_order_check_all_pairs(m):
    sd = compute_spectral(m)
    lams = [sd.lambda0 / 4, sd.lambda0 / 2, sd.lambda0]
    betas = np.linspace(0, 20, 400)
    for i, a in enumerate(lams):
        for b in lams[i:]:
            assert order_check(m, a, b, betas, sd).passed


def test_order_check_detects_wrong_direction():
    # with lambda > lambda' the plain ratio is increasing: swap the roles by hand
    betas = np.linspace(0, 10, 50)
    p = psi(BM, betas)
    assert np.all(np.diff((p + 0.1) / (p + 0.5)) > 0)


@settings(max_examples=30, deadline=None)
@given(any_model, st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_order_check_random(m, f1, f2):
    sd = compute_spectral(m)
    lo, hi = sorted((f1 * sd.lambda0, f2 * sd.lambda0))
    assert order_check(m, lo, hi, np.linspace(0, 30, 200), sd).passed


# --- lambda scan -------------------------------------------------------------------------


def test_lambda_scan_bm():
    rows = lambda_scan(BM, None, [0.4, 0.5, 0.6])
    assert [r.lam for r in rows] == [0.4, 0.5, 0.6]
    assert rows[0].min_w >= 0 and rows[1].min_w >= 0
    assert rows[2].min_w < 0
    assert rows[0].mass == pytest.approx(1.0, abs=1e-5)
    assert rows[1].mass == pytest.approx(1.0, abs=1e-5)


def test_lambda_scan_empty_and_invalid():
    assert lambda_scan(BM, None, []) == []
    with pytest.raises(DomainError):
        lambda_scan(BM, None, [0.0])


@pytest.mark.parametrize("m", FAMILIES, ids=FAMILY_IDS)
def test_positivity_threshold_brackets_lambda0(m):
    sd = compute_spectral(m)
    below, above = lambda_scan(m, sd, [sd.lambda0 * (1 - 1e-3), sd.lambda0 * 1.05])
    assert below.min_w >= 0
    assert above.min_w < 0


def test_positivity_threshold_slow_model_needs_longer_window():
    # for CP{2,1,1} the first sign change at 1.05 lambda0 sits near x = 55.7
    sd = compute_spectral(CP)
    (row,) = lambda_scan(CP, sd, [1.05 * sd.lambda0], x_max=50.0)
    assert row.min_w >= 0
    (row,) = lambda_scan(CP, sd, [1.05 * sd.lambda0], x_max=80.0, h=1e-2)
    assert row.min_w < 0


@pytest.mark.parametrize("m", FAMILIES, ids=FAMILY_IDS)
def test_mass_one_across_interval(m):
    sd = compute_spectral(m)
    rows = lambda_scan(m, sd, np.linspace(0.1, 1.0, 6) * sd.lambda0)
    for r in rows:
        assert abs(r.mass - 1) <= 1e-5
