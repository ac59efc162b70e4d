import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mftr_secrecy.mftr import (
    LinkConfig,
    MftrParams,
    build_cache,
    eve_eq_pdf,
    mrc_snr_cdf,
    mrc_snr_pdf,
    normalization_gap,
    nu,
    omega_coefficients,
    phi_coefficients,
    rho,
)

FIG2_BOB = MftrParams(4, 2, 0.5, 2.5, 0.8)
FIG2_EVE = MftrParams(3, 2, 0.5, 6.5, 0.9)
RAYLEIGH = MftrParams(100, 1, 0.5, 1e-4, 0.0)


def test_params_validation():
    with pytest.raises(ValueError, match="delta"):
        MftrParams(2, 2, 0.5, 1.0, 1.2)
    with pytest.raises(ValueError):
        MftrParams(2, 1.5)
    with pytest.raises(ValueError):
        MftrParams(0, 1)
    with pytest.raises(ValueError):
        LinkConfig(FIG2_BOB, 0, 1.0)


def test_omega_rayleigh_limit():
    om = omega_coefficients(MftrParams(1, 1, 0.5, 0.0, 0.0), 10)
    assert om[0] == 1.0
    assert np.all(om[1:] == 0.0)


def test_omega_zero_delta_closed_form():
    # (m/(m+mu K))^m at i = 0
    assert omega_coefficients(MftrParams(2, 2, 0.5, 1.0, 0.0), 0)[0] == pytest.approx(0.25, rel=1e-14)


def test_omega_zero_delta_is_negative_binomial():
    # Delta = 0: omega_i is the NegBin(m, m/(m + mu K)) pmf
    p = MftrParams(2.5, 3, 0.5, 1.7, 0.0)
    om = omega_coefficients(p, 30)
    ref = stats.nbinom.pmf(np.arange(31), 2.5, 2.5 / (2.5 + 3 * 1.7))
    np.testing.assert_allclose(om, ref, rtol=1e-12)


def test_omega_normalization_fig2_eve():
    assert abs(1.0 - omega_coefficients(FIG2_EVE, 200).sum()) < 1e-6


def test_omega_nonnegative_and_prefix_stable():
    a = omega_coefficients(FIG2_BOB, 40)
    b = omega_coefficients(FIG2_BOB, 80)
    assert np.all(a >= 0)
    np.testing.assert_array_equal(a, b[:41])


def test_phi_single_branch_is_omega():
    om = omega_coefficients(FIG2_EVE, 60)
    np.testing.assert_allclose(phi_coefficients(om, 1), om, rtol=1e-15)


def test_phi_small_example():
    np.testing.assert_allclose(phi_coefficients([0.5, 0.3, 0.2], 2), [0.25, 0.30, 0.29], rtol=1e-14)


def test_phi_recursion_matches_convolution_when_stable():
    om = omega_coefficients(FIG2_BOB, 80)
    a = phi_coefficients(om, 3, method="convolution")
    b = phi_coefficients(om, 3, method="recursion")
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-18)


def test_phi_stays_a_probability_vector_for_tiny_omega0():
    # Rician K = 25: omega_0 ~ 1e-10, where the recursion diverges
    om = omega_coefficients(MftrParams(100, 1, 0.5, 25, 0.0), 300)
    ph = phi_coefficients(om, 3)
    assert np.all(ph >= 0)
    assert ph.sum() <= 1.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(
    w=st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=12),
    L=st.integers(1, 5),
)
def test_phi_equals_brute_force_convolution(w, L):
    w = np.asarray(w)
    ref = np.array([1.0])
    for _ in range(L):
        ref = np.convolve(ref, w)
    np.testing.assert_allclose(phi_coefficients(w, L), ref[: len(w)], rtol=1e-12, atol=1e-300)


def test_rho_and_nu():
    assert rho(FIG2_EVE, 10**0.8) == pytest.approx(0.42064, abs=5e-6)
    assert nu(0, FIG2_EVE, 3) == 6
    assert rho(MftrParams(1, 1, 0.5, 0.0), 7.5) == 7.5


def test_pdf_integrates_to_one_fig2_bob():
    link = LinkConfig.from_db(FIG2_BOB, 1, 10)
    c = build_cache(link, 50)
    tot = integrate.quad(lambda z: mrc_snr_pdf(link, c, z), 0, np.inf, limit=200)[0]
    assert abs(tot - 1.0) < 1e-6


def test_pdf_zero_at_origin_for_higher_shape():
    link = LinkConfig(FIG2_BOB, 2, 10.0)
    assert mrc_snr_pdf(link, build_cache(link, 20), 0.0) == 0.0


def test_rayleigh_reduction():
    link = LinkConfig(RAYLEIGH, 1, 6.0)
    c = build_cache(link, 50)
    z = np.linspace(0.0, 40.0, 41)
    np.testing.assert_allclose(mrc_snr_pdf(link, c, z), np.exp(-z / 6.0) / 6.0, atol=1e-4)


def test_rician_reduction():
    # very light shadowing with one cluster and Delta = 0 approaches Rician
    K, g = 4.0, 10.0
    link = LinkConfig(MftrParams(1e4, 1, 0.5, K, 0.0), 1, g)
    c = build_cache(link, 200)
    z = np.array([0.5, 3.0, 10.0, 25.0])
    s2 = g / (2 * (K + 1))
    ref = stats.ncx2.pdf(z / s2, 2, 2 * K) / s2
    np.testing.assert_allclose(mrc_snr_pdf(link, c, z), ref, rtol=2e-3)


def test_mrc_of_rayleigh_is_gamma():
    link = LinkConfig(MftrParams(1, 1, 0.5, 0.0), 3, 2.0)
    c = build_cache(link, 10)
    z = np.array([0.1, 1.0, 5.0, 20.0])
    np.testing.assert_allclose(mrc_snr_cdf(link, c, z), stats.gamma.cdf(z, 3, scale=2.0), rtol=1e-13)


def test_cdf_limits():
    link = LinkConfig.from_db(FIG2_EVE, 2, 8)
    c = build_cache(link, 300)
    assert mrc_snr_cdf(link, c, 0.0) == 0.0
    assert mrc_snr_cdf(link, c, 1e6) == pytest.approx(c.phi.sum(), rel=1e-14)


def test_cdf_is_integral_of_pdf():
    link = LinkConfig.from_db(FIG2_BOB, 2, 5)
    c = build_cache(link, 80)
    q = integrate.quad(lambda z: mrc_snr_pdf(link, c, z), 0, 7.0)[0]
    assert mrc_snr_cdf(link, c, 7.0) == pytest.approx(q, rel=1e-10)


def test_eve_eq_pdf_shift_and_identity():
    link = LinkConfig.from_db(FIG2_EVE, 1, 8)
    c = build_cache(link, 100)
    assert eve_eq_pdf(link, c, 1.0, 0.5) == 0.0
    z = np.array([0.3, 2.0, 9.0])
    np.testing.assert_allclose(eve_eq_pdf(link, c, 0.0, z), mrc_snr_pdf(link, c, z), rtol=1e-15)


def test_normalization_gap_flags_slow_series(caplog):
    assert normalization_gap(FIG2_BOB, 1, 200) < 1e-6
    with caplog.at_level("WARNING"):
        gap = normalization_gap(MftrParams(1, 2, 0.5, 6.5, 0.9), 2, 200)
    assert gap > 1e-6
    assert "sum to" in caplog.text


@pytest.mark.parametrize(
    "p",
    [
        MftrParams(3, 2, 0.5, 6.5, 0.9),
        MftrParams(0.7, 1, 0.5, 10.0, 1.0),
        MftrParams(100, 1, 0.5, 25.0, 0.0),
        MftrParams(2, 3, 1.2, 0.3, 0.5),
    ],
    ids=["fig2_eve", "equal_rays", "rician_k25", "weak_specular"],
)
def test_phase_average_matches_hypergeometric_sum(p):
    from mftr_secrecy.mftr import _log_omega, _log_omega_hypergeometric

    i = np.arange(250)
    a, b = _log_omega(p, i), _log_omega_hypergeometric(p, i)
    np.testing.assert_allclose(np.exp(a - b), 1.0, rtol=1e-10)
