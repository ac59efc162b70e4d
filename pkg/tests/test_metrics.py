import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mftr_secrecy.metrics import (
    AutoT,
    Caches,
    MetricResult,
    SecrecyScenario,
    afe_approx,
    afe_exact,
    ailr_approx,
    ailr_exact,
    gsop_approx,
    gsop_asymptotic,
    gsop_exact,
    gsop_expansion,
    phi_cdf_approx,
    phi_cdf_exact,
    sop_product_integral,
)
from mftr_secrecy.mftr import LinkConfig, MftrParams

BOB = MftrParams(4, 2, 0.5, 2.5, 0.8)
EVE = MftrParams(3, 2, 0.5, 6.5, 0.9)
RAYLEIGH = MftrParams(100, 1, 0.5, 1e-4, 0.0)
PURE_RAYLEIGH = MftrParams(1, 1, 0.5, 0.0, 0.0)

# Frozen from a direct quadrature of F_B(z(1+y)-1) f_E(y) at T=600
ANCHOR_A = 1.15989381275e-3
ANCHOR_B = 4.5616194e-6


def fig2(LB=1, LE=2, gb=30.0, ge=8.0, rs=1.0, theta=0.5):
    return SecrecyScenario(LinkConfig.from_db(BOB, LB, gb), LinkConfig.from_db(EVE, LE, ge), rs, theta)


def rayleigh(gb, ge, rs=1.0, theta=1.0):
    return SecrecyScenario(LinkConfig(PURE_RAYLEIGH, 1, gb), LinkConfig(PURE_RAYLEIGH, 1, ge), rs, theta)


def rayleigh_cdf(z, gb, ge):
    return 1.0 - gb / (gb + z * ge) * math.exp(-(z - 1.0) / gb)


@pytest.fixture(scope="module")
def anchor_a():
    sc = fig2()
    return sc, Caches.build(sc)


def test_scenario_validation():
    with pytest.raises(ValueError):
        fig2(theta=0.0)
    with pytest.raises(ValueError):
        fig2(rs=-1.0)
    with pytest.raises(ValueError):
        MetricResult(0.1, "guess")


def test_anchor_a_value(anchor_a):
    sc, caches = anchor_a
    r = gsop_exact(sc, caches)
    assert r.method == "exact"
    assert r.value == pytest.approx(ANCHOR_A, rel=1e-9)
    assert r.error_estimate < 1e-12


def test_anchor_b_value():
    r = gsop_exact(fig2(2, 4))
    assert r.value == pytest.approx(ANCHOR_B, rel=1e-7)


def test_fixed_small_truncation_undershoots():
    # T=50 drops ~20% of Eve's L=4 mixture mass; the error bound says so
    r = gsop_exact(fig2(1, 2), T=50)
    assert r.value < ANCHOR_A
    assert r.value + r.error_estimate >= ANCHOR_A


def test_error_estimate_is_a_bound():
    sc = fig2(2, 4)
    for T in (20, 50, 100, 200):
        r = gsop_exact(sc, T=T)
        assert abs(r.value - ANCHOR_B) <= r.error_estimate * (1 + 1e-9) + 1e-15


def test_autot_tolerance_controls_mass():
    caches = Caches.build(fig2(2, 4), AutoT(tol=1e-2))
    assert 1.0 - caches.eve.phi.sum() <= 5e-3
    assert caches.T < Caches.build(fig2(2, 4)).T


def test_expansion_route_matches(anchor_a):
    sc, caches = anchor_a
    assert abs(gsop_expansion(sc, caches) - gsop_exact(sc, caches).value) < 1e-10


@pytest.mark.parametrize("gb_db", [10, 20, 30, 40])
@pytest.mark.parametrize("ge_db", [0, 8, 15])
def test_rayleigh_closed_form(gb_db, ge_db):
    gb, ge = 10 ** (gb_db / 10), 10 ** (ge_db / 10)
    for theta in (0.3, 1.0):
        sc = rayleigh(gb, ge, 1.5, theta)
        ref = rayleigh_cdf(2.0 ** (1.5 * theta), gb, ge)
        assert gsop_exact(sc).value == pytest.approx(ref, rel=1e-10, abs=1e-15)


def test_rayleigh_approx_closed_form():
    sc = rayleigh(50.0, 4.0, 2.0)
    z = 4.0
    assert gsop_approx(sc).value == pytest.approx(z * 4.0 / (50.0 + z * 4.0), rel=1e-12)


def test_rayleigh_afe_matches_quadrature():
    gb, ge, rs = 20.0, 3.0, 2.0
    q = integrate.quad(lambda t: rayleigh_cdf(2.0 ** (t * rs), gb, ge), 0, 1, epsabs=1e-13)[0]
    sc = rayleigh(gb, ge, rs)
    assert afe_exact(sc).value == pytest.approx(1.0 - q, abs=1e-9)


def test_identical_links_symmetry():
    link = LinkConfig.from_db(EVE, 2, 8)
    sc = SecrecyScenario(link, link, 1.0, 1.0)
    caches = Caches.build(sc)
    assert phi_cdf_exact(sc, caches, 1.0) == pytest.approx(0.5, abs=1e-9)
    assert phi_cdf_approx(sc, caches, 1.0) == pytest.approx(0.5, abs=1e-9)


def test_phi_cdf_limits(anchor_a):
    sc, caches = anchor_a
    assert phi_cdf_exact(sc, caches, math.inf) == pytest.approx(1.0, abs=1e-9)
    assert phi_cdf_exact(sc, caches, 1e9) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        phi_cdf_exact(sc, caches, 0.5)


def test_phi_cdf_monotone(anchor_a):
    sc, caches = anchor_a
    vals = [phi_cdf_exact(sc, caches, z) for z in (1.0, 1.5, 3.0, 10.0, 100.0, 1e4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_sop_area_identity():
    sc = fig2(2, 2, 20, 8, theta=1.0)
    caches = Caches.build(sc)
    assert abs(gsop_exact(sc, caches).value - sop_product_integral(sc, caches).value) < 1e-6


def test_gsop_increases_with_theta():
    vals = [gsop_exact(fig2(1, 2, 20, theta=t)).value for t in (0.1, 0.5, 1.0)]
    assert vals[0] < vals[1] < vals[2]


def test_approx_scale_invariance():
    a = gsop_approx(fig2(2, 2, 25, 8)).value
    b = gsop_approx(fig2(2, 2, 45, 28)).value
    assert a == pytest.approx(b, rel=1e-10)


def test_approx_converges_to_exact():
    # scaling both SNRs up shrinks the gap between Phi and Psi_B/Psi_E
    gaps = []
    for shift in (0, 20):
        sc = fig2(1, 2, 30 + shift, 8 + shift)
        gaps.append(abs(gsop_approx(sc).value / gsop_exact(sc).value - 1))
    assert gaps[1] < gaps[0]
    assert gaps[1] < 0.05


def test_asymptote_funnel():
    rel = []
    for gb in (20, 30, 40, 50):
        sc = fig2(1, 2, gb)
        rel.append(abs(gsop_asymptotic(sc).value / gsop_exact(sc).value - 1))
    assert all(b < a for a, b in zip(rel, rel[1:]))
    assert rel[-1] < 1e-3


def test_asymptote_slope_is_diversity_order():
    lo = gsop_asymptotic(fig2(3, 2, 30)).value
    hi = gsop_asymptotic(fig2(3, 2, 40)).value
    assert math.log10(hi / lo) == pytest.approx(-6.0, rel=1e-12)


def test_ailr_identities(anchor_a):
    sc, caches = anchor_a
    sc = sc.with_(rs=2.0)
    assert ailr_exact(sc, caches).value == pytest.approx((1 - afe_exact(sc, caches).value) * 2.0, abs=1e-12)
    assert ailr_approx(sc, caches).value == pytest.approx((1 - afe_approx(sc, caches).value) * 2.0, abs=1e-12)


def test_afe_approx_matches_quadrature_of_approx_cdf():
    sc = fig2(2, 2, 15, 8, rs=1.5)
    caches = Caches.build(sc)
    q = integrate.quad(lambda t: phi_cdf_approx(sc, caches, 2.0 ** (t * 1.5)), 0, 1, epsabs=1e-12)[0]
    assert afe_approx(sc, caches).value == pytest.approx(1 - q, abs=1e-9)


def test_afe_small_rate_limit():
    sc = fig2(2, 2, 15, 8, rs=1e-4)
    caches = Caches.build(sc)
    assert afe_exact(sc, caches).value == pytest.approx(1 - phi_cdf_exact(sc, caches, 1.0), abs=1e-4)


def test_afe_grows_with_bob_snr():
    assert afe_exact(fig2(1, 2, 40)).value > afe_exact(fig2(1, 2, 10)).value


def test_afe_approx_tends_to_one():
    assert afe_approx(fig2(2, 2, 70, 0)).value > 1 - 1e-5


@settings(max_examples=15, deadline=None)
@given(
    gb=st.floats(0.0, 40.0),
    ge=st.floats(-5.0, 20.0),
    rs=st.floats(0.1, 4.0),
    theta=st.floats(0.05, 1.0),
)
def test_metric_ranges(gb, ge, rs, theta):
    sc = fig2(1, 2, gb, ge, rs, theta)
    caches = Caches.build(sc, 60)
    g = gsop_exact(sc, caches).value
    a = afe_approx(sc, caches).value
    assert 0.0 <= g <= 1.0
    assert 0.0 <= a <= 1.0 + 1e-12
    assert 0.0 <= ailr_approx(sc, caches).value <= rs + 1e-12
