import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from ris_ser.eig_dist import GainProfile, negative_moment
from ris_ser.exceptions import DomainError, InsufficientDataError, ValidityError
from ris_ser.monte_carlo import RunSpec, sample_reduced_z, ser_semi_analytic
from ris_ser.perf_analysis import (SerCurve, SnrSweep, alpha_psk, coding_gain_ratio,
                                   db_to_linear, diversity_coding_gain, estimate_diversity_slope,
                                   mgf_hypoexp, mgf_identical, mgf_spa, ser_asymptotic_identical,
                                   ser_asymptotic_spa, ser_curve, ser_mpsk, sin_power_integral,
                                   snr_at_ser)
from ris_ser.ris_model import (PAPER_LAW, OstbcScheme, RisConfig, amplitude, codebook,
                               get_scheme, reflection_gains)

G2, G3, G4 = (get_scheme(n) for n in ("G2", "G3", "G4"))
SISO = OstbcScheme("siso", 1, 1.0)


def mc_mgf(profile, nt, mu, trials=2 * 10 ** 6, seed=7):
    z = sample_reduced_z(RunSpec(seed, trials), profile, nt)
    v = np.exp(-mu * z)
    return v.mean(), v.std() / math.sqrt(z.size)


# --- MGFs -----------------------------------------------------------------

def test_mgf_normalization_at_origin():
    assert mgf_identical(1e-9, 16, 0.7, G2, 1.0) == pytest.approx(1.0, abs=1e-6)
    p = GainProfile.from_gains([0.3, 0.6, 0.9])
    assert mgf_hypoexp(1e-9, p, G3, 1.0) == pytest.approx(1.0, abs=1e-6)
    assert mgf_spa(1e-9, p, G3, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_mgf_identical_exponential_integral_form():
    # N = Nt = 1: e^{1/mu} E1(1/mu) / mu
    for mu in (1.0, 0.2, 30.0):
        ref = math.exp(1 / mu) * special.exp1(1 / mu) / mu
        assert mgf_identical(mu, 1, 1.0, SISO, 1.0) == pytest.approx(ref, rel=1e-11)


def test_mgf_identical_against_sampling():
    p = GainProfile.identical(4, 0.81)
    est, se = mc_mgf(p, 2, 10.0)
    assert mgf_identical(1.0, 4, 0.81, G2, 10.0) == pytest.approx(est, rel=0.01, abs=3 * se)


def test_mgf_hypoexp_against_double_quadrature():
    p = GainProfile.from_gains([1.0, 2.0])
    mu = 1.0

    def inner(lam):
        # E_V[exp(-mu lam V)], V ~ Gamma(2, 1)
        return (1 + mu * lam) ** -2.0

    ref = integrate.dblquad(lambda v, lam: (math.exp(-lam / 2) - math.exp(-lam))
                            * v * math.exp(-v) * math.exp(-mu * lam * v),
                            0, np.inf, 0, np.inf, epsabs=1e-13, epsrel=1e-11)[0]
    assert mgf_hypoexp(1.0, p, G2, mu) == pytest.approx(ref, rel=1e-8)
    single = integrate.quad(lambda lam: (math.exp(-lam / 2) - math.exp(-lam)) * inner(lam),
                            0, np.inf, epsrel=1e-12)[0]
    assert ref == pytest.approx(single, rel=1e-8)


def test_mgf_hypoexp_against_sampling():
    p = GainProfile.from_gains([1.0, 2.0, 4.0])
    est, se = mc_mgf(p, 2, 0.5)
    assert mgf_hypoexp(0.5, p, G2, 1.0) == pytest.approx(est, rel=0.01, abs=3 * se)


def test_mgf_hypoexp_survives_huge_branch_weights():
    # 100 uniform phases put many gains within 1e-5 of each other near zeta_min**2
    phases = np.random.default_rng(3).uniform(0.0, 2.0 * math.pi, 100)
    p = reflection_gains(RisConfig(phases), PAPER_LAW, eps_rate=1e-12)
    assert p.classification == "distinct"
    for s in (0.01, 1.0):
        assert mgf_hypoexp(s, p, G2, 1.0) == pytest.approx(mgf_spa(s, p, G2, 1.0), rel=1e-4)


@pytest.mark.parametrize("mu", [0.1, 1.0, 10.0, 100.0])
def test_mgf_spa_against_closed_forms(mu):
    ident = GainProfile.identical(16)
    assert mgf_spa(mu, ident, G2, 1.0) == pytest.approx(mgf_identical(mu, 16, 1.0, G2, 1.0),
                                                        rel=0.02)
    p = GainProfile.from_gains([1.0, 2.0])
    assert mgf_spa(mu, p, G2, 1.0) == pytest.approx(mgf_hypoexp(mu, p, G2, 1.0), rel=0.02)


@settings(max_examples=30, deadline=None)
@given(gains=st.lists(st.floats(0.1, 1.0), min_size=2, max_size=8, unique=True),
       s=st.floats(1e-3, 1e3), scheme=st.sampled_from([G2, G3, G4]))
def test_mgf_bounds_and_monotonicity(gains, s, scheme):
    p = GainProfile.from_gains(gains)
    for mgf in (lambda x: mgf_spa(x, p, scheme, 1.0),
                lambda x: mgf_identical(x, p.n, p.values[0], scheme, 1.0)):
        a, b = mgf(s), mgf(1.5 * s)
        assert 0.0 < a <= 1.0
        assert b <= a
    if p.classification == "distinct":
        a, b = mgf_hypoexp(s, p, scheme, 1.0), mgf_hypoexp(1.5 * s, p, scheme, 1.0)
        assert 0.0 < a <= 1.0 and b <= a * (1 + 1e-9)


# --- SER ---------------------------------------------------------------------

def test_alpha_and_constant_mgf():
    assert alpha_psk(2) == pytest.approx(2.0)
    for m in (2, 4, 8, 16):
        assert ser_mpsk(lambda s: 1.0, m) == pytest.approx((m - 1) / m, rel=1e-12)
    with pytest.raises(DomainError):
        alpha_psk(6)


def test_ser_mpsk_awgn_closed_form():
    # deterministic unit channel: MGF exp(-s gamma), BPSK -> Q(sqrt(2 gamma))
    gamma = 3.0
    assert ser_mpsk(lambda s: math.exp(-s * gamma), 2) == pytest.approx(
        0.5 * special.erfc(math.sqrt(gamma)), rel=1e-9)


def test_sin_power_integral():
    assert sin_power_integral(1, 2) == pytest.approx(math.pi / 4, rel=1e-12)
    assert sin_power_integral(2, 2) == pytest.approx(3 * math.pi / 16, rel=1e-12)
    for nt in (1, 3, 6):
        for m in (2, 8):
            assert 0.0 < sin_power_integral(nt, m) < math.pi


def test_bpsk_identical_curve_against_monte_carlo():
    gain = amplitude(PAPER_LAW, math.pi) ** 2
    p = GainProfile.identical(32, gain)
    snr = np.arange(-20.0, -4.0, 2.0)
    exact = ser_curve(p, G2, 2, snr, "exact")
    mc = ser_semi_analytic(RunSpec(3, 10 ** 6), p, G2, 2, db_to_linear(snr))
    keep = exact.ser >= 1e-5
    assert keep.sum() >= 4
    np.testing.assert_allclose(mc.ser[keep], exact.ser[keep], rtol=0.05)


def test_ser_monotone_and_bounded():
    p = reflection_gains(RisConfig(np.random.default_rng(2).uniform(0, 6.28, 10)), PAPER_LAW)
    for m in (2, 8):
        c = ser_curve(p, G3, m, np.arange(-10.0, 20.0, 2.0), "spa")
        assert np.all(c.ser > 0.0) and np.all(c.ser <= (m - 1) / m)
        assert np.all(np.diff(c.ser) <= 0.0)


def test_snr_sweep_validation():
    with pytest.raises(DomainError):
        SnrSweep([1.0, 1.0], G2)
    with pytest.raises(DomainError):
        SnrSweep.from_range(5.0, 1.0, 1.0, G2)
    assert SnrSweep.from_range(0.0, 1.0, 0.25, G2).snr_db.size == 5


# --- asymptotes ------------------------------------------------------------------

def test_asymptotic_identical_scaling_laws():
    a = ser_asymptotic_identical(100.0, 32, 1.0, G3, 2)
    assert ser_asymptotic_identical(200.0, 32, 1.0, G3, 2) == pytest.approx(a / 8)
    assert ser_asymptotic_identical(100.0, 32, 0.5, G3, 2) == pytest.approx(a * 0.5 ** -3)
    with pytest.raises(ValidityError):
        ser_asymptotic_identical(100.0, 4, 1.0, G2, 2)


def test_asymptote_matches_exact_at_low_ser():
    p = GainProfile.identical(32)
    f = lambda db: ser_curve(p, G2, 2, [db], "exact").ser[0]
    db = snr_at_ser(f, 1e-6, -20.0, 20.0)
    ratio = ser_asymptotic_identical(10 ** (db / 10), 32, 1.0, G2, 2) / 1e-6
    assert ratio == pytest.approx(1.0, abs=0.1)


def test_asymptotic_spa_agrees_with_identical():
    p = GainProfile.identical(40, 0.7)
    for g in (10.0, 1e3):
        assert ser_asymptotic_spa(g, p, G4, 4) == pytest.approx(
            ser_asymptotic_identical(g, 40, 0.7, G4, 4), rel=0.03)
    a = ser_asymptotic_spa(50.0, p, G2, 2)
    assert ser_asymptotic_spa(100.0, p, G2, 2) == pytest.approx(a / 4)


def test_asymptotic_spa_two_bit_profile():
    rng = np.random.default_rng(8)
    p = reflection_gains(RisConfig(codebook(2).phases[rng.integers(0, 4, 100)]), PAPER_LAW)
    f = lambda db: ser_curve(p, G2, 2, [db], "spa").ser[0]
    db = snr_at_ser(f, 1e-6, -30.0, 10.0)
    assert ser_asymptotic_spa(10 ** (db / 10), p, G2, 2) / 1e-6 == pytest.approx(1.0, abs=0.15)


def test_asymptote_tangency_is_monotone():
    p = GainProfile.identical(16)
    snr = np.arange(-10.0, 20.0, 3.0)
    exact = ser_curve(p, G2, 2, snr, "exact").ser
    asym = ser_asymptotic_identical(db_to_linear(snr), 16, 1.0, G2, 2)
    ratio = asym / exact
    assert np.all(np.diff(np.abs(ratio - 1.0)) < 0.0)
    assert abs(ratio[-1] - 1.0) < 0.02


# --- gains -------------------------------------------------------------------

def test_diversity_and_coding_gain():
    p = GainProfile.from_gains(np.linspace(0.6, 1.0, 20))
    assert diversity_coding_gain(p, G4, 2)[0] == 4
    # closed form for identical unit gains against the negative-moment form
    ident = GainProfile.identical(20)
    gc_closed = diversity_coding_gain(ident, G2, 2)[1]
    moment = negative_moment(ident, 2)
    gc_moment = alpha_psk(2) / 2 * (sin_power_integral(2, 2) / math.pi * moment) ** -0.5
    assert gc_closed == pytest.approx(gc_moment, rel=1e-6)
    # below N > Nt + 2 the negative-moment form is used
    assert diversity_coding_gain(GainProfile.identical(4), G2, 2)[1] > 0.0


def test_coding_gain_increases_with_gains():
    rng = np.random.default_rng(4)
    for _ in range(10):
        g = rng.uniform(0.3, 0.9, 15)
        lo = GainProfile.from_gains(g)
        hi = GainProfile.from_gains(g * rng.uniform(1.0, 1.1, 15))
        assert diversity_coding_gain(hi, G3, 2)[1] > diversity_coding_gain(lo, G3, 2)[1]


def test_coding_gain_ratio():
    assert coding_gain_ratio(GainProfile.identical(30), G2) == pytest.approx(1.0, abs=1e-6)
    assert coding_gain_ratio(GainProfile.identical(30, 0.64), G3) == pytest.approx(0.8 ** 6,
                                                                                   rel=1e-6)
    rng = np.random.default_rng(9)
    for _ in range(10):
        p = GainProfile.from_gains(rng.uniform(0.05, 1.0, 12))
        assert coding_gain_ratio(p, G2) <= 1.0 + 1e-6


# --- diversity slope ----------------------------------------------------------------

@pytest.mark.parametrize("scale,order", [(1.0, 2), (5.0, 4)])
def test_slope_of_power_law(scale, order):
    snr = np.arange(0.0, 60.0, 0.5)
    c = SerCurve(snr, scale * db_to_linear(snr) ** -order, "asymptotic")
    assert estimate_diversity_slope(c) == pytest.approx(order, abs=0.01)


def test_slope_needs_points():
    c = SerCurve(np.array([0.0, 1.0]), np.array([1e-4, 5e-5]), "spa")
    with pytest.raises(InsufficientDataError):
        estimate_diversity_slope(c)


def test_slope_of_exact_g3_curve():
    c = ser_curve(GainProfile.identical(32), G3, 2, np.arange(-20.0, 8.0, 1.0), "exact")
    assert estimate_diversity_slope(c) == pytest.approx(3.0, abs=0.3)


def test_quadrupling_elements_gives_six_db():
    target = 1e-4

    def crossing(n):
        p = GainProfile.identical(n)
        return snr_at_ser(lambda db: ser_curve(p, G2, 2, [db], "exact").ser[0], target,
                          -40.0, 20.0)

    assert crossing(32) - crossing(128) == pytest.approx(6.0, abs=0.5)
