import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from serrin.errors import DomainError, HorizonError
from serrin.moduli import vartheta
from serrin.ode_core import GridSpec, ModelParams, band_params, boundary_profile, omega_field, ring_params, solve_coeffs

# mpmath.odefun (Taylor, 25 digits) on the coefficient system, zeros via findroot
XB_PLUS_N2_TAU1 = 1.9028523017926921004
XB_PLUS_N3_TAU05 = 1.7033733871612868458
XA_PLUS_N3_TAU05 = 6.6523408724967232985
ALPHA1_N3_TAU05 = 0.013697610653639073755
BETA1_N3_TAU05 = 0.94418113350169684552


@pytest.fixture(scope="module")
def cp35():
    return solve_coeffs(ring_params(3, 0.5))


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams("ring", eta=1.0, tau=0.0)
    with pytest.raises(DomainError):
        ModelParams("ring", eta=-1.0, tau=0.5)
    with pytest.raises(DomainError):
        ModelParams("ring", eta=1.0, tau=0.5, s=0.3)
    with pytest.raises(DomainError):
        ModelParams("disk", eta=1.0, tau=0.5)
    with pytest.raises(DomainError):
        ring_params(1, 0.5)


def test_kappa1_closed_form():
    p = ring_params(3, 0.5)
    assert p.kappa1 == pytest.approx(p.eta * p.tau**2 / 4, abs=1e-15)
    assert band_params(0.5).kappa1 == 0.0
    assert band_params(0.5).kappa2 == -1.0


def test_zeros_against_taylor_oracle(cp35):
    assert cp35.x_b_plus == pytest.approx(XB_PLUS_N3_TAU05, abs=1e-10)
    assert cp35.x_a_plus == pytest.approx(XA_PLUS_N3_TAU05, abs=1e-10)
    assert float(cp35.alpha(1.0)) == pytest.approx(ALPHA1_N3_TAU05, abs=1e-12)
    assert float(cp35.beta(1.0)) == pytest.approx(BETA1_N3_TAU05, abs=1e-12)


def test_zero_ordering(cp35):
    z = cp35.zeros
    assert z["x_a_minus"] < z["x_b_minus"] < 0 < z["x_b_plus"] < z["x_a_plus"]


def test_tau_one_ring_zeros():
    cp = solve_coeffs(ring_params(2, 1.0))
    assert cp.x_b_minus == -math.inf
    assert cp.x_a_minus == -math.inf and cp.x_a_plus == math.inf
    assert cp.x_b_plus == pytest.approx(XB_PLUS_N2_TAU1, abs=1e-10)


def test_band_tau_one_alpha_is_tanh():
    cp = solve_coeffs(band_params(1.0))
    x = np.linspace(-5, 5, 101)
    assert np.max(np.abs(cp.alpha(x) - np.tanh(x))) < 1e-9


def test_first_integrals_conserved(cp35):
    x = np.linspace(cp35.x_b_minus * 0.99, cp35.x_a_plus * 0.99, 500)
    r1, r2 = cp35.kappa_drift(x)
    assert r1 < 1e-9 and r2 < 1e-9


@given(st.floats(0.05, 0.95), st.integers(2, 5))
def test_first_integrals_random_moduli(tau, n):
    cp = solve_coeffs(ring_params(n, tau))
    x = np.linspace(cp.x_lo, cp.x_hi, 200)
    assert max(cp.kappa_drift(x)) < 1e-8


def test_state_outside_range_raises(cp35):
    with pytest.raises(HorizonError):
        cp35.state(cp35.x_hi + 1.0)


def test_profile_constant_at_tau_one():
    p = ring_params(3, 1.0)
    Z = boundary_profile(p, 5.0).Z(np.linspace(-5, 5, 11))
    assert np.ptp(Z) < 1e-12
    assert Z[0] == pytest.approx(2 / p.eta, abs=1e-12)
    Zb = boundary_profile(band_params(1.0), 5.0).Z(np.linspace(-5, 5, 11))
    assert np.max(np.abs(Zb - 1)) < 1e-12


def test_profile_oscillates_between_cubic_roots():
    p = ring_params(3, 0.5)
    th = vartheta(p.eta, 0.5)
    Z = boundary_profile(p, 2 * th).Z(np.linspace(0, 2 * th, 4001))
    lo, hi = p.profile_range()
    assert Z.min() == pytest.approx(lo, abs=1e-10)
    assert Z.max() == pytest.approx(hi, abs=1e-10)
    assert np.max(np.abs(np.polyval(p.profile_cubic(), np.array([lo, hi])))) < 1e-12


def test_profile_half_period_symmetry():
    p = ring_params(3, 0.5)
    th = vartheta(p.eta, 0.5)
    y = np.linspace(0, th, 51)
    prof = boundary_profile(p, 2 * th, -th)
    assert np.max(np.abs(prof.Z(y) - prof.Z(-y))) < 1e-11
    assert np.max(np.abs(prof.Z(th + y) - prof.Z(th - y))) < 1e-10


def test_strip_field_identity(cp35):
    p = cp35.params
    th = vartheta(p.eta, 0.5)
    grid = GridSpec.uniform(-2.0, 2.0, -th, th, 41, 81)
    fld = omega_field(p, cp35, grid)
    assert fld.identity_residual() < 1e-7
    assert np.max(np.abs(fld.omega - fld.omega[:, ::-1])) < 1e-10


def test_strip_field_rejects_grid_outside_strip(cp35):
    grid = GridSpec.uniform(-2.0, cp35.x_a_plus + 0.1, -1, 1, 11, 11)
    with pytest.raises(DomainError):
        omega_field(cp35.params, cp35, grid)


def test_grid_minimum_size():
    with pytest.raises(DomainError):
        GridSpec.uniform(0, 1, 0, 1, 3, 10)
