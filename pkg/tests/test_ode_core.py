"""Integrator tests against closed-form solutions.

With q = 0 the fundamental systems are trigonometric, which pins down the
initial conditions, the branch of rho, the Wronskian normalization, and the
log-scaling used for large |Im rho|.  A constant potential checks the
spectral-shift relation, and random complex spectral points exercise the
Hermite readout between grid nodes.
"""

import numpy as np
import pytest

from nonlocal_sl import Potential
from nonlocal_sl.errors import InputError, RangeError
from nonlocal_sl.ode_core import (
    GridSpec,
    SpectralPoint,
    fundamental_X,
    fundamental_Z,
    integrate_ivp,
    modulus_scale,
    principal_rho,
    wronskian,
)

TOL = 5e-9
T = np.pi


def _point(lam):
    return SpectralPoint(complex(lam), complex(principal_rho([lam])[0]))


def _true(trace, x):
    y, dy, _ = trace.value_at(x)
    s = np.exp(trace.log_scale)
    return y * s, dy * s


class TestPrincipalBranch:
    def test_positive_real_axis(self):
        rho = principal_rho([4.0, 9.0])
        assert np.allclose(rho, [2.0, 3.0])

    def test_negative_real_axis_maps_up(self):
        rho = principal_rho([-4.0])
        assert rho[0] == pytest.approx(2.0j)

    def test_upper_half_plane_always(self):
        rng = np.random.default_rng(7)
        lam = rng.normal(size=50) * 30 + 1j * rng.normal(size=50) * 10
        rho = principal_rho(lam)
        assert np.all(rho.imag >= 0)
        assert np.allclose(rho * rho, lam, rtol=1e-14)


class TestZeroPotentialClosedForms:
    def test_X_system(self):
        q = Potential.zero(T)
        probes = (0.0, 0.4, 1.1, T)
        for lam in (2.0, 17.3, -5.0, 3.0 + 4.0j):
            p = _point(lam)
            X1, X2 = fundamental_X(q, p, extra_required=[probes])
            for x in probes:
                y1, dy1 = _true(X1, x)
                y2, dy2 = _true(X2, x)
                assert y1 == pytest.approx(np.cos(p.rho * x), rel=1e-8, abs=TOL)
                assert dy1 == pytest.approx(-p.rho * np.sin(p.rho * x), rel=1e-8, abs=TOL * 10)
                assert y2 == pytest.approx(np.sin(p.rho * x) / p.rho, rel=1e-8, abs=TOL)
                assert dy2 == pytest.approx(np.cos(p.rho * x), rel=1e-8, abs=TOL)

    def test_Z_system_anchored_at_T(self):
        q = Potential.zero(T)
        p = _point(6.0 + 1.5j)
        Z1, Z2 = fundamental_Z(q, p)
        y1T, dy1T = _true(Z1, T)
        y2T, dy2T = _true(Z2, T)
        assert y1T == pytest.approx(1.0, abs=TOL) and dy1T == pytest.approx(0.0, abs=TOL)
        assert y2T == pytest.approx(0.0, abs=TOL) and dy2T == pytest.approx(1.0, abs=TOL)
        x = 0.9
        y2, _ = _true(Z2, x)
        assert y2 == pytest.approx(np.sin(p.rho * (x - T)) / p.rho, abs=TOL)

    def test_wronskian_is_one_everywhere(self):
        # keep Im rho moderate; the u v' - u' v cancellation grows like
        # eps * exp(2 Im(rho) x) and would dominate for strongly negative lam
        q = Potential.zero(T)
        probes = (0.0, 0.7, 2.2, T)
        for lam in (5.0, -2.0, 2.0 - 3.0j):
            p = _point(lam)
            X1, X2 = fundamental_X(q, p, extra_required=[probes])
            for x in probes:
                w = wronskian(X1, X2, x)
                assert not w.interpolated
                assert complex(w) == pytest.approx(1.0, abs=1e-8)

    def test_wronskian_flags_interpolated_readout(self):
        q = Potential.zero(T)
        X1, X2 = fundamental_X(q, _point(5.0))
        w = wronskian(X1, X2, 0.7001234)
        assert w.interpolated
        assert complex(w) == pytest.approx(1.0, abs=1e-5)


def test_constant_potential_shifts_lambda():
    c = 2.5
    q = Potential.from_cosine(T, [c])
    p = _point(9.0)
    p_shift = _point(9.0 - c)
    X1, X2 = fundamental_X(q, p)
    x = 1.7
    y1, _ = _true(X1, x)
    y2, _ = _true(X2, x)
    assert y1 == pytest.approx(np.cos(p_shift.rho * x), abs=TOL)
    assert y2 == pytest.approx(np.sin(p_shift.rho * x) / p_shift.rho, abs=TOL)


def test_log_scaled_growth_matches_cosh():
    # rho = 40i: cos(rho x) = cosh(40 x) overflows the plain representation
    q = Potential.zero(T)
    p = _point(-1600.0)
    X1, _ = fundamental_X(q, p)
    y, _, _ = X1.value_at(T)
    assert np.log(abs(y)) + X1.log_scale == pytest.approx(40.0 * T - np.log(2.0), abs=1e-8)


def test_hermite_readout_between_nodes():
    q = Potential.from_cosine(1.0, [1.0, 0.5])
    p = _point(30.0)
    X1, X2 = fundamental_X(q, p, extra_required=[[0.377]])
    yr, _, interp_r = X1.value_at(0.377)
    rng = np.random.default_rng(3)
    for x in rng.uniform(0.05, 0.95, size=5):
        ya, _, interp_a = X1.value_at(float(x))
        yb, _, _ = fundamental_X(q, p, extra_required=[[float(x)]])[0].value_at(float(x))
        assert ya == pytest.approx(yb, rel=1e-9, abs=1e-12)
    assert not interp_r  # requested points become grid nodes


def test_integrate_ivp_matches_fundamental_combination():
    q = Potential.from_cosine(T, [0.4, -0.3])
    p = _point(12.0 + 2.0j)
    a, b = 1.3 - 0.2j, 0.7j
    tr = integrate_ivp(q, p, 0.0, a, b)
    X1, X2 = fundamental_X(q, p)
    x = 2.4
    y, _ = _true(tr, x)
    y1, _ = _true(X1, x)
    y2, _ = _true(X2, x)
    assert y == pytest.approx(a * y1 + b * y2, rel=1e-9)


def test_tau_budget_guard():
    q = Potential.zero(T)
    p = _point(-4.0e6)  # rho = 2000i, tau * T far beyond the default budget
    with pytest.raises(RangeError):
        fundamental_X(q, p)


def test_budget_can_be_raised():
    q = Potential.zero(1.0)
    p = SpectralPoint(-640000.0, 800.0j)
    gs = GridSpec(tau_T_budget=900.0)
    X1, _ = fundamental_X(q, p, gs)
    y, _, _ = X1.value_at(1.0)
    assert np.log(abs(y)) + X1.log_scale == pytest.approx(800.0 - np.log(2.0), abs=1e-6)


def test_value_at_outside_domain_raises():
    q = Potential.zero(1.0)
    X1, _ = fundamental_X(q, _point(4.0))
    with pytest.raises(InputError):
        X1.value_at(1.5)


def test_modulus_scale_envelope():
    lam = np.array([100.0, -100.0, 9.0 + 40.0j])
    sc = modulus_scale(lam, 2.0)
    tau = principal_rho(lam).imag
    expected = np.sqrt(1.0 + np.abs(lam)) * np.exp(tau * 2.0)
    assert np.allclose(sc, expected, rtol=1e-12)
