"""Controller primitives: saturation, leakage, channel right-hand sides."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mgshare as mg
from mgshare import controller as ctrl


def make_params(n=3, v_min=0.95, v_max=1.05, **kw):
    defaults = dict(
        s_rated=np.ones(n),
        m_omega=np.full(n, 1.57),
        m_v=np.full(n, 0.05),
        v_min=np.full(n, v_min),
        v_max=np.full(n, v_max),
        tau_omega=0.1, tau_v=1.0, tau_p=0.01, tau_d=0.1, beta=0.01, k=7.24,
    )
    defaults.update(kw)
    return mg.IbrParams(**defaults)


def test_v_star_and_delta():
    p = make_params()
    assert np.allclose(p.v_star, 1.0)
    assert np.allclose(p.delta, 0.05)


def test_voltage_output_midband_at_zero():
    p = make_params()
    assert np.allclose(ctrl.voltage_output(p, np.zeros(3)), 1.0)


@settings(max_examples=100, deadline=None)
@given(v=st.floats(-0.75, 0.75, allow_nan=False))
def test_strict_containment_everywhere(v):
    """The tanh-shaped output never reaches the limits on the reachable range.

    Beyond |v/Delta| ~ 17 double precision rounds V onto the limit itself, so
    strictness is only meaningful on states the leaky integrator can actually
    reach (leakage pins them near 3-6 Delta; 0.75 is 15 Delta here).
    """
    p = make_params(n=1)
    V = ctrl.voltage_output(p, np.array([v]))
    assert p.v_min[0] < V[0] < p.v_max[0]


def test_inverse_roundtrip_inside_band():
    p = make_params()
    v = np.array([-2.3, 0.0, 1.7]) * p.delta
    V = ctrl.voltage_output(p, v)
    assert np.allclose(ctrl.v_from_voltage(p, V), v, atol=1e-9)


def test_inverse_clips_out_of_band_voltages():
    p = make_params()
    v = ctrl.v_from_voltage(p, np.array([0.90, 1.0, 1.10]))
    assert np.all(np.isfinite(v))
    # clipped at 0.999 of the band half-width
    assert v[0] == pytest.approx(p.delta[0] * np.arctanh(-0.999))
    assert v[2] == pytest.approx(p.delta[2] * np.arctanh(0.999))


def test_leakage_kink_oracle():
    p = make_params(n=1)
    d = p.delta[0]
    assert ctrl.leakage(p, np.array([2.9 * d]))[0] == 0.0
    assert ctrl.leakage(p, np.array([3.0 * d]))[0] == 0.0
    assert ctrl.leakage(p, np.array([-4.0 * d]))[0] == pytest.approx(1.0)
    assert ctrl.leakage(p, np.array([5.5 * d]))[0] == pytest.approx(2.5)


def test_droop_rhs_oracle():
    p = make_params()
    Omega = np.array([0.1, 0.0, -0.2])
    v = np.array([0.01, 0.0, -0.01])
    P = np.array([0.5, 0.6, 0.7])
    Q = np.array([0.2, 0.3, 0.4])
    d_omega, d_v = ctrl.droop_rhs(p, Omega, v, P, Q)
    assert np.allclose(d_omega, -Omega - 1.57 * P)
    assert np.allclose(d_v, -v - 0.05 * Q)


def test_integrator_rhs_components():
    p = make_params(n=1)
    d = p.delta[0]
    # unsaturated: leakage term absent
    v = np.array([d])
    out = ctrl.integrator_rhs(p, v, np.array([0.4]), np.array([0.3]))
    expect = 1.0 * (0.4 - 0.3) - 0.01 * d * np.tanh(1.0)
    assert out[0] == pytest.approx(expect, abs=1e-12)
    # saturated: rho * v now active
    v = np.array([5.0 * d])
    out = ctrl.integrator_rhs(p, v, np.array([0.4]), np.array([0.3]))
    expect = 1.0 * (0.4 - 0.3) - 0.01 * d * np.tanh(5.0) - 2.0 * 5.0 * d
    assert out[0] == pytest.approx(expect, abs=1e-12)


def test_primal_dual_rhs_oracle():
    g = mg.CommGraph.ring(3)
    L = mg.laplacian(g)
    lam = np.array([0.3, 0.5, 0.1])
    zeta = np.array([0.0, 0.2, -0.2])
    q = np.array([0.4, 0.4, 0.4])
    d_lam, d_zeta = ctrl.primal_dual_rhs(g, 2.0, lam, zeta, q)
    assert np.allclose(d_lam, q - lam - L @ zeta - 2.0 * (L @ lam))
    assert np.allclose(d_zeta, L @ lam)


def test_kkt_zero_iff_consensus():
    g = mg.CommGraph.ring(4)
    q = np.array([0.5, 0.3, 0.6, 0.2])
    lam = np.full(4, q.mean())
    # consensus residual vanishes; stationarity fixes L zeta = q - mean
    r_stat, r_cons = ctrl.kkt_residual(g, 2.0, lam, np.zeros(4), q)
    assert np.allclose(r_cons, 0.0, atol=1e-12)
    L = mg.laplacian(g)
    zeta = np.linalg.lstsq(L, q - lam, rcond=None)[0]
    r_stat, r_cons = ctrl.kkt_residual(g, 2.0, lam, zeta, q)
    assert np.allclose(r_stat, 0.0, atol=1e-10)
    assert np.allclose(r_cons, 0.0, atol=1e-12)


def test_with_limits_preserves_gains():
    p = make_params()
    p2 = p.with_limits(np.full(3, 1.01), np.full(3, 1.05))
    assert np.allclose(p2.v_star, 1.03)
    assert np.allclose(p2.delta, 0.02)
    assert p2.tau_v == p.tau_v and p2.beta == p.beta


def test_bad_limits_rejected():
    with pytest.raises(Exception):
        make_params(v_min=1.05, v_max=0.95)
