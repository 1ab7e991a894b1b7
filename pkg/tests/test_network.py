"""Electrical network: per-unit conversion, Kron reduction, power flow, Jacobians."""

import numpy as np
import pytest

import mgshare as mg
from mgshare.network import full_admittance, jacobians, load_admittance

Z_BASE_LV = 220.0**2 / 100e3  # 0.484 ohm


# ---------------------------------------------------------------------------
# per-unit conversion
# ---------------------------------------------------------------------------

def test_per_unit_line_oracle(lv5):
    # 0.2 ohm / 0.484 ohm, hand-computed
    ln = lv5.network.lines[0]
    assert ln.from_bus == 1 and ln.to_bus == 2
    assert ln.r == pytest.approx(0.2 / Z_BASE_LV, abs=1e-9)
    assert ln.r == pytest.approx(0.41322, abs=1e-5)


def test_per_unit_connector_oracle(lv5):
    c = lv5.network.connectors[0]
    assert (c.r, c.x) == (pytest.approx(0.06198, abs=1e-5), pytest.approx(0.18595, abs=1e-5))


def test_per_unit_identity_when_already_pu():
    b = mg.Bases(1.0, 1.0, 50.0)
    data = mg.NetworkData(
        bases=b, n_bus=2,
        lines=(mg.Line(1, 2, 0.1, 0.2),),
        connectors=(mg.Connector(1, 1, 0.05, 0.1), mg.Connector(2, 2, 0.05, 0.1)),
        loads=(), impedance_unit="pu", load_unit="pu",
    )
    out = mg.to_per_unit(data)
    assert out.lines[0].r == 0.1 and out.lines[0].x == 0.2


def test_bad_base_rejected():
    with pytest.raises(Exception):
        mg.Bases(0.0, 220.0, 50.0)


# ---------------------------------------------------------------------------
# Kron reduction
# ---------------------------------------------------------------------------

def test_kron_two_ibr_series_oracle():
    """Two IBRs joined through junction buses: transfer magnitude y1 y2/(y1+y2)."""
    b = mg.Bases(1.0, 1.0, 50.0)
    data = mg.NetworkData(
        bases=b, n_bus=1,
        lines=(),
        connectors=(mg.Connector(1, 1, 0.0, 0.5), mg.Connector(2, 1, 0.0, 0.25)),
        loads=(), impedance_unit="pu", load_unit="pu",
    )
    red = mg.kron_reduce(data)
    y1, y2 = 1 / 0.5, 1 / 0.25
    expect = y1 * y2 / (y1 + y2)
    assert abs(complex(red.G[0, 1], red.B[0, 1])) == pytest.approx(expect, abs=1e-12)


def test_kron_load_scale_locality(lv5):
    """Scaling the bus-5 load changes the reduction only via that shunt: rebuild oracle."""
    scale = np.ones(5)
    scale[4] = 0.2
    red_a = mg.kron_reduce(lv5.network, scale)
    # independent oracle: rebuild full Y with modified shunt, Schur-complement
    # by hand (node order is [internal buses | main buses])
    Y = full_admittance(lv5.network, scale)
    n = lv5.network.n_ibr
    Yred = Y[:n, :n] - Y[:n, n:] @ np.linalg.solve(Y[n:, n:], Y[n:, :n])
    Yred = 0.5 * (Yred + Yred.T)
    assert np.allclose(red_a.G, Yred.real, atol=1e-12)
    assert np.allclose(red_a.B, Yred.imag, atol=1e-12)
    red_b = mg.kron_reduce(lv5.network)
    assert not np.allclose(red_a.B, red_b.B)


def test_reduced_symmetry_and_passivity(lv5_reduced):
    red = lv5_reduced
    assert np.allclose(red.G, red.G.T)
    assert np.allclose(red.B, red.B.T)
    assert np.linalg.eigvalsh(red.G).min() >= -1e-9


def test_load_admittance_draws_rated_power():
    y = load_admittance(0.9, 0.85)
    s = np.conj(y) * 1.0  # S = V^2 conj(y) at V = 1
    assert abs(s) == pytest.approx(0.9, abs=1e-12)
    assert s.real == pytest.approx(0.9 * 0.85, abs=1e-12)
    assert s.imag == pytest.approx(0.9 * np.sin(np.arccos(0.85)), abs=1e-12)


def test_isolated_island_rejected():
    b = mg.Bases(1.0, 1.0, 50.0)
    with pytest.raises(Exception):
        mg.NetworkData(
            bases=b, n_bus=2,
            lines=(),  # bus 2 unreachable
            connectors=(mg.Connector(1, 1, 0.0, 0.1),),
            loads=(), impedance_unit="pu", load_unit="pu",
        )


# ---------------------------------------------------------------------------
# power flow and Jacobians
# ---------------------------------------------------------------------------

def test_power_flow_against_nodal_oracle(lv5, lv5_reduced):
    """Reduced-network injections must match a direct complex nodal solve."""
    net = lv5.network
    n = net.n_ibr
    Y = full_admittance(net)  # node order [internal buses | main buses]
    rng = np.random.default_rng(1)
    for _ in range(5):
        theta = rng.normal(0, 0.05, n)
        V = 1 + rng.normal(0, 0.03, n)
        Vt = V * np.exp(1j * theta)
        Vb = np.linalg.solve(Y[n:, n:], -Y[n:, :n] @ Vt)
        S = Vt * np.conj(Y[:n, :n] @ Vt + Y[:n, n:] @ Vb)
        P, Q = mg.power_flow(lv5_reduced, theta, V)
        assert np.allclose(P, S.real, atol=1e-12)
        assert np.allclose(Q, S.imag, atol=1e-12)


def test_jacobian_rotational_invariance(lv5_reduced):
    rng = np.random.default_rng(7)
    theta = rng.normal(0, 0.1, 5)
    V = 1 + rng.normal(0, 0.05, 5)
    lin = jacobians(lv5_reduced, theta, V)
    assert np.linalg.norm(lin.J_theta_P @ np.ones(5)) <= 1e-9
    assert np.linalg.norm(lin.J_theta_Q @ np.ones(5)) <= 1e-9


def test_jacobians_match_finite_differences(lv5_reduced):
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(10):
        theta = rng.normal(0, 0.1, 5)
        V = 1 + rng.normal(0, 0.04, 5)
        lin = jacobians(lv5_reduced, theta, V)
        for k in range(5):
            e = np.zeros(5)
            e[k] = h
            Pp, Qp = mg.power_flow(lv5_reduced, theta + e, V)
            Pm, Qm = mg.power_flow(lv5_reduced, theta - e, V)
            assert np.allclose((Pp - Pm) / (2 * h), lin.J_theta_P[:, k], atol=1e-6)
            assert np.allclose((Qp - Qm) / (2 * h), lin.J_theta_Q[:, k], atol=1e-6)
            Pp, Qp = mg.power_flow(lv5_reduced, theta, V + e)
            Pm, Qm = mg.power_flow(lv5_reduced, theta, V - e)
            assert np.allclose((Pp - Pm) / (2 * h), lin.J_V_P[:, k], atol=1e-6)
            assert np.allclose((Qp - Qm) / (2 * h), lin.J_V_Q[:, k], atol=1e-6)


def test_linearized_predict_exact_at_point(lv5_reduced):
    theta = np.array([0.0, 0.01, -0.02, 0.03, 0.005])
    V = np.array([1.0, 0.98, 1.02, 0.99, 1.01])
    lin = jacobians(lv5_reduced, theta, V)
    P, Q = mg.power_flow(lv5_reduced, theta, V)
    Pp, Qp = lin.predict(theta, V)
    assert np.allclose(Pp, P, atol=1e-12)
    assert np.allclose(Qp, Q, atol=1e-12)
