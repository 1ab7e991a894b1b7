"""Equilibrium solver: gauges, residuals, property verification."""

import numpy as np
import pytest

import mgshare as mg
from mgshare import controller as ctrl
from mgshare.graph import laplacian


def test_residual_small(lv5_equilibrium):
    assert lv5_equilibrium.residual <= 1e-10


def test_gauges_fixed(lv5_equilibrium):
    eq = lv5_equilibrium
    assert eq.theta[0] == 0.0
    assert abs(eq.zeta.sum()) <= 1e-10


def test_equilibrium_satisfies_dynamics(lv5, lv5_reduced, lv5_equilibrium):
    """Plug the solution back into every channel's right-hand side."""
    eq = lv5_equilibrium
    p = lv5.params
    L = laplacian(lv5.graph)
    P, Q = mg.power_flow(lv5_reduced, eq.theta, eq.V)
    assert np.allclose(P, eq.P, atol=1e-10) and np.allclose(Q, eq.Q, atol=1e-10)
    # frequency channel: common Omega with -Omega = m_omega P/S
    assert np.allclose(-eq.Omega - p.m_omega * P / p.s_rated, 0.0, atol=1e-9)
    # voltage integral channel
    assert np.allclose(ctrl.integrator_rhs(p, eq.v, eq.lam, Q), 0.0, atol=1e-9)
    # optimizer
    d_lam, d_zeta = ctrl.primal_dual_rhs(lv5.graph, p.k, eq.lam, eq.zeta, Q / p.s_rated)
    assert np.allclose(d_lam, 0.0, atol=1e-9)
    assert np.allclose(d_zeta, 0.0, atol=1e-9)


def test_lambda_equals_mean_ratio(lv5_equilibrium):
    """Dual consensus: every lambda entry equals the mean reactive ratio."""
    eq = lv5_equilibrium
    assert np.abs(eq.lam - eq.alpha_Q).max() <= 1e-8
    assert eq.lam.max() - eq.lam.min() <= 1e-8


def test_active_sharing_exact(lv5, lv5_equilibrium):
    p_ratio = lv5_equilibrium.P / lv5.params.s_rated
    assert p_ratio.max() - p_ratio.min() <= 1e-9


def test_strict_containment(lv5, lv5_equilibrium):
    eq = lv5_equilibrium
    assert np.all(eq.V > lv5.params.v_min) and np.all(eq.V < lv5.params.v_max)


def test_property_report_passes(lv5, lv5_equilibrium):
    report = mg.verify_properties(lv5_equilibrium, lv5.params)
    assert report.all_pass, "\n".join(report.lines())


def test_nominal_saturated_set(lv5_equilibrium):
    """Phasor-model outcome at nominal load, frozen as a regression value."""
    assert lv5_equilibrium.saturated == frozenset({1, 5})


def test_analytic_vs_fd_jacobian_newton(lv5, lv5_reduced, lv5_equilibrium):
    eq_fd = mg.solve_equilibrium(lv5_reduced, lv5.graph, lv5.params,
                                 mode="proposed", fd_jacobian=True)
    assert np.abs(eq_fd.V - lv5_equilibrium.V).max() <= 1e-8
    assert np.abs(eq_fd.lam - lv5_equilibrium.lam).max() <= 1e-8


def test_zeta_sum_pinning(lv5, lv5_reduced):
    eq = mg.solve_equilibrium(lv5_reduced, lv5.graph, lv5.params,
                              mode="proposed", zeta_sum=2.5)
    assert eq.zeta.sum() == pytest.approx(2.5, abs=1e-9)
    # physical outputs are invariant to the conserved quantity's value
    eq0 = mg.solve_equilibrium(lv5_reduced, lv5.graph, lv5.params, mode="proposed")
    assert np.abs(eq.V - eq0.V).max() <= 1e-8
    assert np.abs(eq.Q - eq0.Q).max() <= 1e-8


def test_droop_mode(lv5, lv5_reduced):
    eq = mg.solve_equilibrium(lv5_reduced, lv5.graph, lv5.params, mode="droop")
    assert eq.residual <= 1e-10
    # droop trades sharing accuracy for simplicity: ratios spread widely
    q_ratio = eq.Q / lv5.params.s_rated
    assert q_ratio.max() - q_ratio.min() > 1e-3
    # droop law holds at the fixed point: v = -m_V Q/S with V = 1 + v
    assert np.allclose(eq.v, -lv5.params.m_v * q_ratio, atol=1e-9)
    assert np.allclose(eq.V, 1.0 + eq.v, atol=1e-12)


def test_light_load_equilibrium_moves(lv5, lv5_equilibrium):
    scale = np.ones(5)
    scale[4] = 0.2
    red = mg.kron_reduce(lv5.network, scale)
    eq = mg.solve_equilibrium(red, lv5.graph, lv5.params, mode="proposed")
    assert eq.residual <= 1e-10
    assert np.abs(eq.V - lv5_equilibrium.V).max() > 1e-3
    assert len(eq.saturated) > 0


def test_unknown_mode_rejected(lv5, lv5_reduced):
    with pytest.raises(ValueError):
        mg.solve_equilibrium(lv5_reduced, lv5.graph, lv5.params, mode="magic")
