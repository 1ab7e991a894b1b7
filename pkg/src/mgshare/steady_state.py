"""Direct equilibrium solve of the closed loop and steady-state property checks.

The equilibrium system is degenerate along two directions: uniform angle
shifts and uniform shifts of the dual variable. Both gauges are fixed here
(theta_1 = 0, sum of zeta pinned), leaving a square Newton system. The
solved state satisfies, among others:

* a common synchronization frequency, Omega_bar = (omega_syn - omega_nom) 1;
* lambda_bar = alpha_Q 1 with alpha_Q the mean utilization ratio;
* strict voltage containment;
* the sharing-accuracy identities/bounds for unsaturated/saturated units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import controller as ctrl
from .controller import IbrParams
from .errors import ConvergenceError
from .graph import CommGraph, laplacian
from .network import ReducedNetwork, jacobians, power_flow

__all__ = ["Equilibrium", "PropertyReport", "solve_equilibrium", "verify_properties"]


@dataclass(frozen=True)
class Equilibrium:
    """Solved steady state; all arrays length n, theta anchored at theta_1 = 0."""

    mode: str
    theta: np.ndarray
    Omega: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    zeta: np.ndarray
    V: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    omega_syn_dev: float          # omega_syn - omega_nom, rad/s
    alpha_P: float
    alpha_Q: float
    saturated: frozenset[int]     # 1-based unit ids with rho > 0
    residual: float

    @property
    def n(self) -> int:
        return self.theta.shape[0]


def _residual_proposed(x, net, L, p: IbrParams, zeta_sum):
    n = p.n
    theta = np.concatenate([[0.0], x[: n - 1]])
    c = x[n - 1]
    v = x[n: 2 * n]
    lam = x[2 * n: 3 * n]
    zeta = x[3 * n: 4 * n]
    V = ctrl.voltage_output(p, v)
    P, Q = power_flow(net, theta, V)
    q_ratio = Q / p.s_rated
    F = np.empty(4 * n)
    F[:n] = -c - p.m_omega * P / p.s_rated
    F[n: 2 * n] = ctrl.integrator_rhs(p, v, lam, Q)
    F[2 * n: 3 * n] = q_ratio - lam - L @ zeta - p.k * (L @ lam)
    Llam = L @ lam
    F[3 * n: 4 * n - 1] = Llam[: n - 1]
    F[4 * n - 1] = zeta.sum() - zeta_sum
    return F, theta, c, v, lam, zeta, V, P, Q


def _jacobian_proposed(x, net, L, p: IbrParams):
    """Analytic Jacobian of the proposed-mode residual."""
    n = p.n
    theta = np.concatenate([[0.0], x[: n - 1]])
    v = x[n: 2 * n]
    V = ctrl.voltage_output(p, v)
    lin = jacobians(net, theta, V)
    H = np.diag(1.0 / np.cosh(v / p.delta) ** 2)   # dV/dv
    dtanh = np.diag((1.0 / np.cosh(v / p.delta) ** 2))
    drho_v = np.diag(_d_rho_v(p, v))
    invS = np.diag(1.0 / p.s_rated)
    mS = np.diag(p.m_omega / p.s_rated)
    Vs = np.diag(p.v_star)

    J = np.zeros((4 * n, 4 * n))
    # F1 rows
    J[:n, : n - 1] = -(mS @ lin.J_theta_P)[:, 1:]
    J[:n, n - 1] = -1.0
    J[:n, n: 2 * n] = -(mS @ lin.J_V_P) @ H
    # F2 rows
    J[n: 2 * n, : n - 1] = -(Vs @ invS @ lin.J_theta_Q)[:, 1:]
    J[n: 2 * n, n: 2 * n] = -drho_v - p.beta * dtanh - (Vs @ invS @ lin.J_V_Q) @ H
    J[n: 2 * n, 2 * n: 3 * n] = Vs
    # F3 rows
    J[2 * n: 3 * n, : n - 1] = (invS @ lin.J_theta_Q)[:, 1:]
    J[2 * n: 3 * n, n: 2 * n] = (invS @ lin.J_V_Q) @ H
    J[2 * n: 3 * n, 2 * n: 3 * n] = -np.eye(n) - p.k * L
    J[2 * n: 3 * n, 3 * n: 4 * n] = -L
    # F4 rows
    J[3 * n: 4 * n - 1, 2 * n: 3 * n] = L[: n - 1, :]
    J[4 * n - 1, 3 * n: 4 * n] = 1.0
    return J


def _d_rho_v(p: IbrParams, v) -> np.ndarray:
    """One-sided derivative of rho(v) v, outward at the kink |v| = 3 Delta."""
    u = np.abs(v) / p.delta
    return np.where(u >= 3.0, 2.0 * u - 3.0, 0.0)


def _residual_droop(x, net, p: IbrParams):
    n = p.n
    theta = np.concatenate([[0.0], x[: n - 1]])
    c = x[n - 1]
    v = x[n: 2 * n]
    V = 1.0 + v
    P, Q = power_flow(net, theta, V)
    F = np.empty(2 * n)
    F[:n] = -c - p.m_omega * P / p.s_rated
    F[n:] = -v - p.m_v * Q / p.s_rated
    return F, theta, c, v, V, P, Q


def _jacobian_droop(x, net, p: IbrParams):
    n = p.n
    theta = np.concatenate([[0.0], x[: n - 1]])
    v = x[n: 2 * n]
    V = 1.0 + v
    lin = jacobians(net, theta, V)
    mS = np.diag(p.m_omega / p.s_rated)
    mvS = np.diag(p.m_v / p.s_rated)
    J = np.zeros((2 * n, 2 * n))
    J[:n, : n - 1] = -(mS @ lin.J_theta_P)[:, 1:]
    J[:n, n - 1] = -1.0
    J[:n, n:] = -(mS @ lin.J_V_P)
    J[n:, : n - 1] = -(mvS @ lin.J_theta_Q)[:, 1:]
    J[n:, n:] = -np.eye(n) - mvS @ lin.J_V_Q
    return J


def _newton(residual, jacobian, x0, tol=1e-11, max_iter=60, fd_jacobian=False):
    """Damped Newton with backtracking; retries from a perturbed point on stagnation."""
    rng = np.random.default_rng(0)
    x = np.asarray(x0, dtype=float).copy()
    norm = np.inf
    for _attempt in range(4):
        last_norm = np.inf
        for _ in range(max_iter):
            F = residual(x)
            norm = float(np.linalg.norm(F, np.inf))
            if norm < tol:
                return x, norm
            J = _fd_jac(residual, x) if fd_jacobian else jacobian(x)
            try:
                dx = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                raise ConvergenceError("singular Jacobian in equilibrium solve",
                                       residual=norm) from None
            step = 1.0
            norm_new = norm
            while step > 1e-6:
                norm_new = float(np.linalg.norm(residual(x + step * dx), np.inf))
                if norm_new < norm:
                    break
                step *= 0.5
            x = x + step * dx
            if norm_new > 0.999 * last_norm and norm_new > tol:
                break  # stagnating (e.g. at a leakage kink); retry perturbed
            last_norm = norm_new
        norm = float(np.linalg.norm(residual(x), np.inf))
        if norm < tol:
            return x, norm
        x = x + rng.normal(scale=1e-4, size=x.shape)
    raise ConvergenceError(
        f"Newton did not converge (last residual {norm:.3e})", residual=norm
    )


def _fd_jac(residual, x, h=1e-7):
    F0 = residual(x)
    J = np.empty((F0.size, x.size))
    for j in range(x.size):
        xp = x.copy()
        xp[j] += h
        J[:, j] = (residual(xp) - F0) / h
    return J


def solve_equilibrium(
    net: ReducedNetwork,
    g: CommGraph,
    params: IbrParams,
    initial_guess: np.ndarray | None = None,
    mode: str = "proposed",
    zeta_sum: float = 0.0,
    fd_jacobian: bool = False,
) -> Equilibrium:
    """Newton solve of the steady-state equations with both gauges fixed.

    ``initial_guess`` is a full state packing [theta_rel (n-1), Omega_common,
    v, lam, zeta] (proposed) or [theta_rel, Omega_common, v] (droop); the
    default is a flat start.
    """
    n = params.n
    L = laplacian(g)
    if mode == "proposed":
        dim = 4 * n
        x0 = np.zeros(dim) if initial_guess is None else np.asarray(initial_guess, float)

        def res(x):
            return _residual_proposed(x, net, L, params, zeta_sum)[0]

        x, norm = _newton(res, lambda x: _jacobian_proposed(x, net, L, params),
                          x0, fd_jacobian=fd_jacobian)
        _, theta, c, v, lam, zeta, V, P, Q = _residual_proposed(x, net, L, params, zeta_sum)
        rho = ctrl.leakage(params, v)
    elif mode == "droop":
        dim = 2 * n
        x0 = np.zeros(dim) if initial_guess is None else np.asarray(initial_guess, float)

        def res(x):
            return _residual_droop(x, net, params)[0]

        x, norm = _newton(res, lambda x: _jacobian_droop(x, net, params),
                          x0, fd_jacobian=fd_jacobian)
        _, theta, c, v, V, P, Q = _residual_droop(x, net, params)
        lam = np.zeros(n)
        zeta = np.zeros(n)
        rho = np.zeros(n)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    return Equilibrium(
        mode=mode,
        theta=theta,
        Omega=np.full(n, c),
        v=v,
        lam=lam,
        zeta=zeta,
        V=V,
        P=P,
        Q=Q,
        omega_syn_dev=float(c),
        alpha_P=float(np.mean(P / params.s_rated)),
        alpha_Q=float(np.mean(Q / params.s_rated)),
        saturated=frozenset(int(i) + 1 for i in np.nonzero(rho > 0)[0]),
        residual=float(norm),
    )


@dataclass(frozen=True)
class PropertyReport:
    """Numeric check of the four steady-state guarantees."""

    p_ratio_spread: float
    containment_margin_low: float
    containment_margin_high: float
    sharing_identity_error: np.ndarray    # unsaturated units: | |q_i - a_Q| - beta|1 - V/V*| |
    sharing_bound_slack: np.ndarray       # saturated units: bound - |q_i - a_Q| (>= -tol)
    unsaturated: tuple[int, ...]          # 1-based
    saturated: tuple[int, ...]            # 1-based
    tol: float

    @property
    def all_pass(self) -> bool:
        ok = self.p_ratio_spread <= self.tol * 10
        ok &= self.containment_margin_low > 0 and self.containment_margin_high > 0
        if self.sharing_identity_error.size:
            ok &= bool(np.max(self.sharing_identity_error) <= self.tol)
        if self.sharing_bound_slack.size:
            ok &= bool(np.min(self.sharing_bound_slack) >= -self.tol)
        return bool(ok)

    def lines(self):
        yield f"P-ratio spread            : {self.p_ratio_spread:.3e}"
        yield f"containment margin (low)  : {self.containment_margin_low:.6f}"
        yield f"containment margin (high) : {self.containment_margin_high:.6f}"
        yield f"unsaturated units         : {list(self.unsaturated)}"
        yield f"saturated units           : {list(self.saturated)}"
        if self.sharing_identity_error.size:
            yield f"sharing identity error    : {np.max(self.sharing_identity_error):.3e}"
        if self.sharing_bound_slack.size:
            yield f"sharing bound slack (min) : {np.min(self.sharing_bound_slack):.3e}"
        yield f"overall                   : {'PASS' if self.all_pass else 'FAIL'}"


def verify_properties(eq: Equilibrium, params: IbrParams, tol: float = 1e-6) -> PropertyReport:
    """Evaluate the four steady-state properties on a solved equilibrium."""
    q_ratio = eq.Q / params.s_rated
    p_ratio = eq.P / params.s_rated
    dev = np.abs(q_ratio - eq.alpha_Q)
    ref = params.beta * np.abs(1.0 - eq.V / params.v_star)
    rho = ctrl.leakage(params, eq.v)
    sat_mask = rho > 0
    bound = ref + rho * np.abs(eq.v / params.v_star)
    return PropertyReport(
        p_ratio_spread=float(p_ratio.max() - p_ratio.min()),
        containment_margin_low=float(np.min(eq.V - params.v_min)),
        containment_margin_high=float(np.min(params.v_max - eq.V)),
        sharing_identity_error=np.abs(dev[~sat_mask] - ref[~sat_mask]),
        sharing_bound_slack=bound[sat_mask] - dev[sat_mask],
        unsaturated=tuple(int(i) + 1 for i in np.nonzero(~sat_mask)[0]),
        saturated=tuple(int(i) + 1 for i in np.nonzero(sat_mask)[0]),
        tol=tol,
    )
