"""Per-inverter control laws.

Two voltage-control modes exist:

* ``droop``: legacy proportional droop, V = V_nom + v with
  tau_v dv/dt = -v - m_V Q/S_rated.
* ``proposed``: tanh-saturated leaky integral controller
  V = V_star + Delta tanh(v/Delta), which keeps V strictly inside
  (V_min, V_max) for every finite integrator state, combined with a
  distributed primal-dual optimizer that drives the utilization ratios
  Q_i/S_i toward a common setpoint lambda.

All right-hand-side helpers return the *pre-tau* bracket; the caller
divides by the relevant time constant.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import CommGraph, laplacian

__all__ = [
    "IbrParams",
    "voltage_output",
    "leakage",
    "integrator_rhs",
    "droop_rhs",
    "primal_dual_rhs",
    "kkt_residual",
]

ATANH_CLIP = 0.999  # used when re-initializing v from a measured voltage


@dataclass(frozen=True)
class IbrParams:
    """Ratings, limits, and shared gains for a fleet of n inverters.

    Per-unit arrays of length n: ``s_rated``, ``m_omega``, ``m_v``,
    ``v_min``, ``v_max``. Scalars: time constants and the gains beta, k.
    """

    s_rated: np.ndarray
    m_omega: np.ndarray
    m_v: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    tau_omega: float
    tau_v: float
    tau_p: float
    tau_d: float
    beta: float
    k: float

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("s_rated", "m_omega", "m_v", "v_min", "v_max"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            if n is None:
                n = a.shape[0]
            elif a.shape == (1,):
                a = np.full(n, a[0])
            if a.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            a.setflags(write=False)
            arrays[name] = a
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        if np.any(self.s_rated <= 0):
            raise ValueError("s_rated must be positive")
        if np.any(self.v_min >= self.v_max):
            raise ValueError("need v_min < v_max for every unit")
        for name in ("tau_omega", "tau_v", "tau_p", "tau_d"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.k <= 0:
            raise ValueError("k must be positive")

    @property
    def n(self) -> int:
        return self.s_rated.shape[0]

    @property
    def v_star(self) -> np.ndarray:
        return 0.5 * (self.v_max + self.v_min)

    @property
    def delta(self) -> np.ndarray:
        return 0.5 * (self.v_max - self.v_min)

    def with_limits(self, v_min, v_max) -> "IbrParams":
        """Copy with new voltage limits (scalar broadcasts to all units)."""
        v_min = np.broadcast_to(np.asarray(v_min, dtype=float), (self.n,)).copy()
        v_max = np.broadcast_to(np.asarray(v_max, dtype=float), (self.n,)).copy()
        return replace(self, v_min=v_min, v_max=v_max)


def voltage_output(p: IbrParams, v):
    """Saturated voltage V = V_star + Delta tanh(v/Delta), strictly inside limits."""
    return p.v_star + p.delta * np.tanh(np.asarray(v, dtype=float) / p.delta)


def v_from_voltage(p: IbrParams, V) -> np.ndarray:
    """Integrator state whose output is (approximately) V; inverse of voltage_output.

    Voltages at or beyond the limits are clipped to +/-0.999 of the band
    before the atanh, so hand-offs (controller activation, limit shifts)
    keep the output voltage continuous without blowing up the state.
    """
    u = np.clip((np.asarray(V, dtype=float) - p.v_star) / p.delta, -ATANH_CLIP, ATANH_CLIP)
    return p.delta * np.arctanh(u)


def leakage(p: IbrParams, v) -> np.ndarray:
    """Anti-wind-up coefficient rho(v) = max(|v/Delta| - 3, 0), elementwise."""
    return np.maximum(np.abs(np.asarray(v, dtype=float) / p.delta) - 3.0, 0.0)


def integrator_rhs(p: IbrParams, v, lam, Q) -> np.ndarray:
    """Pre-tau_v bracket of the leaky integral channel.

    V_star (lam - Q/S) - beta Delta tanh(v/Delta) - rho(v) v.
    """
    v = np.asarray(v, dtype=float)
    return (
        p.v_star * (np.asarray(lam, dtype=float) - np.asarray(Q, dtype=float) / p.s_rated)
        - p.beta * p.delta * np.tanh(v / p.delta)
        - leakage(p, v) * v
    )


def droop_rhs(p: IbrParams, Omega, v, P, Q):
    """Pre-tau brackets of the primary droop channels.

    Returns (-Omega - m_omega P/S, -v - m_V Q/S); the proposed mode keeps
    only the frequency channel.
    """
    d_omega = -np.asarray(Omega, dtype=float) - p.m_omega * np.asarray(P, dtype=float) / p.s_rated
    d_v = -np.asarray(v, dtype=float) - p.m_v * np.asarray(Q, dtype=float) / p.s_rated
    return d_omega, d_v


def primal_dual_rhs(g: CommGraph, k: float, lam, zeta, q_ratio):
    """Pre-tau brackets of the distributed optimizer.

    tau_p dlam/dt = q_ratio - lam - L zeta - k L lam
    tau_d dzeta/dt = L lam
    """
    lam = np.asarray(lam, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    q_ratio = np.asarray(q_ratio, dtype=float)
    if lam.shape != (g.n,) or zeta.shape != (g.n,) or q_ratio.shape != (g.n,):
        raise ValueError(f"state vectors must have shape ({g.n},)")
    L = laplacian(g)
    d_lam = q_ratio - lam - L @ zeta - k * (L @ lam)
    d_zeta = L @ lam
    return d_lam, d_zeta


def kkt_residual(g: CommGraph, k: float, lam, zeta, q_ratio):
    """Stationarity and consensus residuals of the sharing problem's optimality system.

    Both vanish exactly at (and only at) the optimizer's equilibria.
    """
    lam = np.asarray(lam, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    q_ratio = np.asarray(q_ratio, dtype=float)
    L = laplacian(g)
    stationarity = lam - q_ratio + L @ zeta + k * (L @ lam)
    consensus = L @ lam
    return stationarity, consensus
