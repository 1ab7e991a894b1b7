"""Closed-loop time-domain simulation.

Integrates the compact closed loop (angle/frequency droop, voltage channel,
primal-dual optimizer) over a scenario timeline with events: controller
activation, load steps, and voltage-limit changes. Angles evolve in a frame
rotating at omega_nom, so theta is the deviation angle and the state stays
bounded. Events restart the integration at their exact timestamps; a no-op
event (e.g. scaling a load by its current factor) is skipped so it cannot
perturb the trajectory.

Output is sampled on a fixed grid by dense interpolation, independent of the
adaptive steps; containment of the saturated voltages is asserted on every
accepted integrator step, not just on output samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import controller as ctrl
from .controller import IbrParams
from .errors import ScenarioFormatError, SimulationError
from .graph import CommGraph, laplacian
from .network import NetworkData, ReducedNetwork, kron_reduce, power_flow

__all__ = [
    "Event",
    "Scenario",
    "TimeSeries",
    "simulate",
    "detect_saturated_set",
    "sharing_error",
    "CSV_HEADER",
]

CSV_HEADER = [
    "t", "ibr", "theta", "omega_dev", "f", "v", "lambda", "zeta",
    "V", "P", "Q", "P_ratio", "Q_ratio", "rho",
]


@dataclass(frozen=True)
class Event:
    """Timeline event; ``kind`` is 'activate', 'scale-load', or 'set-limits'.

    ``scale-load`` carries (bus, factor) with factor relative to the nominal
    load; ``set-limits`` carries (v_min, v_max) and an optional 1-based
    ``ibr`` (None applies to all units).
    """

    time: float
    kind: str
    bus: int | None = None
    factor: float | None = None
    v_min: float | None = None
    v_max: float | None = None
    ibr: int | None = None

    def __post_init__(self):
        if self.kind not in ("activate", "scale-load", "set-limits"):
            raise ScenarioFormatError(f"unknown event kind {self.kind!r}")
        if self.kind == "scale-load" and (self.bus is None or self.factor is None):
            raise ScenarioFormatError("scale-load event needs bus and factor")
        if self.kind == "set-limits" and (self.v_min is None or self.v_max is None):
            raise ScenarioFormatError("set-limits event needs v_min and v_max")


@dataclass(frozen=True)
class Scenario:
    """Everything one simulation run needs."""

    network: NetworkData          # per-unit
    graph: CommGraph
    params: IbrParams
    t_end: float
    events: tuple[Event, ...] = ()
    initial_mode: str = "droop"
    rel_tol: float = 1e-7
    sample_ms: float = 10.0
    initial_theta: np.ndarray | None = None
    initial_state: np.ndarray | None = None   # full state for initial_mode
    name: str = "scenario"
    out_dir: str = "out"

    def __post_init__(self):
        if self.initial_mode not in ("droop", "proposed"):
            raise ScenarioFormatError(f"unknown mode {self.initial_mode!r}")
        if self.t_end <= 0:
            raise ScenarioFormatError("t_end must be positive")
        times = [e.time for e in self.events]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ScenarioFormatError("event times must be strictly increasing")
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ScenarioFormatError("event times must lie within [0, t_end]")
        n = self.network.n_ibr
        if self.graph.n != n or self.params.n != n:
            raise ScenarioFormatError(
                f"graph ({self.graph.n}) and params ({self.params.n}) must match "
                f"the {n} inverters in the network"
            )
        for e in self.events:
            if e.kind == "scale-load" and not (1 <= e.bus <= self.network.n_bus):
                raise ScenarioFormatError(f"event at t={e.time}: unknown bus {e.bus}")
            if e.kind == "set-limits" and e.ibr is not None and not (1 <= e.ibr <= n):
                raise ScenarioFormatError(f"event at t={e.time}: unknown IBR {e.ibr}")


@dataclass
class TimeSeries:
    """Sampled trajectory; all channel arrays are (n_samples, n_ibr)."""

    t: np.ndarray
    mode: np.ndarray              # 0 = droop, 1 = proposed, per sample
    theta: np.ndarray
    omega_dev: np.ndarray
    f: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    zeta: np.ndarray
    V: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    p_ratio: np.ndarray
    q_ratio: np.ndarray
    rho: np.ndarray
    v_min: np.ndarray             # active limits per sample
    v_max: np.ndarray
    segment_starts: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.theta.shape[1]

    def index_at(self, t: float) -> int:
        if not (self.t[0] <= t <= self.t[-1]):
            raise ValueError(f"t={t} outside the simulated range")
        return int(np.argmin(np.abs(self.t - t)))

    def window(self, t0: float, t1: float) -> np.ndarray:
        return np.nonzero((self.t >= t0) & (self.t <= t1))[0]

    def to_csv(self, path):
        """Long-format CSV, one row per (sample, inverter), 1-based inverter ids."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for s in range(self.t.shape[0]):
                for i in range(self.n):
                    w.writerow([
                        _fmt(self.t[s]), i + 1,
                        _fmt(self.theta[s, i]), _fmt(self.omega_dev[s, i]),
                        _fmt(self.f[s, i]), _fmt(self.v[s, i]),
                        _fmt(self.lam[s, i]), _fmt(self.zeta[s, i]),
                        _fmt(self.V[s, i]), _fmt(self.P[s, i]), _fmt(self.Q[s, i]),
                        _fmt(self.p_ratio[s, i]), _fmt(self.q_ratio[s, i]),
                        _fmt(self.rho[s, i]),
                    ])


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def _droop_rhs(params: IbrParams, red: ReducedNetwork):
    """State [theta, Omega, v], legacy droop on both channels."""
    n = params.n

    def rhs(_t, x):
        theta, Omega, v = x[:n], x[n:2 * n], x[2 * n:]
        V = 1.0 + v
        P, Q = power_flow(red, theta, V)
        d_omega, d_v = ctrl.droop_rhs(params, Omega, v, P, Q)
        return np.concatenate([Omega, d_omega / params.tau_omega, d_v / params.tau_v])

    return rhs


def _proposed_rhs(params: IbrParams, red: ReducedNetwork, L: np.ndarray):
    """State [theta, Omega, v, lambda, zeta]."""
    n = params.n

    def rhs(_t, x):
        theta = x[:n]
        Omega = x[n:2 * n]
        v = x[2 * n:3 * n]
        lam = x[3 * n:4 * n]
        zeta = x[4 * n:]
        V = ctrl.voltage_output(params, v)
        P, Q = power_flow(red, theta, V)
        q_ratio = Q / params.s_rated
        d_omega = (-Omega - params.m_omega * P / params.s_rated) / params.tau_omega
        d_v = ctrl.integrator_rhs(params, v, lam, Q) / params.tau_v
        d_lam = (q_ratio - lam - L @ zeta - params.k * (L @ lam)) / params.tau_p
        d_zeta = (L @ lam) / params.tau_d
        return np.concatenate([Omega, d_omega, d_v, d_lam, d_zeta])

    return rhs


# ---------------------------------------------------------------------------
# simulation driver
# ---------------------------------------------------------------------------

def simulate(s: Scenario) -> TimeSeries:
    """Run the scenario and return the sampled trajectory."""
    n = s.network.n_ibr
    nb = s.network.n_bus
    dt = s.sample_ms / 1000.0
    n_samples = int(round(s.t_end / dt)) + 1
    t_grid = np.arange(n_samples) * dt

    # mutable run state
    mode = s.initial_mode
    params = s.params
    load_scale = np.ones(nb)
    red_cache: dict[tuple, ReducedNetwork] = {}

    def reduced() -> ReducedNetwork:
        key = tuple(load_scale)
        if key not in red_cache:
            try:
                red_cache[key] = kron_reduce(s.network, load_scale)
            except Exception as exc:
                raise SimulationError(f"network re-reduction failed: {exc}") from exc
        return red_cache[key]

    L = laplacian(s.graph)
    if s.initial_state is not None:
        x = np.asarray(s.initial_state, float)
        dim = 3 * n if mode == "droop" else 5 * n
        if x.shape != (dim,):
            raise ScenarioFormatError(
                f"initial_state must have {dim} entries for {mode} mode, got {x.shape}"
            )
    else:
        theta0 = np.zeros(n) if s.initial_theta is None else np.asarray(s.initial_theta, float)
        x = np.concatenate([theta0, np.zeros(2 * n if mode == "droop" else 4 * n)])

    out: dict[str, list] = {key: [] for key in (
        "mode", "theta", "omega_dev", "f", "v", "lam", "zeta",
        "V", "P", "Q", "p_ratio", "q_ratio", "rho", "v_min", "v_max",
    )}
    segment_starts = [0.0]

    pending = list(s.events)
    t_now = 0.0
    emitted = 0
    while t_now < s.t_end:
        # apply any due events, then drop upcoming no-ops so they cannot
        # force an integrator restart
        while pending and (
            pending[0].time <= t_now
            or not _event_changes(pending[0], mode, params, load_scale)
        ):
            ev = pending.pop(0)
            if not _event_changes(ev, mode, params, load_scale):
                continue
            mode, params, load_scale, x = _apply_event(
                ev, mode, params, load_scale, x, reduced()
            )
            if ev.time > 0:
                segment_starts.append(ev.time)
        t_next = min((e.time for e in pending), default=s.t_end)
        red = reduced()
        rhs = _droop_rhs(params, red) if mode == "droop" else _proposed_rhs(params, red, L)
        sol = solve_ivp(
            rhs, (t_now, t_next), x, method="RK45",
            rtol=s.rel_tol, atol=1e-10, dense_output=True,
        )
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise SimulationError(
                f"integration failed near t={sol.t[-1]:.6g}: {sol.message}",
                time=float(sol.t[-1]),
            )
        _check_containment(mode, params, sol)

        # samples in [t_now, t_next), plus the final point at t_end
        last = t_next >= s.t_end
        hi = n_samples if last else int(np.searchsorted(t_grid, t_next - 1e-12, "right"))
        seg_t = t_grid[emitted:hi]
        if seg_t.size:
            X = sol.sol(seg_t).T
            _emit(out, mode, params, red, X, s.network.bases.f_nom)
            emitted = hi
        x = sol.y[:, -1]
        t_now = t_next

    ts = TimeSeries(
        t=t_grid,
        mode=np.asarray(out["mode"], dtype=int),
        theta=np.vstack(out["theta"]),
        omega_dev=np.vstack(out["omega_dev"]),
        f=np.vstack(out["f"]),
        v=np.vstack(out["v"]),
        lam=np.vstack(out["lam"]),
        zeta=np.vstack(out["zeta"]),
        V=np.vstack(out["V"]),
        P=np.vstack(out["P"]),
        Q=np.vstack(out["Q"]),
        p_ratio=np.vstack(out["p_ratio"]),
        q_ratio=np.vstack(out["q_ratio"]),
        rho=np.vstack(out["rho"]),
        v_min=np.vstack(out["v_min"]),
        v_max=np.vstack(out["v_max"]),
        segment_starts=segment_starts,
    )
    return ts


def _event_limits(ev: Event, params: IbrParams):
    v_min = params.v_min.copy()
    v_max = params.v_max.copy()
    idx = slice(None) if ev.ibr is None else ev.ibr - 1
    v_min[idx] = ev.v_min
    v_max[idx] = ev.v_max
    return v_min, v_max


def _event_changes(ev: Event, mode, params: IbrParams, load_scale) -> bool:
    """Whether applying the event would alter the run state (state-independent)."""
    if ev.kind == "activate":
        return mode != "proposed"
    if ev.kind == "scale-load":
        return load_scale[ev.bus - 1] != ev.factor
    v_min, v_max = _event_limits(ev, params)
    return not (np.array_equal(v_min, params.v_min) and np.array_equal(v_max, params.v_max))


def _apply_event(ev: Event, mode, params, load_scale, x, red):
    """Apply one effective event; returns (mode, params, load_scale, x)."""
    n = params.n
    if ev.kind == "activate":
        theta, Omega, v_droop = x[:n], x[n:2 * n], x[2 * n:3 * n]
        V_now = 1.0 + v_droop
        _, Q = power_flow(red, theta, V_now)
        v_new = ctrl.v_from_voltage(params, V_now)
        lam0 = Q / params.s_rated
        zeta0 = np.zeros(n)
        x_new = np.concatenate([theta, Omega, v_new, lam0, zeta0])
        return "proposed", params, load_scale, x_new
    if ev.kind == "scale-load":
        new_scale = load_scale.copy()
        new_scale[ev.bus - 1] = ev.factor
        return mode, params, new_scale, x
    v_min, v_max = _event_limits(ev, params)
    new_params = params.with_limits(v_min, v_max)
    if mode == "proposed":
        x = x.copy()
        V_now = ctrl.voltage_output(params, x[2 * n:3 * n])
        x[2 * n:3 * n] = ctrl.v_from_voltage(new_params, V_now)
    return mode, new_params, load_scale, x


def _check_containment(mode, params, sol):
    """Hard containment on every accepted step (proposed mode only)."""
    if mode != "proposed":
        return
    n = params.n
    v = sol.y[2 * n:3 * n, :]
    V = params.v_star[:, None] + params.delta[:, None] * np.tanh(v / params.delta[:, None])
    lo = params.v_min[:, None]
    hi = params.v_max[:, None]
    if np.any(V <= lo) or np.any(V >= hi):
        step = int(np.argmax(np.any((V <= lo) | (V >= hi), axis=0)))
        raise SimulationError(
            f"voltage left the open limit band at t={sol.t[step]:.6g}",
            time=float(sol.t[step]),
        )


def _emit(out, mode, params: IbrParams, red: ReducedNetwork, X: np.ndarray, f_nom: float):
    """Append channel rows for a block of sampled states X (n_samples x dim)."""
    n = params.n
    for x in X:
        theta, Omega = x[:n], x[n:2 * n]
        if mode == "droop":
            v = x[2 * n:3 * n]
            V = 1.0 + v
            lam = np.zeros(n)
            zeta = np.zeros(n)
            rho = np.zeros(n)
        else:
            v = x[2 * n:3 * n]
            lam = x[3 * n:4 * n]
            zeta = x[4 * n:]
            V = ctrl.voltage_output(params, v)
            rho = ctrl.leakage(params, v)
        P, Q = power_flow(red, theta, V)
        out["mode"].append(0 if mode == "droop" else 1)
        out["theta"].append(theta)
        out["omega_dev"].append(Omega)
        out["f"].append(f_nom + Omega / (2.0 * np.pi))
        out["v"].append(v)
        out["lam"].append(lam)
        out["zeta"].append(zeta)
        out["V"].append(V)
        out["P"].append(P)
        out["Q"].append(Q)
        out["p_ratio"].append(P / params.s_rated)
        out["q_ratio"].append(Q / params.s_rated)
        out["rho"].append(rho)
        out["v_min"].append(params.v_min.copy())
        out["v_max"].append(params.v_max.copy())


def detect_saturated_set(ts: TimeSeries, t: float) -> set[int]:
    """1-based indices of units with active leakage (rho > 0) at time t."""
    s = ts.index_at(t)
    return {int(i) + 1 for i in np.nonzero(ts.rho[s] > 0)[0]}


def sharing_error(ts: TimeSeries, t: float) -> np.ndarray:
    """|Q_i/S_i - mean_j(Q_j/S_j)| per unit at time t."""
    s = ts.index_at(t)
    q = ts.q_ratio[s]
    return np.abs(q - q.mean())
