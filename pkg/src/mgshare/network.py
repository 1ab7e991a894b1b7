"""Physical AC network model.

Assembles the full nodal admittance matrix from bus/line/load tables,
Kron-reduces it onto the inverter internal buses, and evaluates the
nonlinear power flow

    P_i = sum_j V_i V_j (G_ij cos(th_ij) + B_ij sin(th_ij))
    Q_i = sum_j V_i V_j (G_ij sin(th_ij) - B_ij cos(th_ij))

together with its analytic Jacobians. Loads are modeled as constant
admittances sized to draw the declared apparent power at the stated lagging
power factor when the bus sits at nominal voltage; this is what makes the
reduced (G, B) description exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NetworkDataError

__all__ = [
    "Bases",
    "Line",
    "Connector",
    "Load",
    "NetworkData",
    "ReducedNetwork",
    "LinearizedModel",
    "to_per_unit",
    "kron_reduce",
    "power_flow",
    "jacobians",
]


@dataclass(frozen=True)
class Bases:
    """Per-unit system bases: apparent power [VA], RMS voltage [V], frequency [Hz]."""

    s_base: float
    v_base: float
    f_nom: float

    def __post_init__(self):
        if self.s_base <= 0 or self.v_base <= 0 or self.f_nom <= 0:
            raise NetworkDataError("bases must all be positive")

    @property
    def z_base(self) -> float:
        return self.v_base**2 / self.s_base

    @property
    def omega_nom(self) -> float:
        return 2.0 * math.pi * self.f_nom


@dataclass(frozen=True)
class Line:
    """Series branch between two main buses (1-based ids); r, x in the declared unit."""

    from_bus: int
    to_bus: int
    r: float
    x: float


@dataclass(frozen=True)
class Connector:
    """Output connector joining inverter ``ibr`` (1-based) to main bus ``bus``."""

    ibr: int
    bus: int
    r: float
    x: float


@dataclass(frozen=True)
class Load:
    """Constant-admittance load: apparent power ``s`` at lagging power factor ``pf``."""

    bus: int
    s: float
    pf: float


@dataclass(frozen=True)
class NetworkData:
    """Raw network description mirroring the scenario file tables.

    ``impedance_unit`` is "ohm" or "pu"; ``load_unit`` is "va" or "pu".
    ``to_per_unit`` normalizes everything once at ingestion.
    """

    bases: Bases
    n_bus: int
    lines: tuple[Line, ...]
    connectors: tuple[Connector, ...]
    loads: tuple[Load, ...]
    impedance_unit: str = "ohm"
    load_unit: str = "pu"

    def __post_init__(self):
        if self.impedance_unit not in ("ohm", "pu"):
            raise NetworkDataError(f"unknown impedance unit {self.impedance_unit!r}")
        if self.load_unit not in ("va", "pu"):
            raise NetworkDataError(f"unknown load unit {self.load_unit!r}")
        if self.n_bus < 1:
            raise NetworkDataError("need at least one main bus")
        for ln in self.lines:
            self._check_branch(ln.r, ln.x, f"line ({ln.from_bus},{ln.to_bus})")
            self._check_bus(ln.from_bus, "line")
            self._check_bus(ln.to_bus, "line")
        ibrs = [c.ibr for c in self.connectors]
        if sorted(ibrs) != list(range(1, len(ibrs) + 1)):
            raise NetworkDataError("connector ibr ids must be 1..n without gaps")
        for c in self.connectors:
            self._check_branch(c.r, c.x, f"connector of IBR {c.ibr}")
            self._check_bus(c.bus, "connector")
        for ld in self.loads:
            self._check_bus(ld.bus, "load")
            if not (0.0 < ld.pf <= 1.0):
                raise NetworkDataError(f"power factor at bus {ld.bus} not in (0,1]")
            if ld.s < 0:
                raise NetworkDataError(f"negative load at bus {ld.bus}")
        if not self._electrically_connected():
            raise NetworkDataError("electrical graph (buses+lines+connectors) is disconnected")

    def _check_bus(self, b: int, kind: str):
        if not (1 <= b <= self.n_bus):
            raise NetworkDataError(f"{kind} references unknown bus {b}")

    @staticmethod
    def _check_branch(r: float, x: float, what: str):
        if r < 0:
            raise NetworkDataError(f"negative resistance on {what}")
        if r == 0 and x == 0:
            raise NetworkDataError(f"{what} has zero impedance")

    def _electrically_connected(self) -> bool:
        # nodes: main buses 0..n_bus-1, then internal buses
        n = self.n_bus + self.n_ibr
        adj = [[] for _ in range(n)]
        for ln in self.lines:
            adj[ln.from_bus - 1].append(ln.to_bus - 1)
            adj[ln.to_bus - 1].append(ln.from_bus - 1)
        for c in self.connectors:
            k = self.n_bus + c.ibr - 1
            adj[c.bus - 1].append(k)
            adj[k].append(c.bus - 1)
        seen = [False] * n
        stack = [0]
        seen[0] = True
        while stack:
            for j in adj[stack.pop()]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return all(seen)

    @property
    def n_ibr(self) -> int:
        return len(self.connectors)


def to_per_unit(data: NetworkData) -> NetworkData:
    """Return a copy with impedances in p.u. of Z_base and loads in p.u. of S_base."""
    z_base = data.bases.z_base
    lines = data.lines
    connectors = data.connectors
    loads = data.loads
    if data.impedance_unit == "ohm":
        lines = tuple(replace(ln, r=ln.r / z_base, x=ln.x / z_base) for ln in lines)
        connectors = tuple(replace(c, r=c.r / z_base, x=c.x / z_base) for c in connectors)
    if data.load_unit == "va":
        loads = tuple(replace(ld, s=ld.s / data.bases.s_base) for ld in loads)
    return replace(
        data, lines=lines, connectors=connectors, loads=loads,
        impedance_unit="pu", load_unit="pu",
    )


@dataclass(frozen=True)
class ReducedNetwork:
    """Kron-reduced admittance seen from the inverter internal buses (p.u.)."""

    G: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if G.shape != B.shape or G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise NetworkDataError("G and B must be equal-size square matrices")
        if not (np.allclose(G, G.T, atol=1e-9) and np.allclose(B, B.T, atol=1e-9)):
            raise NetworkDataError("reduced admittance must be symmetric (reciprocal network)")
        # passivity sanity: conductance part must not be negative definite
        if np.linalg.eigvalsh(0.5 * (G + G.T)).min() < -1e-9:
            raise NetworkDataError("reduced conductance has a negative eigenvalue")
        G.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.G.shape[0]


def load_admittance(s: float, pf: float) -> complex:
    """Constant shunt admittance drawing (s, pf lagging) at 1.0 p.u. voltage."""
    return s * (pf - 1j * math.sin(math.acos(pf)))


def full_admittance(data: NetworkData, load_scale=None) -> np.ndarray:
    """Nodal admittance over [internal buses | main buses], loads as shunts."""
    if data.impedance_unit != "pu" or data.load_unit != "pu":
        raise NetworkDataError("call to_per_unit before assembling admittance")
    n = data.n_ibr
    nb = data.n_bus
    scale = np.ones(nb) if load_scale is None else np.asarray(load_scale, dtype=float)
    if scale.shape != (nb,):
        raise NetworkDataError(f"load_scale must have length {nb}")
    Y = np.zeros((n + nb, n + nb), dtype=complex)

    def stamp(a, b, y):
        Y[a, a] += y
        Y[b, b] += y
        Y[a, b] -= y
        Y[b, a] -= y

    for ln in data.lines:
        stamp(n + ln.from_bus - 1, n + ln.to_bus - 1, 1.0 / complex(ln.r, ln.x))
    for c in data.connectors:
        stamp(c.ibr - 1, n + c.bus - 1, 1.0 / complex(c.r, c.x))
    for ld in data.loads:
        Y[n + ld.bus - 1, n + ld.bus - 1] += scale[ld.bus - 1] * load_admittance(ld.s, ld.pf)
    return Y


def kron_reduce(data: NetworkData, load_scale=None) -> ReducedNetwork:
    """Schur-complement all main buses away, retaining the internal buses.

    Y_red = Y_AA - Y_AB Y_BB^-1 Y_BA over the partition A = internal,
    B = main. The eliminated block must be nonsingular (no isolated island).
    """
    n = data.n_ibr
    Y = full_admittance(data, load_scale)
    Yaa, Yab = Y[:n, :n], Y[:n, n:]
    Yba, Ybb = Y[n:, :n], Y[n:, n:]
    try:
        Yred = Yaa - Yab @ np.linalg.solve(Ybb, Yba)
    except np.linalg.LinAlgError:
        bad = _singular_buses(Ybb)
        raise NetworkDataError(
            f"cannot eliminate main buses {bad}: eliminated block is singular"
        ) from None
    Yred = 0.5 * (Yred + Yred.T)  # symmetrize round-off
    return ReducedNetwork(G=Yred.real, B=Yred.imag)


def _singular_buses(Ybb: np.ndarray) -> list[int]:
    """Best-effort identification of buses in the singular null space (1-based)."""
    _, s, vh = np.linalg.svd(Ybb)
    null = vh[s < 1e-12 * max(s[0], 1.0)]
    if null.size == 0:
        return []
    mask = np.abs(null).max(axis=0) > 1e-8
    return [int(i) + 1 for i in np.nonzero(mask)[0]]


def power_flow(net: ReducedNetwork, theta: np.ndarray, V: np.ndarray):
    """Evaluate (P, Q) injections at the reduced buses; pure algebra, no iteration."""
    theta = np.asarray(theta, dtype=float)
    V = np.asarray(V, dtype=float)
    if theta.shape != (net.n,) or V.shape != (net.n,):
        raise ValueError(f"theta and V must have shape ({net.n},)")
    dth = theta[:, None] - theta[None, :]
    MP = net.G * np.cos(dth) + net.B * np.sin(dth)
    MQ = net.G * np.sin(dth) - net.B * np.cos(dth)
    P = V * (MP @ V)
    Q = V * (MQ @ V)
    return P, Q


@dataclass(frozen=True)
class LinearizedModel:
    """First-order power flow model P = Jt_P th + Jv_P V + w_P (likewise Q).

    Exact at the linearization point; the angle Jacobians annihilate the
    all-ones vector (uniform angle shifts do not change power flows).
    """

    J_theta_P: np.ndarray
    J_V_P: np.ndarray
    J_theta_Q: np.ndarray
    J_V_Q: np.ndarray
    w_P: np.ndarray
    w_Q: np.ndarray
    theta0: np.ndarray
    V0: np.ndarray

    @property
    def n(self) -> int:
        return self.w_P.shape[0]

    def predict(self, theta: np.ndarray, V: np.ndarray):
        P = self.J_theta_P @ theta + self.J_V_P @ V + self.w_P
        Q = self.J_theta_Q @ theta + self.J_V_Q @ V + self.w_Q
        return P, Q


def jacobians(net: ReducedNetwork, theta0: np.ndarray, V0: np.ndarray) -> LinearizedModel:
    """Analytic partial derivatives of the power flow at (theta0, V0)."""
    theta0 = np.asarray(theta0, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    dth = theta0[:, None] - theta0[None, :]
    MP = net.G * np.cos(dth) + net.B * np.sin(dth)
    MQ = net.G * np.sin(dth) - net.B * np.cos(dth)
    VV = np.outer(V0, V0)

    Jt_P = VV * MQ
    np.fill_diagonal(Jt_P, 0.0)
    np.fill_diagonal(Jt_P, -Jt_P.sum(axis=1))

    Jt_Q = -VV * MP
    np.fill_diagonal(Jt_Q, 0.0)
    np.fill_diagonal(Jt_Q, -Jt_Q.sum(axis=1))

    Jv_P = V0[:, None] * MP + np.diag(MP @ V0)
    Jv_Q = V0[:, None] * MQ + np.diag(MQ @ V0)

    P0, Q0 = power_flow(net, theta0, V0)
    w_P = P0 - Jt_P @ theta0 - Jv_P @ V0
    w_Q = Q0 - Jt_Q @ theta0 - Jv_Q @ V0
    return LinearizedModel(Jt_P, Jv_P, Jt_Q, Jv_Q, w_P, w_Q, theta0, V0)
