"""Inverter microgrid toolkit: reactive sharing under hard voltage limits.

Simulation, steady-state analysis, stability certification, and gain
tuning for a fleet of droop-controlled inverters running a distributed
reactive-power-sharing controller whose voltage commands are confined to
per-unit limit bands by construction.
"""

from .controller import IbrParams, integrator_rhs, kkt_residual, leakage, voltage_output
from .errors import (
    ConvergenceError,
    DisconnectedGraphError,
    MgshareError,
    NetworkDataError,
    ScenarioFormatError,
    SimulationError,
)
from .graph import CommGraph, algebraic_connectivity, consensus_gain_matrix, laplacian
from .network import (
    Bases,
    Connector,
    Line,
    LinearizedModel,
    Load,
    NetworkData,
    ReducedNetwork,
    jacobians,
    kron_reduce,
    power_flow,
    to_per_unit,
)
from .scenario_io import bundled_scenario_path, parse_scenario, serialize_scenario
from .simulate import Event, Scenario, TimeSeries, detect_saturated_set, sharing_error, simulate
from .stability import (
    LmiCertificate,
    ReducedBlocks,
    assemble_blocks,
    boundary_layer_check,
    epsilon_sweep,
    solve_lmi,
    spectral_abscissa,
)
from .steady_state import Equilibrium, PropertyReport, solve_equilibrium, verify_properties
from .tuning import TunedParams, TuningSpec, tune, validate

__version__ = "0.1.0"

__all__ = [
    "IbrParams", "integrator_rhs", "kkt_residual", "leakage", "voltage_output",
    "MgshareError", "DisconnectedGraphError", "NetworkDataError",
    "ScenarioFormatError", "ConvergenceError", "SimulationError",
    "CommGraph", "laplacian", "algebraic_connectivity", "consensus_gain_matrix",
    "Bases", "Line", "Connector", "Load", "NetworkData", "ReducedNetwork",
    "LinearizedModel", "to_per_unit", "kron_reduce", "power_flow", "jacobians",
    "parse_scenario", "serialize_scenario", "bundled_scenario_path",
    "Event", "Scenario", "TimeSeries", "simulate", "detect_saturated_set",
    "sharing_error",
    "ReducedBlocks", "assemble_blocks", "LmiCertificate", "solve_lmi",
    "boundary_layer_check", "epsilon_sweep", "spectral_abscissa",
    "Equilibrium", "solve_equilibrium", "PropertyReport", "verify_properties",
    "TuningSpec", "TunedParams", "tune", "validate",
    "__version__",
]
