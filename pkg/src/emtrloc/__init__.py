"""Fault location on branched power lines by electromagnetic time reversal.

Workflow: simulate (or import) the transient a short-circuit fault produces
at one observation node, reverse it in time, re-inject it into a model of
the healthy network against guessed fault positions, and report the position
whose guessed shunt branch collects the most current energy.  The network
graph is first decomposed into a provably minimal set of one-dimensional
search paths, and each path's energy maximum is found either exhaustively or
with a modified simulated-annealing search.
"""

from .network import (
    ConfigError,
    Edge,
    EdgePosition,
    LineParams,
    NetworkError,
    NetworkTopology,
    SourceSpec,
    Termination,
    as_multigraph,
    characteristic_impedance,
    edge_position_to_path_coordinate,
    network_distance,
    parse_network,
    parse_network_file,
    path_length,
    path_to_edge_position,
    propagation_speed,
    serialize_network,
)
from .graphs import (
    GraphError,
    MultiGraph,
    Path,
    PathDecomposition,
    decompose_into_paths,
    fleury_euler_path,
    is_bridge,
    odd_nodes,
)
from .anneal import (
    GridSearchResult,
    OptimizationTrace,
    SAParams,
    exhaustive_maximize,
    metropolis_accept,
    sa_maximize,
)
from .simulate import (
    DiscretizedNetwork,
    FaultScenario,
    GridSnapWarning,
    SimulationError,
    Waveform,
    back_inject,
    default_record_window,
    discretize,
    probe_injection,
    read_waveform_csv,
    signal_energy,
    simulate_fault,
    time_reverse,
    write_waveform_csv,
)
from .oracle import (
    SingleLineSetup,
    analytic_energy_curve,
    guess_current_spectrum,
    observed_voltage_spectrum,
    reflection_coefficient,
)
from .locate import (
    LocationResult,
    LocatorConfig,
    NoTransientDetected,
    locate_campaign,
    locate_fault,
)

__version__ = "0.1.0"
