"""Weighted-consensus cooperative salvo guidance over pseudo-undirected graphs."""

__version__ = "0.1.0"

from .consensus import (
    check_eventual_positivity,
    closed_form_cycle,
    closed_form_star,
    consensus_value,
    left_null_vector_generic,
    left_null_vector_projection,
    simulate_linear_consensus,
)
from .engagement import (
    InterceptorState,
    SimulationTrace,
    TargetState,
    guidance_command,
    kinematics_derivative,
    simulate_engagement,
    simulate_salvo,
    tgo_dynamics,
    time_to_go,
)
from .graph import (
    PseudoUndirectedGraph,
    build_graph,
    cycle_graph,
    incidence_decomposition,
    laplacian,
    star_graph,
)
from .robustness import (
    destabilizing_perturbation,
    edge_transfer_function,
    gain_margin,
    nyquist_trace,
    phase_crossovers,
    unit_weight_margin_closed_form,
)
from .scenario import ScenarioConfig, load_scenario

__all__ = [
    "__version__",
    "PseudoUndirectedGraph",
    "build_graph",
    "cycle_graph",
    "star_graph",
    "laplacian",
    "incidence_decomposition",
    "left_null_vector_generic",
    "left_null_vector_projection",
    "closed_form_cycle",
    "closed_form_star",
    "consensus_value",
    "simulate_linear_consensus",
    "check_eventual_positivity",
    "edge_transfer_function",
    "phase_crossovers",
    "gain_margin",
    "unit_weight_margin_closed_form",
    "nyquist_trace",
    "destabilizing_perturbation",
    "InterceptorState",
    "TargetState",
    "SimulationTrace",
    "time_to_go",
    "kinematics_derivative",
    "tgo_dynamics",
    "guidance_command",
    "simulate_engagement",
    "simulate_salvo",
    "ScenarioConfig",
    "load_scenario",
]
