"""Output consensus of heterogeneous linear agents on directed graphs.

Graph analysis and diagonal scaling, local gain synthesis, distributed
protocols with or without estimators, and fixed-step simulation.
"""

from .ctl_linalg import StateSpace, check_spr, solve_care, solve_sylvester
from .errors import (ConvergenceError, DivergenceError, GraphError, HetconsError,
                     NumericalError, ParameterError, UnsupportedError, ValidationError)
from .graph import Digraph, build_interconnection, find_dominance_scaling, reachable_nodes
from .numeric import DEFAULT_POLICY, NumericPolicy
from .protocol import assemble_collective, closed_loop, delta_at, verify_stability
from .scenario import builtin_example, parse_scenario, scenario_to_dict
from .sim import Scenario, consensus_metrics, integrate, run_scenario
from .synthesis import (Agent, ReferenceModel, WeightingFilter, check_assumption_a,
                        solve_regulator_eqs, synth_gains)

__version__ = "0.1.0"

__all__ = [
    "Agent", "ConvergenceError", "DEFAULT_POLICY", "Digraph", "DivergenceError", "GraphError",
    "HetconsError", "NumericPolicy", "NumericalError", "ParameterError", "ReferenceModel",
    "Scenario", "StateSpace", "UnsupportedError", "ValidationError", "WeightingFilter",
    "assemble_collective", "build_interconnection", "builtin_example", "check_assumption_a",
    "check_spr", "closed_loop", "consensus_metrics", "delta_at", "find_dominance_scaling",
    "integrate", "parse_scenario", "reachable_nodes", "run_scenario", "scenario_to_dict",
    "solve_care", "solve_regulator_eqs", "solve_sylvester", "synth_gains", "verify_stability",
]
