"""Relaxed ADMM for distributed consensus over lossy networks.

Modules
-------
splitting
    Proximal and reflective operators, Krasnosel'skii-Mann steps and the
    relaxed Peaceman-Rachford solver.
graph
    Undirected communication graphs with a directed slot layout.
costs
    Local quadratic costs and the centralized optimum.
consensus
    Vectorised synchronous rounds of the three distributed algorithms.
agents
    Node-by-node message passing with access accounting.
experiments
    Monte-Carlo traces, stability sweeps and CSV output.
cli
    The ``radmm`` command.
"""

__version__ = "0.1.0"

from .consensus import (Alg1State, Alg2State, LossModel, QMessage, alg1_step, alg2_step,
                        alg3_step, resource_counts)
from .costs import QuadraticCost, centralized_optimum, make_random_quadratics
from .exceptions import ConfigError, DomainError, InfeasibleGraphError, ParameterError
from .experiments import ExperimentConfig, monte_carlo, run_trace, stability_sweep
from .graph import Graph, complete_graph, cycle_graph, random_geometric
from .splitting import (ProxFunction, SplittingParams, km_step, prox, quadratic_function, reflect,
                        rprs_solve)

__all__ = [
    "Alg1State", "Alg2State", "ConfigError", "DomainError", "ExperimentConfig", "Graph",
    "InfeasibleGraphError", "LossModel", "ParameterError", "ProxFunction", "QMessage",
    "QuadraticCost", "SplittingParams", "alg1_step", "alg2_step", "alg3_step",
    "centralized_optimum", "complete_graph", "cycle_graph", "km_step", "make_random_quadratics",
    "monte_carlo", "prox", "quadratic_function", "random_geometric", "reflect",
    "resource_counts", "rprs_solve", "run_trace", "stability_sweep",
]
