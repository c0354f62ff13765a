"""netseg: triadic closure, homophily, and segregation in network models.

Four model families under one integration metric (the fraction of cross-type
edges):

- ``graph``: typed graphs, wedge machinery, closure and biased-edge moves;
- ``sbm``: stochastic block model closed forms, effect predicates, bounds,
  and eigenvector-centrality analysis;
- ``jr``: the two-phase growing network, its equilibrium and convergence
  laws, and the intervention calculus;
- ``fixed_node``: the fixed-node rewiring model, mean-field fixed points,
  and the chain simulator;
- ``estimation``: fitting the growth model to citation-style data.

``verify`` regenerates the simulation-versus-theory figure data; ``cli``
exposes everything as the ``netseg`` command.
"""

from .errors import (
    DegenerateParamsError,
    FitError,
    NetsegError,
    NoMissingEdgeError,
    NonConvergenceError,
    NoStableEquilibriumError,
    NoWedgeError,
    UndefinedIntegrationError,
)
from .graph import (
    BI,
    MONO,
    EdgeStats,
    TypedGraph,
    WedgeStats,
    add_random_edge,
    close_random_wedge,
    complete_graph,
    count_wedges,
    enumerate_wedges,
    integration,
    read_edge_list,
    read_graph_json,
    sample_wedge,
    write_edge_list,
    write_graph_json,
)
from .rng import make_rng, randomized_round, split_rngs

__version__ = "0.1.0"

__all__ = [
    "BI",
    "MONO",
    "DegenerateParamsError",
    "EdgeStats",
    "FitError",
    "NetsegError",
    "NoMissingEdgeError",
    "NonConvergenceError",
    "NoStableEquilibriumError",
    "NoWedgeError",
    "TypedGraph",
    "UndefinedIntegrationError",
    "WedgeStats",
    "add_random_edge",
    "close_random_wedge",
    "complete_graph",
    "count_wedges",
    "enumerate_wedges",
    "integration",
    "make_rng",
    "randomized_round",
    "read_edge_list",
    "read_graph_json",
    "sample_wedge",
    "split_rngs",
    "write_edge_list",
    "write_graph_json",
    "__version__",
]
