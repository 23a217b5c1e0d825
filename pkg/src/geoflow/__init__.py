"""Geodesics on Riemannian manifolds by the geometric heat flow.

The flow evolves a curve with fixed endpoints toward a geodesic; space is
discretized by Chebyshev collocation on Gauss-Lobatto nodes and the
resulting ODE system is integrated with an explicit Runge-Kutta scheme.
A gradient-descent energy minimizer over Chebyshev coefficients is
included as a baseline.
"""

__version__ = "0.1.0"

from .baseline import GdProblem, energy_gradient, energy_of_coeffs, solve_gd
from .chebyshev import (
    ChebyshevSeries,
    NodeGrid,
    cgl_nodes,
    clenshaw_curtis_weights,
    coeffs_to_nodes,
    diff_matrix,
    eval_series,
    nodes_to_coeffs,
    second_diff,
)
from .errors import (
    ConfigError,
    DivergedError,
    GeoflowError,
    MaxItersError,
    NonFiniteError,
    NonSPDError,
)
from .heatflow import (
    FlowState,
    HeatFlowProblem,
    SolveReport,
    geodesic_residual,
    initial_curve,
    rhs,
    solve,
    speed_profile,
)
from .manifold import (
    MetricField,
    builtin,
    christoffel,
    curve_energy,
    curve_length,
    eggbox,
    euclidean,
    from_callable,
    graph_surface,
    inner,
    metric_at,
    metric_partials,
    sphere,
    squared_speed,
    torus,
)

__all__ = [
    "ChebyshevSeries", "ConfigError", "DivergedError", "FlowState", "GdProblem",
    "GeoflowError", "HeatFlowProblem", "MaxItersError", "MetricField", "NodeGrid",
    "NonFiniteError", "NonSPDError", "SolveReport", "builtin", "cgl_nodes", "christoffel",
    "clenshaw_curtis_weights", "coeffs_to_nodes", "curve_energy", "curve_length", "diff_matrix",
    "eggbox", "energy_gradient", "energy_of_coeffs", "euclidean", "eval_series", "from_callable",
    "geodesic_residual", "graph_surface", "initial_curve", "inner", "metric_at",
    "metric_partials", "nodes_to_coeffs", "rhs", "second_diff", "solve", "solve_gd", "sphere",
    "speed_profile", "squared_speed", "torus",
]
