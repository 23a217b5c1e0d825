"""Exception types raised by the solvers."""


class GeoflowError(Exception):
    """Base class for all solver and configuration failures."""


class NonSPDError(GeoflowError, ValueError):
    """Metric tensor is not symmetric positive definite at a queried point.

    Usually means the curve left the valid region of the chart (for example
    a sphere chart pole).  ``node`` and ``tau`` are filled in when the failure
    happens inside a flow solve.
    """

    def __init__(self, message, point=None, node=None, tau=None):
        self.point = point
        self.node = node
        self.tau = tau
        parts = [message]
        if node is not None:
            parts.append(f"node={node}")
        if tau is not None:
            parts.append(f"tau={tau:.6g}")
        super().__init__(", ".join(parts))


class DivergedError(GeoflowError):
    """Flow ran past ``max_tau`` without meeting the convergence threshold."""


class NonFiniteError(GeoflowError, FloatingPointError):
    """NaN or Inf appeared in the flow state."""


class MaxItersError(GeoflowError):
    """Gradient descent hit its iteration limit before the gradient test passed."""


class ConfigError(GeoflowError, ValueError):
    """Invalid run configuration."""
