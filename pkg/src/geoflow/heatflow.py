"""Geodesics by integrating the geometric heat flow on a CGL grid.

The curve is stored as node values ``X`` of shape ``(n, D+1)``.  Interior
nodes evolve under

    dX_i/dtau = alpha * (d2X_i/ds2 + Gamma^i_jk dX_j/ds dX_k/ds)

with spectral differentiation matrices; the two boundary columns are pinned
to the endpoints.  Integration stops once the max-norm node change per unit
``tau`` drops below ``tol_converge``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .chebyshev import (
    ChebyshevSeries,
    NodeGrid,
    cgl_nodes,
    clenshaw_curtis_weights,
    coeffs_to_nodes,
    diff_matrix,
    nodes_to_coeffs,
    resample,
    second_diff,
)
from .errors import DivergedError, NonFiniteError, NonSPDError
from .integrators import RK4, DormandPrince, stable_step
from .manifold import MetricField, check_spd

INTEGRATORS = ("rk45", "rk4")


@dataclass
class HeatFlowProblem:
    """Inputs of one heat-flow solve.

    ``init`` is ``"straight"`` (linear interpolation in chart coordinates), a
    sequence of interior waypoints, or an ``(n, M)`` array of node values on
    any CGL grid used as a warm start.
    """

    manifold: MetricField
    p: np.ndarray
    q: np.ndarray
    D: int = 16
    alpha: float = 4.0
    init: Union[str, Sequence, np.ndarray] = "straight"
    tol_converge: float = 1e-6
    dtau: Optional[float] = None
    integrator: str = "rk45"
    atol: float = 1e-8
    max_tau: Optional[float] = None
    max_wall_time: Optional[float] = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.manifold.dim
        if self.p.shape != (n,) or self.q.shape != (n,):
            raise ValueError(f"endpoints must have {n} coordinates")
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.q))):
            raise ValueError("endpoints must be finite")
        if int(self.D) != self.D or self.D < 1:
            raise ValueError(f"degree D must be a positive integer, got {self.D!r}")
        self.D = int(self.D)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tol_converge > 0:
            raise ValueError("tol_converge must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.dtau is not None and not self.dtau > 0:
            raise ValueError("dtau must be positive")
        if self.max_tau is None:
            self.max_tau = 100.0 / self.alpha
        if self.max_wall_time is not None and not self.max_wall_time > 0:
            raise ValueError("max_wall_time must be positive")


@dataclass
class FlowState:
    X: np.ndarray
    tau: float = 0.0
    converged: bool = False


@dataclass
class SolveReport:
    """Outcome of a geodesic solve (heat flow or gradient descent)."""

    geodesic: ChebyshevSeries
    length: float
    energy: float
    energy_trace: np.ndarray
    iterations: int
    wall_time: float
    residual: float
    converged: bool
    nodes: np.ndarray = field(repr=False)
    grid: NodeGrid = field(repr=False)
    method: str = "pde"
    tau: float = 0.0
    nfev: int = 0

    @property
    def wall_time_ms(self) -> float:
        return 1e3 * self.wall_time

    @property
    def max_energy_rise(self) -> float:
        """Largest increase of energy between accepted steps, relative to E0."""
        E = self.energy_trace[:, 1]
        if E.size < 2 or E[0] == 0.0:
            return 0.0
        return float(np.max(np.diff(E)) / E[0])


def initial_curve(p, q, grid: NodeGrid, waypoints=None, curve=None) -> FlowState:
    """Starting curve for the flow.

    Default is the straight chart line from ``p`` to ``q``.  ``waypoints``
    gives an ordered list of interior points for a piecewise-linear start
    (chord-length parametrized), which selects the homotopy class.  ``curve``
    warm-starts from node values on any CGL grid; its ends are moved onto
    ``p`` and ``q`` by an affine correction.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    s = grid.nodes
    if np.array_equal(p, q) and waypoints is None and curve is None:
        return FlowState(np.repeat(p[:, None], grid.size, axis=1), converged=True)
    if curve is not None:
        C = np.atleast_2d(np.asarray(curve, dtype=float))
        if C.shape[1] != grid.size:
            C = resample(C, cgl_nodes(C.shape[1] - 1), grid)
        X = C + np.outer(p - C[:, 0], 1.0 - s) + np.outer(q - C[:, -1], s)
    elif waypoints is not None and len(waypoints):
        pts = np.vstack([p, np.asarray(waypoints, dtype=float).reshape(-1, p.size), q])
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        knots = np.concatenate([[0.0], np.cumsum(seg)])
        if knots[-1] > 0:
            knots /= knots[-1]
        else:
            knots = np.linspace(0.0, 1.0, len(pts))
        X = np.vstack([np.interp(s, knots, pts[:, i]) for i in range(p.size)])
    else:
        X = p[:, None] + np.outer(q - p, s)
    X = np.ascontiguousarray(X)
    X[:, 0] = p
    X[:, -1] = q
    return FlowState(X)


class _Flow:
    """Right-hand side and energy evaluators bound to one manifold and grid."""

    def __init__(self, manifold: MetricField, grid: NodeGrid, alpha: float):
        self.manifold = manifold
        self.grid = grid
        self.alpha = float(alpha)
        self.D1 = np.ascontiguousarray(diff_matrix(grid))
        self.D2 = np.ascontiguousarray(second_diff(grid))
        self.weights = clenshaw_curtis_weights(grid)
        self.kernel = manifold.kernel

    def rhs(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        out = np.empty_like(X)
        if self.kernel is not None:
            code, params = self.kernel
            bad = kernels.builtin_rhs(code, params, X, self.D1, self.D2, self.alpha, out)
        else:
            bad = self._generic_rhs(X, out)
        if bad >= 0:
            raise NonSPDError("metric lost positive definiteness along the curve",
                              point=X[:, bad].copy(), node=int(bad))
        return out

    def _generic_rhs(self, X, out):
        V = X @ self.D1.T
        A = X @ self.D2.T
        inner = np.ascontiguousarray(X[:, 1:-1])
        G = np.ascontiguousarray(self.manifold.metric_batch(inner))
        dG = np.ascontiguousarray(self.manifold.partials_batch(inner))
        acc = np.empty_like(inner)
        bad = kernels.geodesic_accel(G, dG, np.ascontiguousarray(V[:, 1:-1]), acc)
        if bad >= 0:
            return bad + 1
        out[:, 1:-1] = self.alpha * (A[:, 1:-1] + acc)
        out[:, 0] = 0.0
        out[:, -1] = 0.0
        return -1

    def speed(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        if self.kernel is not None:
            out = np.empty(X.shape[1])
            code, params = self.kernel
            kernels.builtin_speed(code, params, X, self.D1, out)
            return out
        V = X @ self.D1.T
        G = self.manifold.metric_batch(X)
        check_spd(G, X)
        return np.einsum("ik,kij,jk->k", V, G, V)

    def energy(self, X):
        if np.all(X == X[:, :1]):
            return 0.0
        return 0.5 * float(self.weights @ self.speed(X))

    def length(self, X):
        if np.all(X == X[:, :1]):
            return 0.0
        return float(self.weights @ np.sqrt(np.maximum(self.speed(X), 0.0)))


def rhs(problem: HeatFlowProblem, state: FlowState) -> np.ndarray:
    """``dX/dtau`` for the current node values; boundary columns are zero."""
    grid = cgl_nodes(problem.D)
    return _Flow(problem.manifold, grid, problem.alpha).rhs(state.X)


def solve(problem: HeatFlowProblem) -> SolveReport:
    """Integrate the heat flow until the node change rate drops below tolerance.

    Raises
    ------
    DivergedError
        ``tau`` exceeded ``max_tau`` (or the run exceeded ``max_wall_time``
        seconds) before convergence.
    NonSPDError
        The curve left the region where the metric is positive definite.
    NonFiniteError
        NaN or Inf appeared in the state.
    """
    t0 = time.perf_counter()
    grid = cgl_nodes(problem.D)
    flow = _Flow(problem.manifold, grid, problem.alpha)
    p, q = problem.p, problem.q

    if isinstance(problem.init, str):
        if problem.init != "straight":
            raise ValueError(f"unknown init {problem.init!r}")
        state = initial_curve(p, q, grid)
    elif isinstance(problem.init, np.ndarray) and problem.init.ndim == 2 \
            and problem.init.shape[0] == p.size and problem.init.shape[1] > 2:
        state = initial_curve(p, q, grid, curve=problem.init)
    else:
        state = initial_curve(p, q, grid, waypoints=problem.init)

    X = state.X
    E = flow.energy(X)
    trace = [(0.0, E)]
    tau = 0.0
    steps = 0
    nfev = 0
    converged = state.converged
    if not converged and problem.D >= 2 and np.max(np.abs(flow.rhs(X))) < problem.tol_converge:
        converged = True

    if not converged:
        if problem.integrator == "rk4":
            h = problem.dtau or stable_step(problem.D, problem.alpha, "rk4")
            stepper = RK4(flow.rhs, h)
        else:
            h_max = stable_step(problem.D, problem.alpha, "rk45")
            h0 = problem.dtau or 0.1 * h_max
            stepper = DormandPrince(flow.rhs, atol=problem.atol, h0=h0, h_max=h_max)
        while True:
            try:
                X_new, h = stepper.advance(X)
            except NonSPDError as exc:
                raise NonSPDError("metric lost positive definiteness along the curve",
                                  point=exc.point, node=exc.node, tau=tau) from None
            if not np.all(np.isfinite(X_new)):
                raise NonFiniteError(f"non-finite state at tau={tau + h:.6g}")
            X_new[:, 0] = p
            X_new[:, -1] = q
            change = float(np.max(np.abs(X_new - X))) / h
            X = X_new
            tau += h
            steps += 1
            E = flow.energy(X)
            trace.append((tau, E))
            if change < problem.tol_converge:
                converged = True
                break
            if tau > problem.max_tau:
                raise DivergedError(
                    f"no convergence by tau={tau:.4g} (max_tau={problem.max_tau:.4g}); "
                    f"node change rate {change:.3g} > {problem.tol_converge:.3g}")
            if problem.max_wall_time is not None and time.perf_counter() - t0 > problem.max_wall_time:
                raise DivergedError(
                    f"wall-time budget of {problem.max_wall_time:g} s spent at tau={tau:.4g} "
                    f"after {steps} steps; node change rate {change:.3g}")
        nfev = stepper.nfev

    series = nodes_to_coeffs(X, grid)
    residual = _residual(flow, X)
    return SolveReport(
        geodesic=series,
        length=flow.length(X),
        energy=E,
        energy_trace=np.array(trace),
        iterations=steps,
        wall_time=time.perf_counter() - t0,
        residual=residual,
        converged=converged,
        nodes=X,
        grid=grid,
        method="pde",
        tau=tau,
        nfev=nfev,
    )


def _residual(flow: _Flow, X) -> float:
    if X.shape[1] <= 2:
        return 0.0
    R = flow.rhs(X)[:, 1:-1] / flow.alpha
    return float(np.max(np.linalg.norm(R, axis=0)))


def geodesic_residual(manifold: MetricField, series: ChebyshevSeries, grid: NodeGrid,
                      ) -> float:
    """Max over interior nodes of ``|X'' + Gamma(X', X')|`` (Euclidean norm)."""
    X = coeffs_to_nodes(series, grid)
    return _residual(_Flow(manifold, grid, 1.0), X)


def speed_profile(manifold: MetricField, series: ChebyshevSeries, grid: NodeGrid) -> np.ndarray:
    """Squared speed ``<c', c'>_g`` at each node; constant along a geodesic."""
    X = coeffs_to_nodes(series, grid)
    return _Flow(manifold, grid, 1.0).speed(X)
