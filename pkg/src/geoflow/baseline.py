"""Gradient-descent geodesics over Chebyshev coefficients.

Comparison baseline for the heat flow.  The curve is

    c(s) = p + (q - p) s + sum_{j=2..D} a_j phi_j(s),
    phi_j = T_j(2s - 1) - T_{j mod 2}(2s - 1),

so every ``phi_j`` vanishes at both ends and the endpoints are exact for
any free coefficients ``a``.  The energy is evaluated by Clenshaw-Curtis
quadrature on ``N`` CGL nodes and minimized by steepest descent with a
central-difference gradient and Armijo backtracking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chebyshev import ChebyshevSeries, cgl_nodes, chebyshev_basis, coeffs_to_nodes, diff_matrix
from .errors import MaxItersError
from .heatflow import SolveReport, _Flow, _residual
from .manifold import MetricField


@dataclass
class GdProblem:
    manifold: MetricField
    p: np.ndarray
    q: np.ndarray
    D: int = 7
    N: Optional[int] = None
    tol_grad: float = 1e-6
    max_iters: int = 200_000
    fd_step: float = 1e-7
    armijo: float = 1e-4
    init: Optional[np.ndarray] = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.manifold.dim
        if self.p.shape != (n,) or self.q.shape != (n,):
            raise ValueError(f"endpoints must have {n} coordinates")
        if int(self.D) != self.D or self.D < 1:
            raise ValueError("D must be a positive integer")
        self.D = int(self.D)
        if self.N is None:
            self.N = self.D + 4
        if self.N < self.D + 1:
            raise ValueError(f"N must be at least D+1 = {self.D + 1}, got {self.N}")
        if not self.tol_grad > 0 or self.max_iters < 1:
            raise ValueError("tol_grad must be positive and max_iters at least 1")

    @property
    def n_free(self) -> int:
        return self.manifold.dim * max(self.D - 1, 0)


class _Parametrization:
    def __init__(self, problem: GdProblem):
        self.problem = problem
        self.grid = cgl_nodes(problem.N - 1)
        s = self.grid.nodes
        B = chebyshev_basis(s, problem.D)
        # derivatives of degree-D polynomials are exact on the N-node grid
        dB = diff_matrix(self.grid) @ B
        j = np.arange(2, problem.D + 1)
        self.phi = (B[:, j] - B[:, j % 2]).T           # (D-1, N)
        self.dphi = (dB[:, j] - dB[:, j % 2]).T
        p, q = problem.p, problem.q
        self.base = p[:, None] + np.outer(q - p, s)
        self.flow = _Flow(problem.manifold, self.grid, 1.0)

    def curve(self, a):
        a = a.reshape(self.problem.manifold.dim, -1)
        return np.ascontiguousarray(self.base + a @ self.phi)

    def energy(self, a):
        return self.flow.energy(self.curve(a))

    def series(self, a) -> ChebyshevSeries:
        pr = self.problem
        n = pr.manifold.dim
        c = np.zeros((n, pr.D + 1))
        c[:, 0] = 0.5 * (pr.p + pr.q)
        if pr.D >= 1:
            c[:, 1] = 0.5 * (pr.q - pr.p)
        a = a.reshape(n, -1)
        for idx, j in enumerate(range(2, pr.D + 1)):
            c[:, j] += a[:, idx]
            c[:, j % 2] -= a[:, idx]
        return ChebyshevSeries(c)


def energy_of_coeffs(problem: GdProblem, free) -> float:
    """Energy of the curve with free coefficients ``free`` (shape ``(n, D-1)``)."""
    a = np.asarray(free, dtype=float).reshape(-1)
    if a.size != problem.n_free:
        raise ValueError(f"expected {problem.n_free} free coefficients, got {a.size}")
    return _Parametrization(problem).energy(a)


def energy_gradient(problem: GdProblem, free, _param=None) -> np.ndarray:
    """Central-difference gradient of :func:`energy_of_coeffs`."""
    param = _param or _Parametrization(problem)
    a = np.asarray(free, dtype=float).reshape(-1).copy()
    h = problem.fd_step
    g = np.empty_like(a)
    for i in range(a.size):
        ai = a[i]
        a[i] = ai + h
        up = param.energy(a)
        a[i] = ai - h
        down = param.energy(a)
        a[i] = ai
        g[i] = (up - down) / (2 * h)
    return g


def solve_gd(problem: GdProblem) -> SolveReport:
    """Minimize the energy by steepest descent; raises MaxItersError on stall."""
    t0 = time.perf_counter()
    param = _Parametrization(problem)
    a = np.zeros(problem.n_free) if problem.init is None else \
        np.asarray(problem.init, dtype=float).reshape(-1).copy()
    E = param.energy(a)
    trace = [(0.0, E)]
    step = 1.0
    converged = False
    it = 0
    nfev = 1
    while it < problem.max_iters:
        if a.size == 0:
            converged = True
            break
        g = energy_gradient(problem, a, param)
        nfev += 2 * a.size
        if np.max(np.abs(g)) < problem.tol_grad:
            converged = True
            break
        gg = float(g @ g)
        step *= 2.0
        while True:
            trial = a - step * g
            E_trial = param.energy(trial)
            nfev += 1
            if E_trial <= E - problem.armijo * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                break
        if step < 1e-20:
            # no descent possible at this gradient resolution
            converged = np.max(np.abs(g)) < 10 * problem.tol_grad
            break
        a, E = trial, E_trial
        it += 1
        trace.append((float(it), E))

    series = param.series(a)
    grid_D = cgl_nodes(problem.D)
    X_D = coeffs_to_nodes(series, grid_D)
    report = SolveReport(
        geodesic=series,
        length=param.flow.length(param.curve(a)),
        energy=E,
        energy_trace=np.array(trace),
        iterations=it,
        wall_time=time.perf_counter() - t0,
        residual=_residual(_Flow(problem.manifold, grid_D, 1.0), X_D),
        converged=converged,
        nodes=X_D,
        grid=grid_D,
        method="gd",
        nfev=nfev,
    )
    if not converged:
        err = MaxItersError(f"gradient descent stopped after {it} iterations "
                            f"(max |grad| above {problem.tol_grad:g})")
        err.report = report
        raise err
    return report
