"""Chebyshev-Gauss-Lobatto collocation on the unit interval.

All public functions work in the curve parameter ``s`` in [0, 1].  The
Chebyshev variable is ``z = 2 s - 1``; derivatives with respect to ``s``
carry the chain-rule factor 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True, eq=False)
class NodeGrid:
    """CGL nodes ``s_k = (1 - cos(k pi / D)) / 2`` for ``k = 0..D``."""

    degree: int
    nodes: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.degree + 1

    def __eq__(self, other):
        return isinstance(other, NodeGrid) and other.degree == self.degree

    def __hash__(self):
        return hash(("NodeGrid", self.degree))


@dataclass(frozen=True)
class ChebyshevSeries:
    """Per-coordinate Chebyshev coefficients.

    ``coeffs[i, j]`` multiplies ``T_j(2 s - 1)`` in coordinate ``i``.
    """

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]


def cgl_nodes(D: int) -> NodeGrid:
    """Chebyshev-Gauss-Lobatto grid of degree ``D`` on [0, 1]."""
    if int(D) != D or D < 1:
        raise ValueError(f"degree must be a positive integer, got {D!r}")
    return _grid(int(D))


@lru_cache(maxsize=64)
def _grid(D: int) -> NodeGrid:
    k = np.arange(D + 1)
    # sin form keeps z_{D-k} = -z_k exactly, so s_k + s_{D-k} = 1.
    z = np.sin(np.pi * (2 * k - D) / (2 * D))
    s = 0.5 * (1.0 + z)
    s[0], s[-1] = 0.0, 1.0
    s.setflags(write=False)
    return NodeGrid(D, s)


def diff_matrix(grid: NodeGrid) -> np.ndarray:
    """First-derivative matrix ``d/ds`` on the grid (read-only array)."""
    return _diff_matrix(grid.degree)


def second_diff(grid: NodeGrid) -> np.ndarray:
    """Second-derivative matrix, the square of :func:`diff_matrix`."""
    return _second_diff(grid.degree)


@lru_cache(maxsize=64)
def _diff_matrix(D: int) -> np.ndarray:
    k = np.arange(D + 1)
    z = 2.0 * _grid(D).nodes - 1.0
    c = np.ones(D + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** k
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, 1.0)
    M = np.outer(c, 1.0 / c) / dz
    np.fill_diagonal(M, 0.0)
    # negative-sum trick: rows annihilate constants to roundoff
    np.fill_diagonal(M, -M.sum(axis=1))
    M *= 2.0
    M.setflags(write=False)
    return M


@lru_cache(maxsize=64)
def _second_diff(D: int) -> np.ndarray:
    D1 = _diff_matrix(D)
    M = D1 @ D1
    M.setflags(write=False)
    return M


def clenshaw_curtis_weights(grid: NodeGrid) -> np.ndarray:
    """Quadrature weights for integrals over [0, 1] on the CGL grid.

    Exact for polynomials of degree ``<= D`` (``D + 1`` for odd ``D``).
    """
    return _cc_weights(grid.degree)


@lru_cache(maxsize=64)
def _cc_weights(D: int) -> np.ndarray:
    theta = np.pi * np.arange(D + 1) / D
    w = np.zeros(D + 1)
    v = np.ones(D - 1)
    inner = theta[1:-1]
    if D % 2 == 0:
        w[0] = w[D] = 1.0 / (D * D - 1)
        for k in range(1, D // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(D * inner) / (D * D - 1)
    else:
        w[0] = w[D] = 1.0 / (D * D)
        for k in range(1, (D - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / D
    # reference weights are for [-1, 1]; node order is symmetric
    w *= 0.5
    w.setflags(write=False)
    return w


def chebyshev_basis(s, D: int) -> np.ndarray:
    """Matrix ``B[k, j] = T_j(2 s_k - 1)`` via the three-term recurrence."""
    z = 2.0 * np.atleast_1d(np.asarray(s, dtype=float)) - 1.0
    B = np.empty((z.size, D + 1))
    B[:, 0] = 1.0
    if D >= 1:
        B[:, 1] = z
    for j in range(2, D + 1):
        B[:, j] = 2.0 * z * B[:, j - 1] - B[:, j - 2]
    return B


def vandermonde(grid: NodeGrid) -> np.ndarray:
    """Chebyshev Vandermonde matrix ``V[k, j] = T_j(2 s_k - 1)``."""
    return _vandermonde(grid.degree)


@lru_cache(maxsize=64)
def _vandermonde(D: int) -> np.ndarray:
    V = chebyshev_basis(_grid(D).nodes, D)
    V.setflags(write=False)
    return V


def nodes_to_coeffs(values, grid: NodeGrid) -> ChebyshevSeries:
    """Project node values (shape ``(n, D+1)`` or ``(D+1,)``) onto ``T_j``."""
    X = np.atleast_2d(np.asarray(values, dtype=float))
    if X.shape[1] != grid.size:
        raise ValueError(f"expected {grid.size} node values per coordinate, got {X.shape[1]}")
    coeffs = np.linalg.solve(vandermonde(grid), X.T).T
    return ChebyshevSeries(coeffs)


def coeffs_to_nodes(series: ChebyshevSeries, grid: NodeGrid) -> np.ndarray:
    """Evaluate a series at the grid nodes, shape ``(n, D+1)``."""
    if series.degree != grid.degree:
        raise ValueError("series degree does not match grid degree")
    return series.coeffs @ vandermonde(grid).T


def eval_series(series: ChebyshevSeries, s):
    """Evaluate each coordinate of ``series`` at ``s`` (scalar or array).

    Returns shape ``(n,)`` for scalar ``s`` and ``(n, len(s))`` otherwise.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0.0) | (s_arr > 1.0)):
        raise ValueError("s must lie in [0, 1]")
    B = chebyshev_basis(s_arr, series.degree)
    out = series.coeffs @ B.T
    return out[:, 0] if s_arr.ndim == 0 else out


def resample(values, src: NodeGrid, dst: NodeGrid) -> np.ndarray:
    """Interpolate node values from one CGL grid onto another."""
    series = nodes_to_coeffs(values, src)
    return series.coeffs @ chebyshev_basis(dst.nodes, src.degree).T
