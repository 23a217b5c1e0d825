"""Riemannian metrics in a single coordinate chart.

A :class:`MetricField` evaluates the metric tensor ``G`` and its partial
derivatives.  Batched evaluation takes points as columns of an ``(n, M)``
array, the same layout as a sampled curve, and returns ``(M, n, n)`` metrics
and ``(M, n, n, n)`` partials with ``dG[m, i, j, k] = d g_ij / d x_k``.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .chebyshev import NodeGrid, clenshaw_curtis_weights, diff_matrix
from .errors import NonSPDError

# kernel ids understood by the compiled and fallback cores
EUCLIDEAN, SPHERE, TORUS, EGGBOX = 0, 1, 2, 3

DEFAULT_FD_STEP = 1e-6


class MetricField:
    """Metric tensor field on an ``dim``-dimensional chart.

    Parameters
    ----------
    dim : int
        Chart dimension ``n``.
    metric : callable
        ``metric(x) -> (n, n)`` for a single point, or, when ``vectorized``
        is set, ``metric(X) -> (M, n, n)`` for points stored as columns of
        ``X`` with shape ``(n, M)``.
    partials : callable, optional
        Same calling convention, returning ``d g_ij / d x_k`` with the
        derivative index last.  When omitted, partials come from central
        finite differences with step ``fd_step``.
    kernel : (int, tuple), optional
        Identifier of an analytic builtin implemented by the compiled core.
    """

    def __init__(
        self,
        dim: int,
        metric: Callable,
        partials: Optional[Callable] = None,
        *,
        fd_step: float = DEFAULT_FD_STEP,
        vectorized: bool = False,
        name: str = "custom",
        params: Optional[dict] = None,
        kernel: Optional[tuple] = None,
    ):
        if int(dim) != dim or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.dim = int(dim)
        self._metric = metric
        self._partials = partials
        self.fd_step = float(fd_step)
        self.vectorized = vectorized
        self.name = name
        self.params = dict(params or {})
        self.kernel = kernel

    @property
    def partials_mode(self) -> str:
        return "analytic" if self._partials is not None else "finite-difference"

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"MetricField({self.name}({args}), dim={self.dim}, partials={self.partials_mode})"

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates, got {X.shape[0]}")
        return X

    def metric_batch(self, X) -> np.ndarray:
        """Symmetrized metric at every column of ``X``; no SPD check."""
        X = self._points(X)
        if self.vectorized:
            G = np.asarray(self._metric(X), dtype=float)
        else:
            G = np.stack([np.asarray(self._metric(x), dtype=float) for x in X.T])
        G = G.reshape(X.shape[1], self.dim, self.dim)
        return 0.5 * (G + G.transpose(0, 2, 1))

    def partials_batch(self, X) -> np.ndarray:
        """``d g_ij / d x_k`` at every column of ``X``, shape ``(M, n, n, n)``."""
        X = self._points(X)
        if self._partials is None:
            return self._fd_partials(X)
        if self.vectorized:
            dG = np.asarray(self._partials(X), dtype=float)
        else:
            dG = np.stack([np.asarray(self._partials(x), dtype=float) for x in X.T])
        dG = dG.reshape(X.shape[1], self.dim, self.dim, self.dim)
        return 0.5 * (dG + dG.transpose(0, 2, 1, 3))

    def fd_partials_batch(self, X, h: Optional[float] = None) -> np.ndarray:
        """Central-difference partials regardless of the configured mode."""
        return self._fd_partials(self._points(X), h)

    def _fd_partials(self, X, h=None) -> np.ndarray:
        h = self.fd_step if h is None else h
        n, M = X.shape
        dG = np.empty((M, n, n, n))
        for k in range(n):
            step = np.zeros((n, 1))
            step[k] = h
            dG[..., k] = (self.metric_batch(X + step) - self.metric_batch(X - step)) / (2 * h)
        return dG


def check_spd(G: np.ndarray, X=None) -> None:
    """Raise :class:`NonSPDError` naming the first node where ``G`` fails Cholesky."""
    G = np.asarray(G)
    try:
        np.linalg.cholesky(G)
        if np.all(np.isfinite(G)):
            return
    except np.linalg.LinAlgError:
        pass
    batch = G.reshape(-1, G.shape[-2], G.shape[-1])
    for idx, g in enumerate(batch):
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(g)):
            break
    point = None if X is None else np.asarray(X, dtype=float).reshape(G.shape[-1], -1)[:, idx]
    raise NonSPDError("metric is not symmetric positive definite", point=point, node=idx)


def metric_at(field: MetricField, p) -> np.ndarray:
    """Metric matrix ``G(p)``, checked to be SPD."""
    p = np.asarray(p, dtype=float)
    G = field.metric_batch(p)
    check_spd(G, p)
    return G[0]


def metric_partials(field: MetricField, p) -> np.ndarray:
    """``dG[i, j, k] = d g_ij / d x_k`` at ``p``."""
    return field.partials_batch(np.asarray(p, dtype=float))[0]


def christoffel(field: MetricField, p) -> np.ndarray:
    """Christoffel symbols of the second kind, ``Gamma[i, j, k]``.

    Solves ``G y = rhs`` with a Cholesky factorization for every lower index
    pair instead of forming ``G^{-1}``.
    """
    p = np.asarray(p, dtype=float)
    G = metric_at(field, p)
    dG = metric_partials(field, p)
    n = field.dim
    # first-kind symbols [m, j, k] = d_k g_mj + d_j g_mk - d_m g_jk
    first = dG + dG.transpose(0, 2, 1) - dG.transpose(2, 0, 1)
    try:
        factor = cho_factor(G)
    except LinAlgError as exc:
        raise NonSPDError("metric factorization failed", point=p) from exc
    gamma = 0.5 * cho_solve(factor, first.reshape(n, n * n)).reshape(n, n, n)
    # lower-index symmetry holds exactly in exact arithmetic; remove roundoff
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def inner(field: MetricField, p, u, w) -> float:
    """``<u, w>_g = sum_ij g_ij(p) u_i w_j``."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != (field.dim,) or w.shape != (field.dim,):
        raise ValueError(f"tangent vectors must have shape ({field.dim},)")
    return float(u @ metric_at(field, p) @ w)


def squared_speed(field: MetricField, curve, grid: NodeGrid) -> np.ndarray:
    """``<d_s c, d_s c>_g`` at every node of a sampled curve."""
    X = _curve(field, curve, grid)
    V = X @ diff_matrix(grid).T
    G = field.metric_batch(X)
    check_spd(G, X)
    return np.einsum("ik,kij,jk->k", V, G, V)


def curve_energy(field: MetricField, curve, grid: NodeGrid) -> float:
    """Riemannian energy ``1/2 int <c', c'>_g ds`` by Clenshaw-Curtis quadrature."""
    X = _curve(field, curve, grid)
    if np.all(X == X[:, :1]):
        return 0.0
    return 0.5 * float(clenshaw_curtis_weights(grid) @ squared_speed(field, X, grid))


def curve_length(field: MetricField, curve, grid: NodeGrid) -> float:
    """Riemannian length ``int sqrt(<c', c'>_g) ds`` by Clenshaw-Curtis quadrature."""
    X = _curve(field, curve, grid)
    if np.all(X == X[:, :1]):
        return 0.0
    sp = np.maximum(squared_speed(field, X, grid), 0.0)
    return float(clenshaw_curtis_weights(grid) @ np.sqrt(sp))


def _curve(field, curve, grid) -> np.ndarray:
    X = np.atleast_2d(np.asarray(curve, dtype=float))
    if X.shape != (field.dim, grid.size):
        raise ValueError(f"curve must have shape ({field.dim}, {grid.size}), got {X.shape}")
    return X


# ---------------------------------------------------------------------------
# builtin surfaces; each geometry function maps (n, M) points to (G, dG)


def euclidean_geometry(X, n):
    M = X.shape[1]
    G = np.broadcast_to(np.eye(n), (M, n, n)).copy()
    return G, np.zeros((M, n, n, n))


def sphere_geometry(X, R):
    theta = X[0]
    M = X.shape[1]
    st, ct = np.sin(theta), np.cos(theta)
    G = np.zeros((M, 2, 2))
    G[:, 0, 0] = R * R
    G[:, 1, 1] = R * R * st * st
    dG = np.zeros((M, 2, 2, 2))
    dG[:, 1, 1, 0] = 2.0 * R * R * st * ct
    return G, dG


def torus_geometry(X, a, b):
    phi = X[1]
    M = X.shape[1]
    ring = a + b * np.cos(phi)
    G = np.zeros((M, 2, 2))
    G[:, 0, 0] = ring * ring
    G[:, 1, 1] = b * b
    dG = np.zeros((M, 2, 2, 2))
    dG[:, 0, 0, 1] = -2.0 * ring * b * np.sin(phi)
    return G, dG


def graph_geometry(grad, hess):
    """Induced metric ``I + grad f grad f^T`` and its partials."""
    M = grad.shape[1]
    G = np.einsum("im,jm->mij", grad, grad)
    G[:, 0, 0] += 1.0
    G[:, 1, 1] += 1.0
    # d_k (f_i f_j) = f_ik f_j + f_i f_jk
    dG = np.einsum("ikm,jm->mijk", hess, grad)
    dG = dG + dG.transpose(0, 2, 1, 3)
    return G, dG.reshape(M, 2, 2, 2)


def eggbox_f(x, y):
    return x * x - y * y + 2.0 * np.sin(5.0 * x) * np.cos(5.0 * y)


def eggbox_grad(X):
    x, y = X[0], X[1]
    return np.stack([
        2.0 * x + 10.0 * np.cos(5.0 * x) * np.cos(5.0 * y),
        -2.0 * y - 10.0 * np.sin(5.0 * x) * np.sin(5.0 * y),
    ])


def eggbox_hess(X):
    x, y = X[0], X[1]
    s5x, c5x, s5y, c5y = np.sin(5 * x), np.cos(5 * x), np.sin(5 * y), np.cos(5 * y)
    fxx = 2.0 - 50.0 * s5x * c5y
    fyy = -2.0 - 50.0 * s5x * c5y
    fxy = -50.0 * c5x * s5y
    return np.stack([np.stack([fxx, fxy]), np.stack([fxy, fyy])])


def eggbox_geometry(X):
    return graph_geometry(eggbox_grad(X), eggbox_hess(X))


def geometry_for_kernel(code: int, params, X):
    """Numpy evaluation of a builtin geometry identified by kernel id."""
    if code == EUCLIDEAN:
        return euclidean_geometry(X, X.shape[0])
    if code == SPHERE:
        return sphere_geometry(X, params[0])
    if code == TORUS:
        return torus_geometry(X, params[0], params[1])
    if code == EGGBOX:
        return eggbox_geometry(X)
    raise ValueError(f"unknown kernel id {code}")


def _analytic(code, params, dim, name, named_params):
    def metric(X):
        return geometry_for_kernel(code, params, X)[0]

    def partials(X):
        return geometry_for_kernel(code, params, X)[1]

    return MetricField(dim, metric, partials, vectorized=True, name=name,
                       params=named_params, kernel=(code, tuple(float(v) for v in params)))


def euclidean(n: int = 2) -> MetricField:
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    return _analytic(EUCLIDEAN, (), int(n), "euclidean", {"n": int(n)})


def sphere(R: float = 1.0) -> MetricField:
    """Sphere of radius ``R`` in polar/azimuth chart ``(theta, phi)``."""
    if not (R > 0 and math.isfinite(R)):
        raise ValueError(f"sphere radius must be positive, got {R!r}")
    return _analytic(SPHERE, (float(R),), 2, "sphere", {"R": float(R)})


def torus(a: float = 5.0, b: float = 3.0) -> MetricField:
    """Torus with tube radius ``b`` around a ring of radius ``a``, chart ``(theta, phi)``."""
    if not (a > b > 0 and math.isfinite(a)):
        raise ValueError(f"torus needs a > b > 0, got a={a!r}, b={b!r}")
    return _analytic(TORUS, (float(a), float(b)), 2, "torus", {"a": float(a), "b": float(b)})


def eggbox() -> MetricField:
    """Graph of ``f(x, y) = x^2 - y^2 + 2 sin(5x) cos(5y)``."""
    return _analytic(EGGBOX, (), 2, "eggbox", {})


def graph_surface(f: Callable, grad_f: Callable, hess_f: Optional[Callable] = None) -> MetricField:
    """Induced metric of the graph ``z = f(x, y)``.

    ``grad_f`` and ``hess_f`` act on ``(2, M)`` point arrays and return
    ``(2, M)`` and ``(2, 2, M)``.  Without ``hess_f`` the metric partials fall
    back to finite differences.  ``f`` itself is only kept for reference.
    """

    def metric(X):
        return graph_geometry(np.asarray(grad_f(X), dtype=float).reshape(2, -1),
                              np.zeros((2, 2, X.shape[1])))[0]

    def partials(X):
        return graph_geometry(np.asarray(grad_f(X), dtype=float).reshape(2, -1),
                              np.asarray(hess_f(X), dtype=float).reshape(2, 2, -1))[1]

    field = MetricField(2, metric, partials if hess_f is not None else None, vectorized=True, name="graph_surface")
    field.surface = f
    return field


def from_callable(dim: int, metric: Callable, partials: Optional[Callable] = None,
                  fd_step: float = DEFAULT_FD_STEP, name: str = "custom") -> MetricField:
    """Register a user metric ``metric(x) -> (n, n)`` evaluated point by point."""
    return MetricField(dim, metric, partials, fd_step=fd_step, name=name)


_BUILTINS = {
    "euclidean": (euclidean, {"n"}),
    "sphere": (sphere, {"R"}),
    "torus": (torus, {"a", "b"}),
    "eggbox": (eggbox, set()),
}


def builtin(name: str, **params) -> MetricField:
    """Construct a builtin surface by name: euclidean, sphere, torus, eggbox."""
    try:
        factory, allowed = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin manifold {name!r}; choose from {sorted(_BUILTINS)}") from None
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    return factory(**params)


def from_description(desc: dict) -> MetricField:
    """Build a builtin from ``{"name": ..., "dim": ..., "parameters": {...}}``."""
    desc = dict(desc)
    name = desc.pop("name", None)
    if name is None:
        raise ValueError("manifold description needs a 'name'")
    params = dict(desc.pop("parameters", {}) or {})
    dim = desc.pop("dim", None)
    if desc:
        raise ValueError(f"unknown manifold keys: {sorted(desc)}")
    if name == "euclidean" and dim is not None:
        params.setdefault("n", dim)
    field = builtin(name, **params)
    if dim is not None and dim != field.dim:
        raise ValueError(f"{name} has dimension {field.dim}, description says {dim}")
    return field
