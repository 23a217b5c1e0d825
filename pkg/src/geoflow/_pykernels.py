"""Numpy implementation of the flow kernels.

Used when the compiled ``_ckernels`` extension is unavailable or disabled.
Every function here has the same signature and return convention as its
compiled twin: arrays are filled in place and the return value is ``-1`` on
success or the index of the first node whose metric failed to factor.
"""

import numpy as np

from .manifold import geometry_for_kernel


def geodesic_accel(G, dG, V, out):
    """``out[i, k] = sum_jl Gamma^i_jl(x_k) V[j, k] V[l, k]``.

    Contracts the first-kind symbols with the velocity before one Cholesky
    solve per node, which is cheaper than forming every ``Gamma^i_jk``.
    """
    # b_m = sum_jl d_l g_mj V_j V_l - 1/2 sum_jl d_m g_jl V_j V_l
    b = np.einsum("kmjl,jk,lk->km", dG, V, V)
    b -= 0.5 * np.einsum("kjlm,jk,lk->km", dG, V, V)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        return _first_bad(G)
    if not np.all(np.isfinite(L)):
        return _first_bad(G)
    y = np.linalg.solve(L, b[..., None])
    y = np.linalg.solve(L.transpose(0, 2, 1), y)[..., 0]
    out[...] = y.T
    return -1


def builtin_rhs(code, params, X, D1, D2, alpha, out):
    """Full method-of-lines right-hand side for an analytic builtin metric."""
    V = X @ D1.T
    A = X @ D2.T
    if code == 0:
        np.multiply(A, alpha, out=out)
    else:
        G, dG = geometry_for_kernel(code, params, X)
        acc = np.empty_like(X)
        status = geodesic_accel(G, dG, V, acc)
        if status >= 0:
            return status
        np.multiply(A + acc, alpha, out=out)
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return -1


def builtin_speed(code, params, X, D1, out):
    """Squared speed ``<V, V>_g`` per node for an analytic builtin metric."""
    V = X @ D1.T
    if code == 0:
        out[...] = np.einsum("ik,ik->k", V, V)
        return -1
    G, _ = geometry_for_kernel(code, params, X)
    out[...] = np.einsum("ik,kij,jk->k", V, G, V)
    return -1


def builtin_metric(code, params, X, G, dG):
    g, dg = geometry_for_kernel(code, params, X)
    G[...] = g
    dG[...] = dg
    return -1


def _first_bad(G):
    for idx, g in enumerate(G):
        try:
            L = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            return idx
        if not np.all(np.isfinite(L)):
            return idx
    return 0


def stage_combine(base, K, coeffs, h, out):
    """``out = base + h * sum_j coeffs[j] * K[j]`` over the first ``len(coeffs)`` stages."""
    m = len(coeffs)
    np.add(base, h * np.tensordot(coeffs, K[:m], axes=1), out=out)
    return -1
