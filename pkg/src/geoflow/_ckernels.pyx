# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flow kernels.

Mirrors ``_pykernels`` function for function.  Arrays are C-contiguous
float64, filled in place; each call returns -1 on success or the index of
the first node whose metric failed to factor.
"""

from libc.math cimport sin, cos, sqrt
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport dgemm

cdef enum:
    EUCLIDEAN = 0
    SPHERE = 1
    TORUS = 2
    EGGBOX = 3


cdef void _apply_t(const double[:, ::1] X, const double[:, ::1] D, double[:, ::1] out) noexcept nogil:
    # out = X @ D.T; in column-major terms out^T = D X^T
    cdef int n = X.shape[0]
    cdef int M = X.shape[1]
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef char ta = b'T'
    cdef char tb = b'N'
    dgemm(&ta, &tb, &M, &n, &M, &one, <double*>&D[0, 0], &M,
          <double*>&X[0, 0], &M, &zero, &out[0, 0], &M)


cdef int _geom2(int code, const double* p, double x0, double x1,
                double* g, double* dg) noexcept nogil:
    # g = [g00, g01, g11]; dg[i*4 + j*2 + k] = d g_ij / d x_k
    cdef double s, c, ring, fx, fy, fxx, fxy, fyy, s5x, c5x, s5y, c5y
    cdef int t
    for t in range(8):
        dg[t] = 0.0
    if code == SPHERE:
        s = sin(x0)
        c = cos(x0)
        g[0] = p[0] * p[0]
        g[1] = 0.0
        g[2] = p[0] * p[0] * s * s
        dg[6] = 2.0 * p[0] * p[0] * s * c
    elif code == TORUS:
        ring = p[0] + p[1] * cos(x1)
        g[0] = ring * ring
        g[1] = 0.0
        g[2] = p[1] * p[1]
        dg[1] = -2.0 * ring * p[1] * sin(x1)
    elif code == EGGBOX:
        s5x = sin(5.0 * x0)
        c5x = cos(5.0 * x0)
        s5y = sin(5.0 * x1)
        c5y = cos(5.0 * x1)
        fx = 2.0 * x0 + 10.0 * c5x * c5y
        fy = -2.0 * x1 - 10.0 * s5x * s5y
        fxx = 2.0 - 50.0 * s5x * c5y
        fyy = -2.0 - 50.0 * s5x * c5y
        fxy = -50.0 * c5x * s5y
        g[0] = 1.0 + fx * fx
        g[1] = fx * fy
        g[2] = 1.0 + fy * fy
        dg[0] = 2.0 * fx * fxx
        dg[1] = 2.0 * fx * fxy
        dg[2] = fxx * fy + fx * fxy
        dg[3] = fxy * fy + fx * fyy
        dg[4] = dg[2]
        dg[5] = dg[3]
        dg[6] = 2.0 * fy * fxy
        dg[7] = 2.0 * fy * fyy
    else:
        return 1
    return 0


cdef int _accel2(const double* g, const double* dg, double v0, double v1,
                 double* a0, double* a1) noexcept nogil:
    # Gamma^i_jl v_j v_l for n = 2 via a Cholesky solve of G y = b
    cdef double v[2]
    cdef double b[2]
    cdef double l00, l10, l11, d, y0
    cdef int m, j, l
    v[0] = v0
    v[1] = v1
    for m in range(2):
        b[m] = 0.0
        for j in range(2):
            for l in range(2):
                b[m] += (dg[m * 4 + j * 2 + l] - 0.5 * dg[j * 4 + l * 2 + m]) * v[j] * v[l]
    if not g[0] > 0.0:
        return 1
    l00 = sqrt(g[0])
    l10 = g[1] / l00
    d = g[2] - l10 * l10
    if not d > 0.0:
        return 1
    l11 = sqrt(d)
    y0 = b[0] / l00
    a1[0] = (b[1] - l10 * y0) / l11
    a1[0] = a1[0] / l11
    a0[0] = (y0 - l10 * a1[0]) / l00
    return 0


def builtin_rhs(int code, tuple params, const double[:, ::1] X, const double[:, ::1] D1,
                const double[:, ::1] D2, double alpha, double[:, ::1] out):
    """Full method-of-lines right-hand side for an analytic builtin metric."""
    cdef int n = X.shape[0]
    cdef int M = X.shape[1]
    cdef double p[2]
    cdef double g[3]
    cdef double dg[8]
    cdef double a0, a1
    cdef int k, i, bad = -1
    p[0] = params[0] if len(params) > 0 else 0.0
    p[1] = params[1] if len(params) > 1 else 0.0
    V = bytearray(8 * n * M)
    cdef double[:, ::1] Vv = memoryview(V).cast('d', (n, M))
    with nogil:
        _apply_t(X, D1, Vv)
        _apply_t(X, D2, out)
        if code == EUCLIDEAN:
            for i in range(n):
                for k in range(1, M - 1):
                    out[i, k] = alpha * out[i, k]
        else:
            for k in range(1, M - 1):
                _geom2(code, p, X[0, k], X[1, k], g, dg)
                if _accel2(g, dg, Vv[0, k], Vv[1, k], &a0, &a1):
                    bad = k
                    break
                out[0, k] = alpha * (out[0, k] + a0)
                out[1, k] = alpha * (out[1, k] + a1)
        for i in range(n):
            out[i, 0] = 0.0
            out[i, M - 1] = 0.0
    return bad


def builtin_speed(int code, tuple params, const double[:, ::1] X,
                  const double[:, ::1] D1, double[:] out):
    """Squared speed per node for an analytic builtin metric."""
    cdef int n = X.shape[0]
    cdef int M = X.shape[1]
    cdef double p[2]
    cdef double g[3]
    cdef double dg[8]
    cdef int k, i
    cdef double acc
    p[0] = params[0] if len(params) > 0 else 0.0
    p[1] = params[1] if len(params) > 1 else 0.0
    V = bytearray(8 * n * M)
    cdef double[:, ::1] Vv = memoryview(V).cast('d', (n, M))
    with nogil:
        _apply_t(X, D1, Vv)
        for k in range(M):
            if code == EUCLIDEAN:
                acc = 0.0
                for i in range(n):
                    acc += Vv[i, k] * Vv[i, k]
                out[k] = acc
            else:
                _geom2(code, p, X[0, k], X[1, k], g, dg)
                out[k] = (g[0] * Vv[0, k] * Vv[0, k] + 2.0 * g[1] * Vv[0, k] * Vv[1, k]
                          + g[2] * Vv[1, k] * Vv[1, k])
    return -1


def builtin_metric(int code, tuple params, const double[:, ::1] X,
                   double[:, :, ::1] G, double[:, :, :, ::1] dG):
    """Fill ``G`` and ``dG`` from the analytic builtin definition."""
    cdef int n = X.shape[0]
    cdef int M = X.shape[1]
    cdef double p[2]
    cdef double g[3]
    cdef double dg[8]
    cdef int k, i, j, l
    p[0] = params[0] if len(params) > 0 else 0.0
    p[1] = params[1] if len(params) > 1 else 0.0
    with nogil:
        for k in range(M):
            if code == EUCLIDEAN:
                for i in range(n):
                    for j in range(n):
                        G[k, i, j] = 1.0 if i == j else 0.0
                        for l in range(n):
                            dG[k, i, j, l] = 0.0
            else:
                _geom2(code, p, X[0, k], X[1, k], g, dg)
                G[k, 0, 0] = g[0]
                G[k, 0, 1] = g[1]
                G[k, 1, 0] = g[1]
                G[k, 1, 1] = g[2]
                for i in range(2):
                    for j in range(2):
                        for l in range(2):
                            dG[k, i, j, l] = dg[i * 4 + j * 2 + l]
    return -1


def geodesic_accel(const double[:, :, ::1] G, const double[:, :, :, ::1] dG,
                   const double[:, ::1] V, double[:, ::1] out):
    """``out[i, k] = sum_jl Gamma^i_jl(x_k) V[j, k] V[l, k]`` for any dimension."""
    cdef int n = V.shape[0]
    cdef int M = V.shape[1]
    cdef int k, m, j, l, bad = -1
    cdef double s, vj
    cdef double* L = <double*>malloc(n * n * sizeof(double))
    cdef double* b = <double*>malloc(n * sizeof(double))
    if L == NULL or b == NULL:
        free(L)
        free(b)
        raise MemoryError()
    with nogil:
        for k in range(M):
            for m in range(n):
                s = 0.0
                for j in range(n):
                    vj = V[j, k]
                    for l in range(n):
                        s += (dG[k, m, j, l] - 0.5 * dG[k, j, l, m]) * vj * V[l, k]
                b[m] = s
            # Cholesky G = L L^T, lower triangle row-major
            for j in range(n):
                s = G[k, j, j]
                for l in range(j):
                    s -= L[j * n + l] * L[j * n + l]
                if not s > 0.0:
                    bad = k
                    break
                L[j * n + j] = sqrt(s)
                for m in range(j + 1, n):
                    s = G[k, m, j]
                    for l in range(j):
                        s -= L[m * n + l] * L[j * n + l]
                    L[m * n + j] = s / L[j * n + j]
            if bad >= 0:
                break
            for j in range(n):
                s = b[j]
                for l in range(j):
                    s -= L[j * n + l] * b[l]
                b[j] = s / L[j * n + j]
            for j in range(n - 1, -1, -1):
                s = b[j]
                for l in range(j + 1, n):
                    s -= L[l * n + j] * b[l]
                b[j] = s / L[j * n + j]
            for m in range(n):
                out[m, k] = b[m]
    free(L)
    free(b)
    return bad


def stage_combine(const double[:, ::1] base, const double[:, :, ::1] K,
                  const double[::1] coeffs, double h, double[:, ::1] out):
    """``out = base + h * sum_j coeffs[j] * K[j]`` over the first ``len(coeffs)`` stages."""
    cdef int n = base.shape[0]
    cdef int M = base.shape[1]
    cdef int m = coeffs.shape[0]
    cdef int i, k, j
    cdef double s
    with nogil:
        for i in range(n):
            for k in range(M):
                s = 0.0
                for j in range(m):
                    s += coeffs[j] * K[j, i, k]
                out[i, k] = base[i, k] + h * s
    return -1
