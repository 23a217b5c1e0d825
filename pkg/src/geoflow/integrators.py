"""Explicit Runge-Kutta steppers for the method-of-lines system.

Each stepper wraps a right-hand side ``f(X) -> dX/dtau`` and exposes
``advance(X) -> (X_new, h)`` returning one accepted step.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import kernels
from .errors import NonFiniteError

# extent of the stability region along the negative real axis
RK4_REAL_STABILITY = 2.785
DOPRI5_REAL_STABILITY = 3.306


@lru_cache(maxsize=64)
def dirichlet_spectral_radius(D: int) -> float:
    """Largest |eigenvalue| of the second-derivative matrix with pinned ends."""
    from .chebyshev import _second_diff

    if D < 2:
        return 0.0
    inner = _second_diff(D)[1:-1, 1:-1]
    return float(np.max(np.abs(np.linalg.eigvals(inner))))


def stable_step(D: int, alpha: float, integrator: str = "rk45", safety: float = 0.8) -> float:
    """Step size at ``safety`` times the explicit stability limit of the flat flow."""
    rho = dirichlet_spectral_radius(D)
    if rho == 0.0:
        return np.inf
    limit = RK4_REAL_STABILITY if integrator == "rk4" else DOPRI5_REAL_STABILITY
    return safety * limit / (alpha * rho)


class RK4:
    """Classical fourth-order Runge-Kutta with a fixed step."""

    def __init__(self, f, h: float):
        if not h > 0:
            raise ValueError("fixed step must be positive")
        self.f = f
        self.h = float(h)
        self.nfev = 0

    def advance(self, X):
        f, h = self.f, self.h
        k1 = f(X)
        k2 = f(X + (0.5 * h) * k1)
        k3 = f(X + (0.5 * h) * k2)
        k4 = f(X + h * k3)
        self.nfev += 4
        return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), h


class DormandPrince:
    """Adaptive Dormand-Prince 5(4) pair with absolute error control.

    The local error estimate is the max-norm difference between the fifth
    and fourth order solutions.  ``h_max`` caps the step below the explicit
    stability limit; at the limit the controller lets stiff modes hover at
    the tolerance, and their rate of change then masks convergence.
    """

    C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
    A = (
        (),
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    )
    B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
    B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
    E = B - B_LOW
    _A_ROWS = tuple(np.array(row, dtype=float) for row in A)

    def __init__(self, f, atol: float = 1e-8, h0: float = 1e-3, h_max: float = np.inf,
                 h_min: float = 1e-14, max_rejects: int = 100):
        self.f = f
        self.atol = float(atol)
        self.h = min(float(h0), h_max)
        self.h_max = float(h_max)
        self.h_min = float(h_min)
        self.max_rejects = max_rejects
        self.nfev = 0
        self.rejected = 0
        self._k_first = None
        self._K = None

    def advance(self, X):
        f = self.f
        combine = kernels.stage_combine
        if self._K is None or self._K.shape[1:] != X.shape:
            self._K = np.empty((7,) + X.shape)
            self._zero = np.zeros_like(X)
        K = self._K
        if self._k_first is None:
            self._k_first = f(X)
            self.nfev += 1
        K[0] = self._k_first
        err = np.empty_like(X)
        for _ in range(self.max_rejects):
            h = self.h
            for i in range(1, 7):
                Y = np.empty_like(X)
                combine(X, K, self._A_ROWS[i], h, Y)
                K[i] = f(Y)
            self.nfev += 6
            # stage 7 is evaluated at the fifth-order solution (FSAL)
            X_new = Y
            combine(self._zero, K, self.E, h, err)
            ratio = float(np.max(np.abs(err))) / self.atol
            if not np.isfinite(ratio):
                factor = 0.2
            elif ratio == 0.0:
                factor = 5.0
            else:
                factor = min(5.0, max(0.2, 0.9 * ratio ** -0.2))
            if ratio <= 1.0:
                self.h = min(h * factor, self.h_max)
                self._k_first = K[6].copy()
                return X_new, h
            self.rejected += 1
            self.h = h * min(factor, 0.9)
            if self.h < self.h_min:
                break
        raise NonFiniteError(f"step size underflow (h={self.h:.3g}) after repeated rejections")
