"""Classical fixed-step fourth-order Runge-Kutta helpers."""

from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.typing import NDArray


def rk4_step(
    f: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    t: float,
    y: NDArray[np.float64],
    h: float,
) -> NDArray[np.float64]:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_linear_propagator(A: NDArray[np.float64], h: float) -> NDArray[np.float64]:
    """One RK4 step of ``y' = A y`` as a matrix: the degree-4 Taylor polynomial of ``exp(hA)``."""
    n = A.shape[0]
    hA = h * A
    term = np.eye(n)
    phi = np.eye(n)
    for k in range(1, 5):
        term = term @ hA / k
        phi = phi + term
    return phi
