"""Single-edge robustness of the edge-agreement protocol.

Perturbing the weight of one directed edge by ``delta`` turns the
edge-agreement dynamics ``x' = A x`` into ``x' = (A + B delta C) x`` with

    A = -E_tau^T E_out W R^T,   B = -E_tau^T E_out e,   C = e^T R^T,

so the loop closes around ``M(s) = C (sI - A)^{-1} B`` and the characteristic
polynomial becomes ``det(sI - A) * (1 - delta * M(s))``.  A negative
``delta`` destabilises the protocol first where ``M(jw)`` sits on the
negative real axis; the smallest ``1/|M(jw)|`` over those points is the
effective gain margin of the edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .errors import SingularAtZeroError
from .graph import IncidenceDecomposition

__all__ = [
    "EdgeTransferFunction",
    "MarginReport",
    "edge_transfer_function",
    "frequency_response",
    "phase_crossovers",
    "gain_margin",
    "unit_weight_margin_closed_form",
    "nyquist_trace",
    "edge_agreement_matrix",
    "is_stable",
    "destabilizing_perturbation",
]

SWEEP_POINTS = 4096


@dataclass(frozen=True)
class EdgeTransferFunction:
    A: NDArray[np.float64]
    B: NDArray[np.float64]
    C: NDArray[np.float64]
    edge: int
    pair: tuple[int, int]
    weight: float
    near_singular: bool = False

    def __call__(self, s: complex | ArrayLike) -> NDArray[np.complex128] | complex:
        return frequency_response(self, s)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass(frozen=True)
class MarginReport:
    crossover_frequencies: list[float]
    gains_at_crossover: list[float]
    effective_gain_margin: float
    min_admissible_weight: float
    nominal_weight: float
    pair: tuple[int, int]

    @property
    def margins(self) -> list[float]:
        return [1.0 / g if g > 0 else np.inf for g in self.gains_at_crossover]


def edge_agreement_matrix(d: IncidenceDecomposition, edge: int | None = None, delta: float = 0.0) -> NDArray[np.float64]:
    """``-E_tau^T E_out (W + e delta e^T) R^T``."""
    W = d.W.copy()
    if edge is not None:
        W[edge, edge] += delta
    return -d.E_tau.T @ d.E_out @ W @ d.R.T


def edge_transfer_function(d: IncidenceDecomposition, edge: int | tuple[int, int]) -> EdgeTransferFunction:
    """State-space realisation of the uncertainty loop for one directed edge.

    ``edge`` is either the column index in the decomposition or a
    ``(tail, head)`` vertex pair.

    Raises:
        SingularAtZeroError: the system matrix is singular.
    """
    if isinstance(edge, tuple):
        edge = d.edge_index(*edge)
    two_m = d.W.shape[0]
    if not 0 <= edge < two_m:
        raise IndexError(f"edge index {edge} outside 0..{two_m - 1}")
    e = np.zeros(two_m)
    e[edge] = 1.0
    A = edge_agreement_matrix(d)
    B = -d.E_tau.T @ d.E_out @ e
    C = e @ d.R.T
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] == 0.0 or sv[-1] < np.finfo(float).eps * sv[0]:
        raise SingularAtZeroError("edge-agreement matrix is singular")
    near_singular = bool(sv[-1] < 1e-8 * sv[0])
    return EdgeTransferFunction(
        A=A, B=B, C=C, edge=edge, pair=d.edges[edge], weight=float(d.W[edge, edge]),
        near_singular=near_singular,
    )


def frequency_response(tf: EdgeTransferFunction, s: complex | ArrayLike):
    """``M(s)`` via one linear solve per point (scalar in, scalar out)."""
    s_arr = np.asarray(s, dtype=complex)
    scalar = s_arr.ndim == 0
    s_arr = np.atleast_1d(s_arr)
    k = tf.A.shape[0]
    mats = s_arr[:, None, None] * np.eye(k)[None] - tf.A[None]
    rhs = np.broadcast_to(tf.B.astype(complex), (s_arr.size, k))[..., None]
    x = np.linalg.solve(mats, rhs)[..., 0]
    out = x @ tf.C
    return complex(out[0]) if scalar else out


def _default_omega_max(tf: EdgeTransferFunction) -> float:
    return 1e3 * tf.spectral_radius


def phase_crossovers(
    tf: EdgeTransferFunction,
    omega_max: float | None = None,
    n_points: int = SWEEP_POINTS,
) -> list[float]:
    """Non-negative frequencies where ``M(jw)`` lies on the negative real axis.

    ``w = 0`` is tested directly (``M(0) < 0``); positive crossovers come from
    sign changes of ``Im M(jw)`` on a log-spaced sweep, kept when ``Re M < 0``
    and refined by bracketing root search to 1e-10 relative.
    """
    if omega_max is None:
        omega_max = _default_omega_max(tf)
    if omega_max <= 0:
        raise ValueError("omega_max must be positive")
    n_points = max(int(n_points), SWEEP_POINTS)

    found: list[float] = []
    if frequency_response(tf, 0.0).real < 0:
        found.append(0.0)

    grid = np.geomspace(omega_max * 1e-9, omega_max, n_points)
    resp = frequency_response(tf, 1j * grid)
    im = resp.imag

    def imag_at(w: float) -> float:
        return frequency_response(tf, 1j * w).imag

    for k in range(n_points - 1):
        a, b = grid[k], grid[k + 1]
        if im[k] == 0.0:
            root = a
        elif np.sign(im[k]) != np.sign(im[k + 1]) and im[k + 1] != 0.0:
            root = brentq(imag_at, a, b, xtol=1e-14, rtol=1e-10)
        else:
            continue
        if frequency_response(tf, 1j * root).real < 0:
            found.append(float(root))
    return found


def gain_margin(tf: EdgeTransferFunction, omega_max: float | None = None) -> MarginReport:
    """Effective gain margin: ``min 1/|M(j w_pc)|`` over all phase crossovers."""
    omegas = phase_crossovers(tf, omega_max)
    gains = [float(abs(frequency_response(tf, 1j * w))) for w in omegas]
    margins = [1.0 / g if g > 0 else np.inf for g in gains]
    effective = min(margins) if margins else np.inf
    return MarginReport(
        crossover_frequencies=omegas,
        gains_at_crossover=gains,
        effective_gain_margin=float(effective),
        min_admissible_weight=float(tf.weight - effective),
        nominal_weight=tf.weight,
        pair=tf.pair,
    )


def unit_weight_margin_closed_form(topology: str, n: int) -> float:
    """Gain margins of the all-unity cycle and star.

    ``topology`` is ``"cycle"``, ``"star-hub-edge"`` or ``"star-spoke-edge"``.
    Roles follow the direction information travels: the hub edge carries the
    hub's state to a spoke, i.e. its weight is ``w_i1`` (row ``i`` of ``L``);
    the spoke edge carries a spoke's state to the hub, weight ``w_1i``.
    """
    if topology == "cycle":
        if n < 3:
            raise ValueError("cycle needs n >= 3")
        return 2.0 / (1.0 - 1.0 / n)
    if topology in ("star-hub-edge", "star-spoke-edge"):
        if n < 2:
            raise ValueError("star needs n >= 2")
        return n / (n - 1.0) if topology == "star-hub-edge" else float(n)
    raise ValueError(f"unknown topology {topology!r}")


def nyquist_trace(tf: EdgeTransferFunction, omega_grid: Sequence[float]) -> NDArray[np.float64]:
    """Rows of ``(omega, Re M(j omega), Im M(j omega))`` for ``omega >= 0``."""
    w = np.asarray(omega_grid, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega grid must be non-negative")
    m = frequency_response(tf, 1j * w)
    return np.column_stack([w, m.real, m.imag])


def is_stable(A: NDArray[np.float64], tol: float = 1e-10) -> bool:
    return bool(np.max(np.linalg.eigvals(A).real) < -tol)


def destabilizing_perturbation(
    d: IncidenceDecomposition,
    edge: int | tuple[int, int],
    delta_max: float | None = None,
    n_grid: int = 2000,
    rtol: float = 1e-10,
) -> float:
    """Smallest ``|delta|`` (``delta < 0``) that destabilises the edge-agreement matrix.

    Found by eigenvalue tests alone: a log-spaced scan locates the first
    unstable perturbation, then bisection narrows the boundary.  Returns
    ``inf`` if the scan up to ``delta_max`` never loses stability.
    """
    if isinstance(edge, tuple):
        edge = d.edge_index(*edge)
    if delta_max is None:
        delta_max = 1e4 * max(1.0, float(np.abs(d.weights).sum()))
    scale = np.geomspace(1e-6, delta_max, n_grid)

    def stable(mag: float) -> bool:
        return is_stable(edge_agreement_matrix(d, edge, -mag), tol=0.0)

    lo = 0.0
    hi = None
    for mag in scale:
        if stable(mag):
            lo = mag
        else:
            hi = mag
            break
    if hi is None:
        return np.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
