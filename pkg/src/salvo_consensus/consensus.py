"""Left null vectors of pseudo-undirected Laplacians and the consensus they predict.

Under ``x' = -L x`` the quantity ``p @ x`` is conserved for any ``p`` with
``L.T @ p = 0``, so a convergent run settles at ``sum(p * x0) / sum(p)``.
Three ways of obtaining ``p`` are provided so that they can check one another:
a numerical null space, a projection construction working on the incidence
decomposition, and closed forms for cycles and stars.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DegenerateWeightingError,
    NoUnitEigenvectorError,
    NotFoundError,
    RankDeficientError,
    ZeroWeightError,
)
from .graph import (
    IncidenceDecomposition,
    PseudoUndirectedGraph,
    adjacency,
    cycle_graph,
    degree_matrix,
    diameter,
    laplacian,
    star_graph,
)
from .integrate import rk4_linear_propagator

__all__ = [
    "LeftNullVector",
    "ConsensusPrediction",
    "LinearConsensusRun",
    "EventualPositivity",
    "normalize_null_vector",
    "left_null_vector_generic",
    "left_null_vector_projection",
    "closed_form_cycle",
    "closed_form_star",
    "consensus_value",
    "simulate_linear_consensus",
    "check_eventual_positivity",
]

RESIDUAL_RTOL = 1e-9


@dataclass(frozen=True)
class LeftNullVector:
    p: NDArray[np.float64]
    method: str
    residual: float

    @property
    def sign_pattern(self) -> str:
        return "".join("+" if v > 0 else "-" if v < 0 else "0" for v in self.p)


@dataclass(frozen=True)
class ConsensusPrediction:
    value: float
    weights: NDArray[np.float64]
    initial_states: NDArray[np.float64]


def normalize_null_vector(p: ArrayLike) -> NDArray[np.float64]:
    """Scale so that the entry of largest magnitude equals +1."""
    p = np.asarray(p, dtype=float)
    k = int(np.argmax(np.abs(p)))
    if p[k] == 0.0:
        raise RankDeficientError("zero vector cannot be normalised")
    return p / p[k]


def _wrap(p: NDArray[np.float64], method: str, L: NDArray[np.float64]) -> LeftNullVector:
    p = normalize_null_vector(p)
    return LeftNullVector(p=p, method=method, residual=float(np.linalg.norm(L.T @ p)))


def left_null_vector_generic(L: ArrayLike) -> LeftNullVector:
    """Null space of ``L.T`` from the SVD: right singular vector of the smallest singular value.

    Raises:
        RankDeficientError: numerical rank of ``L`` below ``n - 1``.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    _, s, vt = np.linalg.svd(L.T)
    tol = max(L.shape) * np.finfo(float).eps * s[0]
    if n >= 2 and s[-2] <= tol:
        raise RankDeficientError(
            f"Laplacian has numerical rank < {n - 1} (singular values {s})"
        )
    return _wrap(vt[-1], "generic-nullspace", L)


def _null_space_basis_of_incidence(d: IncidenceDecomposition) -> NDArray[np.float64]:
    """Columns spanning N(E) in the [tree | reversed tree | chords | reversed chords] layout.

    A tree edge cancels its reversal; a chord is cancelled by its tree-path
    expression ``-T_tau`` and a reversed chord by ``+T_tau``.
    """
    q, c = d.n_tree, d.n_chords
    I_q, I_c = np.eye(q), np.eye(c)
    Z_qc, Z_cq, Z_cc = np.zeros((q, c)), np.zeros((c, q)), np.zeros((c, c))
    return np.block(
        [
            [I_q, -d.T_tau, d.T_tau],
            [I_q, Z_qc, Z_qc],
            [Z_cq, I_c, Z_cc],
            [Z_cq, Z_cc, I_c],
        ]
    )


def _projector(M: NDArray[np.float64]) -> NDArray[np.float64]:
    return M @ np.linalg.solve(M.T @ M, M.T)


def left_null_vector_projection(d: IncidenceDecomposition, tol: float = 1e-6) -> LeftNullVector:
    """``p`` from the intersection of N(E) and the range of ``W E_out^T``.

    The vector ``v = W E_out^T p`` is the eigenvector of ``P_U P_V`` for the
    eigenvalue 1, where ``P_U`` projects onto N(E) and ``P_V`` onto the range
    of ``V = W E_out^T``; ``p`` is then recovered by least squares.

    Raises:
        ZeroWeightError: some directed weight is zero (``W`` singular).
        NoUnitEigenvectorError: no eigenvalue of ``P_U P_V`` within ``tol`` of 1.
    """
    w = d.weights
    if np.any(w == 0.0):
        raise ZeroWeightError("projection route needs every directed weight nonzero")
    U = _null_space_basis_of_incidence(d)
    V = d.W @ d.E_out.T
    P = _projector(U) @ _projector(V)
    eigvals, eigvecs = np.linalg.eig(P)
    k = int(np.argmin(np.abs(eigvals - 1.0)))
    if abs(eigvals[k] - 1.0) > tol:
        raise NoUnitEigenvectorError(
            f"closest eigenvalue of P_U P_V to 1 is {eigvals[k]:.3g}"
        )
    v = np.real(eigvecs[:, k])
    p = np.linalg.lstsq(V, v, rcond=None)[0]
    return _wrap(p, "projection", d.laplacian())


def _check_nonzero(weights: NDArray[np.float64], what: str) -> None:
    if np.any(weights == 0.0):
        raise ZeroWeightError(f"{what} contain a zero weight")


def closed_form_cycle(forward: Sequence[float], backward: Sequence[float]) -> LeftNullVector:
    """Left null vector of a pseudo-undirected cycle.

    ``forward[k] = w_{k+1,k+2}`` and ``backward[k] = w_{k+2,k+1}`` (indices
    mod n).  Entry ``i`` is

        p_i = sum_{b=0}^{n-1} 1 / (F_i(n-b) * B_i(b+1))

    with ``F_i(k)`` the product of the ``k`` forward weights walked from
    vertex ``i`` and ``B_i(k)`` the product of ``k`` backward weights walked
    from ``i`` the other way round.
    """
    f = np.asarray(forward, dtype=float)
    bw = np.asarray(backward, dtype=float)
    n = f.size
    if n < 3 or bw.size != n:
        raise ValueError("cycle needs n >= 3 forward and backward weights")
    _check_nonzero(f, "forward weights")
    _check_nonzero(bw, "backward weights")

    # w_{v, v+1} = f[v], w_{v, v-1} = bw[v-1]  (0-based vertices, mod n)
    def fwd(v: int) -> float:
        return f[v % n]

    def back(v: int) -> float:
        return bw[(v - 1) % n]

    p = np.zeros(n)
    for i in range(n):
        total = 0.0
        for b in range(n):
            prod = 1.0
            for t in range(n - b):
                prod *= fwd(i + t)
            for t in range(b + 1):
                prod *= back(i - t)
            total += 1.0 / prod
        p[i] = total
    return _wrap(p, "closed-form-cycle", laplacian(cycle_graph(f, bw)))


def closed_form_star(hub_out: Sequence[float], spoke_out: Sequence[float]) -> LeftNullVector:
    """Left null vector of a pseudo-undirected star with hub vertex 1.

    ``hub_out[k] = w_{1,k+2}``, ``spoke_out[k] = w_{k+2,1}``.  Balancing the
    flow through each spoke gives ``p_i = p_1 * w_{1i} / w_{i1}``.
    """
    h = np.asarray(hub_out, dtype=float)
    s = np.asarray(spoke_out, dtype=float)
    if h.size < 1 or h.size != s.size:
        raise ValueError("star needs matching, non-empty hub and spoke weight lists")
    _check_nonzero(h, "hub weights")
    _check_nonzero(s, "spoke weights")
    p1 = float(np.prod(s))
    p = np.concatenate([[p1], p1 * h / s])
    return _wrap(p, "closed-form-star", laplacian(star_graph(h, s)))


def consensus_value(p: LeftNullVector | ArrayLike, x0: ArrayLike) -> ConsensusPrediction:
    """Weighted average ``sum(p_i x_i(0)) / sum(p_i)``.

    Raises:
        DegenerateWeightingError: ``|sum(p)| < 1e-9 * sum(|p|)``.
    """
    vec = p.p if isinstance(p, LeftNullVector) else np.asarray(p, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if vec.shape != x0.shape:
        raise ValueError(f"p has shape {vec.shape} but x0 has shape {x0.shape}")
    total = vec.sum()
    if abs(total) < 1e-9 * np.abs(vec).sum():
        raise DegenerateWeightingError(
            "entries of p sum to (nearly) zero; consensus value undefined"
        )
    return ConsensusPrediction(float(vec @ x0 / total), vec.copy(), x0.copy())


class LinearConsensusRun(NamedTuple):
    times: NDArray[np.float64]
    states: NDArray[np.float64]
    terminal_spread: float
    diverged: bool
    dt: float


def default_linear_dt(L: ArrayLike) -> float:
    rate = float(np.max(np.abs(np.linalg.eigvals(np.asarray(L, dtype=float)))))
    return 1e-3 / rate if rate > 0 else 1e-3


def simulate_linear_consensus(
    L: ArrayLike,
    x0: ArrayLike,
    dt: float | None = None,
    horizon: float = 20.0,
    record_stride: int = 1,
) -> LinearConsensusRun:
    """Fixed-step RK4 integration of ``x' = -L x``.

    ``dt`` defaults to ``1e-3 / max|lambda(L)|``.  The run is flagged as
    diverged once the spread ``max(x) - min(x)`` exceeds ten times its
    initial value (or ten times the largest initial magnitude when the
    initial spread is zero).
    """
    L = np.asarray(L, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    if dt is None:
        dt = default_linear_dt(L)
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(np.ceil(horizon / dt - 1e-9))
    phi = rk4_linear_propagator(-L, dt)

    spread0 = float(np.ptp(x))
    limit = 10.0 * (spread0 if spread0 > 0 else max(float(np.max(np.abs(x))), 1.0))
    diverged = False
    times = [0.0]
    states = [x.copy()]
    for k in range(1, steps + 1):
        x = phi @ x
        if not diverged and np.ptp(x) > limit:
            diverged = True
        if k % record_stride == 0 or k == steps:
            times.append(k * dt)
            states.append(x.copy())
    if not np.all(np.isfinite(x)):
        diverged = True
    return LinearConsensusRun(
        times=np.asarray(times),
        states=np.asarray(states),
        terminal_spread=float(np.ptp(x)),
        diverged=diverged,
        dt=dt,
    )


class EventualPositivity(NamedTuple):
    positive: bool
    exponent: int


def check_eventual_positivity(g: PseudoUndirectedGraph, epsilon: float = 1.0) -> EventualPositivity:
    """Smallest ``k`` with ``(A - D + (2 d_g + eps) I)^k`` entrywise positive.

    Raises:
        ValueError: a weight is not positive, or ``epsilon <= 0``.
        NotFoundError: no ``k <= n`` works.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if any(e.w_ij <= 0 or e.w_ji <= 0 for e in g.edges):
        raise ValueError("eventual positivity check needs positive edge weights")
    A = adjacency(g)
    D = degree_matrix(g)
    d_g = float(np.max(np.diag(D)))
    L_star = A - D + (2.0 * d_g + epsilon) * np.eye(g.n)
    power = np.eye(g.n)
    for k in range(1, g.n + 1):
        power = power @ L_star
        if np.all(power > 0):
            return EventualPositivity(True, k)
    raise NotFoundError(f"no power k <= {g.n} is entrywise positive (diameter {diameter(g)})")
