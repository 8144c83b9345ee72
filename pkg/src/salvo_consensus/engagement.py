"""Planar many-on-one engagement under cooperative deviated-pursuit guidance.

Each interceptor flies at constant speed ``V_M`` and steers only its
flight-path angle.  With ``delta = gamma_M - theta`` held constant the
time-to-go against a constant-velocity target has the closed form
``time_to_go``; the cooperative law adds a correction proportional to the
neighbours' disagreement ``sum_j l_ij t_go_j`` so that
``d(t_go_i)/dt = -1 - sum_j l_ij t_go_j``, i.e. the time-to-go values run
the linear consensus protocol shifted by the common clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DeviationNearQuadratureError,
    RangeCollapsedError,
    SalvoDivergedError,
    SalvoTimeoutError,
)

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

__all__ = [
    "G",
    "COS_DELTA_MIN",
    "V_THETA_EPS",
    "InterceptorState",
    "TargetState",
    "KinematicRates",
    "GuidanceOutput",
    "SimulationTrace",
    "SalvoSummary",
    "wrap_angle",
    "time_to_go",
    "kinematics_derivative",
    "tgo_dynamics",
    "guidance_command",
    "simulate_salvo",
    "simulate_engagement",
    "tgo_rate_finite_difference",
    "initial_states",
]

G = 9.81
COS_DELTA_MIN = 1e-6
V_THETA_EPS = 1e-3


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class InterceptorState:
    r: float
    theta: float
    gamma_M: float
    V_M: float
    position: tuple[float, float] = (0.0, 0.0)

    @property
    def delta(self) -> float:
        return wrap_angle(self.gamma_M - self.theta)


@dataclass(frozen=True)
class TargetState:
    V_T: float
    gamma_T: float
    position: tuple[float, float] = (0.0, 0.0)

    def position_at(self, t: float, origin: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
        return (
            origin[0] + self.V_T * math.cos(self.gamma_T) * t,
            origin[1] + self.V_T * math.sin(self.gamma_T) * t,
        )


def _upsilon(V_M: float, V_T: float) -> float:
    ups = V_M * V_M - V_T * V_T
    if ups <= 0:
        raise ValueError("interceptor must be faster than target")
    return ups


def _cos_delta(delta: float) -> float:
    c = math.cos(delta)
    if abs(c) < COS_DELTA_MIN:
        raise DeviationNearQuadratureError(f"|cos(delta)| = {abs(c):.3g} is too small")
    return c


def time_to_go(s: InterceptorState, t: TargetState) -> float:
    """Exact time-to-go under constant-deviation pursuit.

    ``t_go = (r / (V_M^2 - V_T^2)) * (V_M + V_T cos(gamma_T - theta + delta)) / cos(delta)``
    """
    if s.r < 0:
        raise ValueError("range must be non-negative")
    ups = _upsilon(s.V_M, t.V_T)
    if s.r == 0.0:
        return 0.0
    d = s.delta
    c = _cos_delta(d)
    return s.r / ups * (s.V_M + t.V_T * math.cos(t.gamma_T - s.theta + d)) / c


class KinematicRates(NamedTuple):
    r_dot: float
    theta_dot: float
    gamma_M_dot: float
    x_dot: float
    y_dot: float
    V_r: float
    V_theta: float


def kinematics_derivative(
    s: InterceptorState,
    t: TargetState,
    a_M: float,
    capture_radius: float = 0.0,
) -> KinematicRates:
    """Polar engagement kinematics relative to a constant-velocity target.

    Raises:
        RangeCollapsedError: ``r`` is not above ``capture_radius``.
    """
    if s.r <= capture_radius or s.r <= 0.0:
        raise RangeCollapsedError(f"range {s.r} at or below capture radius {capture_radius}")
    d = s.delta
    V_r = t.V_T * math.cos(t.gamma_T - s.theta) - s.V_M * math.cos(d)
    V_theta = t.V_T * math.sin(t.gamma_T - s.theta) - s.V_M * math.sin(d)
    return KinematicRates(
        r_dot=V_r,
        theta_dot=V_theta / s.r,
        gamma_M_dot=a_M / s.V_M,
        x_dot=s.V_M * math.cos(s.gamma_M),
        y_dot=s.V_M * math.sin(s.gamma_M),
        V_r=V_r,
        V_theta=V_theta,
    )


def tgo_dynamics(s: InterceptorState, t: TargetState, a_M: float) -> float:
    """Rate of change of ``time_to_go`` along the kinematics for lateral acceleration ``a_M``.

    ``-1 - r V_theta sec^2(delta) / (V_M * Upsilon) * (a_M - V_M * theta_dot)``
    """
    ups = _upsilon(s.V_M, t.V_T)
    c = _cos_delta(s.delta)
    rates = kinematics_derivative(s, t, a_M)
    return -1.0 - s.r * rates.V_theta / (c * c * s.V_M * ups) * (a_M - s.V_M * rates.theta_dot)


class GuidanceOutput(NamedTuple):
    commanded: float
    applied: float
    consensus_term: float
    saturated: bool
    guarded: bool


def _consensus_gain(r: float, V_M: float, ups: float, cos_d: float, V_theta: float) -> float:
    return V_M * ups * cos_d * cos_d / (r * V_theta)


def guidance_command(
    i: int,
    states: Sequence[InterceptorState],
    target: TargetState,
    L: ArrayLike,
    a_max: float = 40.0 * G,
    last_consensus_term: float = 0.0,
    tgo: Sequence[float] | None = None,
) -> GuidanceOutput:
    """Cooperative lateral acceleration for interceptor ``i`` (0-based).

    ``a_M = V_M theta_dot + V_M Upsilon cos^2(delta) / (r V_theta) * sum_j l_ij t_go_j``

    saturated to ``[-a_max, a_max]``.  Only row ``i`` of ``L`` is read.  When
    ``|V_theta| < V_THETA_EPS`` the consensus term is replaced by
    ``last_consensus_term``.  ``tgo`` may supply the exchanged time-to-go
    values; otherwise they are computed from ``states``.
    """
    row = np.asarray(L, dtype=float)[i]
    s = states[i]
    if tgo is None:
        tgo = [time_to_go(x, target) if row[j] != 0.0 else 0.0 for j, x in enumerate(states)]
    disagreement = float(row @ np.asarray(tgo, dtype=float))
    rates = kinematics_derivative(s, target, 0.0)
    ups = _upsilon(s.V_M, target.V_T)
    cos_d = _cos_delta(s.delta)
    guarded = abs(rates.V_theta) < V_THETA_EPS
    if guarded:
        term = last_consensus_term
    else:
        term = _consensus_gain(s.r, s.V_M, ups, cos_d, rates.V_theta) * disagreement
    cmd = s.V_M * rates.theta_dot + term
    applied = min(max(cmd, -a_max), a_max)
    return GuidanceOutput(cmd, applied, term, applied != cmd, guarded)


@dataclass
class SalvoSummary:
    interception_times: NDArray[np.float64]
    miss_distances: NDArray[np.float64]
    spread: float
    success: bool
    saturation_count: int
    guard_count: int
    predicted_impact_time: float | None = None
    status: str = "intercepted"

    @property
    def mean_interception_time(self) -> float:
        return float(np.mean(self.interception_times))


@dataclass
class SimulationTrace:
    """Sampled run history; arrays are indexed ``[sample, interceptor]``."""

    t: NDArray[np.float64]
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    r: NDArray[np.float64]
    theta: NDArray[np.float64]
    delta: NDArray[np.float64]
    gamma_M: NDArray[np.float64]
    a_cmd: NDArray[np.float64]
    a_applied: NDArray[np.float64]
    t_go: NDArray[np.float64]
    active: NDArray[np.bool_]
    target_xy: NDArray[np.float64]
    summary: SalvoSummary | None = None
    events: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.r.shape[1])

    @property
    def spread_series(self) -> NDArray[np.float64]:
        """``max_i t_go - min_i t_go`` at every sample."""
        return np.ptp(self.t_go, axis=1)

    @property
    def impact_estimate(self) -> NDArray[np.float64]:
        """``t + t_go`` per interceptor at every sample."""
        return self.t[:, None] + self.t_go


class _Recorder:
    def __init__(self, n: int):
        self.rows: dict[str, list] = {k: [] for k in (
            "t", "x", "y", "r", "theta", "delta", "gamma_M", "a_cmd", "a_applied", "t_go", "active", "target_xy",
        )}

    def add(self, **kw) -> None:
        for k, v in kw.items():
            self.rows[k].append(np.array(v, copy=True))

    def build(self) -> SimulationTrace:
        arr = {k: np.asarray(v) for k, v in self.rows.items()}
        return SimulationTrace(**arr)


def _vector_tgo(r, delta, theta, V_M, V_T, gamma_T, ups):
    return r / ups * (V_M + V_T * np.cos(gamma_T - theta + delta)) / np.cos(delta)


def simulate_engagement(
    L: ArrayLike,
    r0: ArrayLike,
    theta0: ArrayLike,
    gamma0: ArrayLike,
    V_M: ArrayLike,
    V_T: float,
    gamma_T: float,
    a_max: float = 40.0 * G,
    capture_radius: float = 1.0,
    sync_tol: float = 0.1,
    dt: float = 1e-3,
    t_max: float = 600.0,
    record_stride: int = 1,
    divergence_window: float = 5.0,
) -> SimulationTrace:
    """Fixed-step RK4 salvo simulation (angles in radians, 0-based interceptors).

    Neighbour time-to-go values are exchanged once per step from the
    step-start snapshot; each interceptor's own terms are re-evaluated at
    every RK4 stage.  An interceptor that has reached the capture radius
    keeps reporting ``t_hit - t`` to its neighbours.  Interception time is
    the zero crossing of ``r`` linearly extrapolated across the final step.
    An interceptor whose range starts opening once its time-to-go is spent
    is retired as a miss: its closest-approach time and distance are
    recorded and the run status becomes ``"missed"``.

    Raises:
        SalvoDivergedError: some time-to-go rose at every step for
            ``divergence_window`` seconds, or the state became non-finite.
        SalvoTimeoutError: survivors remain after ``t_max``.
    """
    L = np.asarray(L, dtype=float)
    r = np.asarray(r0, dtype=float).copy()
    theta = np.asarray(theta0, dtype=float).copy()
    gam = np.asarray(gamma0, dtype=float).copy()
    V_M = np.broadcast_to(np.asarray(V_M, dtype=float), r.shape).copy()
    n = r.size
    if L.shape != (n, n):
        raise ValueError(f"Laplacian shape {L.shape} does not match {n} interceptors")
    if np.any(V_M <= V_T):
        raise ValueError("interceptor must be faster than target")
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    ups = V_M**2 - V_T**2
    gain = V_M * ups
    vt_c, vt_s = V_T * math.cos(gamma_T), V_T * math.sin(gamma_T)
    # target starts at the origin; interceptors sit at range r along LOS theta behind it
    px = -r * np.cos(theta)
    py = -r * np.sin(theta)

    active = np.ones(n, dtype=bool)
    t_hit = np.full(n, np.nan)
    miss = np.full(n, np.nan)
    last_term = np.zeros(n)
    sat_count = 0
    guard_count = 0
    rising_since = np.full(n, np.nan)
    rec = _Recorder(n)
    events: list[str] = []

    def exchanged_tgo(t_now: float) -> NDArray[np.float64]:
        delta = np.remainder(gam - theta + np.pi, 2 * np.pi) - np.pi
        quad = active & (np.abs(np.cos(delta)) < COS_DELTA_MIN)
        if np.any(quad):
            k = int(np.argmax(quad)) + 1
            raise SalvoDivergedError(
                f"deviation angle of interceptor {k} reached quadrature at t = {t_now:.3f} s (t_go unbounded)"
            )
        tg = np.where(active, _vector_tgo(r, delta, theta, V_M, V_T, gamma_T, ups), t_hit - t_now)
        return tg

    def accel(rs, ths, gs, disagreement):
        d = gs - ths
        cos_d = np.cos(d)
        V_th = V_T * np.sin(gamma_T - ths) - V_M * np.sin(d)
        th_dot = V_th / rs
        guarded = np.abs(V_th) < V_THETA_EPS
        if guarded.any():
            safe = np.where(guarded, 1.0, V_th)
            term = np.where(guarded, last_term, gain * cos_d * cos_d / (rs * safe) * disagreement)
        else:
            term = gain * cos_d * cos_d / (rs * V_th) * disagreement
        cmd = V_M * th_dot + term
        app = np.clip(cmd, -a_max, a_max)
        return cmd, app, term, guarded, th_dot, cos_d

    def deriv(Y, disagreement, live):
        rs, ths, gs = Y[0], Y[1], Y[2]
        _, app, _, _, th_dot, cos_d = accel(rs, ths, gs, disagreement)
        out = np.empty_like(Y)
        out[0] = V_T * np.cos(gamma_T - ths) - V_M * cos_d
        out[1] = th_dot
        out[2] = app / V_M
        out[3] = V_M * np.cos(gs)
        out[4] = V_M * np.sin(gs)
        return out * live

    def record(t_now, tg, cmd, app):
        delta = np.remainder(gam - theta + np.pi, 2 * np.pi) - np.pi
        rec.add(
            t=t_now, x=px, y=py, r=r, theta=theta, delta=delta, gamma_M=gam,
            a_cmd=cmd, a_applied=app, t_go=tg, active=active,
            target_xy=(vt_c * t_now, vt_s * t_now),
        )

    t_now = 0.0
    step = 0
    prev_tg = None
    status = "intercepted"
    try:
        while np.any(active):
            if t_now >= t_max - 0.5 * dt:
                status = "timeout"
                raise SalvoTimeoutError(
                    f"{int(np.sum(active))} interceptor(s) still airborne at t = {t_now:.3f} s"
                )
            try:
                tg = exchanged_tgo(t_now)
            except SalvoDivergedError:
                status = "diverged"
                raise
            if not np.all(np.isfinite(tg)):
                status = "diverged"
                raise SalvoDivergedError(f"non-finite time-to-go at t = {t_now:.3f} s")
            if prev_tg is not None:
                rising = active & (tg > prev_tg)
                rising_since = np.where(rising, np.where(np.isnan(rising_since), t_now, rising_since), np.nan)
                long = rising & (t_now - rising_since >= divergence_window)
                if np.any(long):
                    status = "diverged"
                    idx = int(np.argmax(long)) + 1
                    raise SalvoDivergedError(
                        f"time-to-go of interceptor {idx} rose for {divergence_window:g} s (t = {t_now:.3f} s)"
                    )
            prev_tg = tg
            disagreement = L @ tg
            mask = active.copy()
            live = mask.astype(float)

            rs = np.where(mask, r, 1.0)
            cmd, app, term, guarded, *_ = accel(rs, theta, gam, disagreement)
            guarded &= mask
            cmd = np.where(mask, cmd, 0.0)
            app = np.where(mask, app, 0.0)
            sat_count += int(np.sum(mask & (app != cmd)))
            guard_count += int(np.sum(guarded))
            if step % record_stride == 0:
                record(t_now, tg, cmd, app)

            Y = np.stack([rs, theta, gam, px, py])
            k1 = deriv(Y, disagreement, live)
            k2 = deriv(Y + (0.5 * dt) * k1, disagreement, live)
            k3 = deriv(Y + (0.5 * dt) * k2, disagreement, live)
            k4 = deriv(Y + dt * k3, disagreement, live)
            Y = Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            last_term = np.where(guarded, last_term, term)
            r_old = r
            r = np.where(mask, Y[0], r)
            theta, gam, px, py = Y[1], Y[2], Y[3], Y[4]
            t_next = (step + 1) * dt

            hit = mask & (r <= capture_radius)
            if np.any(hit):
                closing = r_old - r
                frac = np.where(closing > 0, r_old / np.where(closing > 0, closing, 1.0), 1.0)
                t_hit = np.where(hit, t_now + dt * frac, t_hit)
                miss = np.where(hit, np.maximum(r, 0.0), miss)
                active = active & ~hit
                for k in np.flatnonzero(hit):
                    events.append(f"interceptor {k + 1} captured at t = {t_hit[k]:.6f} s")
            # range opening with no time left: the interceptor flew past the target
            flyby = mask & ~hit & (r > r_old) & (tg <= 0.0)
            if np.any(flyby):
                t_hit = np.where(flyby, t_now, t_hit)
                miss = np.where(flyby, r_old, miss)
                active = active & ~flyby
                status = "missed"
                for k in np.flatnonzero(flyby):
                    events.append(f"interceptor {k + 1} passed the target at {r_old[k]:.3f} m, t = {t_now:.6f} s")
            if not np.all(np.isfinite(r)):
                status = "diverged"
                raise SalvoDivergedError(f"non-finite state at t = {t_next:.3f} s")
            step += 1
            t_now = t_next
        tg = t_hit - t_now
        record(t_now, tg, np.zeros(n), np.zeros(n))
    except (SalvoTimeoutError, SalvoDivergedError) as exc:
        trace = rec.build()
        trace.events = events
        trace.summary = _summary(t_hit, miss, sync_tol, sat_count, guard_count, status)
        exc.trace = trace
        raise

    trace = rec.build()
    trace.events = events
    trace.summary = _summary(t_hit, miss, sync_tol, sat_count, guard_count, status)
    return trace


def _summary(t_hit, miss, sync_tol, sat_count, guard_count, status) -> SalvoSummary:
    done = t_hit[np.isfinite(t_hit)]
    spread = float(np.ptp(done)) if done.size == t_hit.size else math.inf
    return SalvoSummary(
        interception_times=t_hit.copy(),
        miss_distances=miss.copy(),
        spread=spread,
        success=bool(status == "intercepted" and spread <= sync_tol),
        saturation_count=sat_count,
        guard_count=guard_count,
        status=status,
    )


def simulate_salvo(scenario: "ScenarioConfig", record_stride: int = 1) -> SimulationTrace:
    """Run the salvo described by a loaded scenario."""
    from .consensus import consensus_value, left_null_vector_generic
    from .graph import laplacian

    L = laplacian(scenario.effective_graph())
    ic = scenario.interceptors
    eng = scenario.engagement
    trace = simulate_engagement(
        L,
        r0=[x.r0_m for x in ic],
        theta0=[math.radians(x.theta0_deg) for x in ic],
        gamma0=[math.radians(x.gammaM0_deg) for x in ic],
        V_M=[x.V_M_mps for x in ic],
        V_T=scenario.target.V_T_mps,
        gamma_T=math.radians(scenario.target.gammaT_deg),
        a_max=eng.a_max_g * G,
        capture_radius=eng.capture_radius_m,
        sync_tol=eng.sync_tol_s,
        dt=eng.dt_s,
        t_max=eng.t_max_s,
        record_stride=record_stride,
        divergence_window=eng.divergence_window_s,
    )
    try:
        pred = consensus_value(left_null_vector_generic(L), trace.t_go[0]).value
        trace.summary.predicted_impact_time = pred
    except ArithmeticError:
        pass
    return trace


def tgo_rate_finite_difference(s: InterceptorState, t: TargetState, a_M: float, h: float = 1e-4) -> float:
    """Central difference of ``time_to_go`` along the kinematic vector field.

    Independent of ``tgo_dynamics``: it only evaluates the closed-form
    time-to-go at two states displaced by ``+-h`` along ``(r', theta', gamma_M')``.
    """
    k = kinematics_derivative(s, t, a_M)

    def shifted(sign: float) -> InterceptorState:
        return InterceptorState(
            r=s.r + sign * h * k.r_dot,
            theta=s.theta + sign * h * k.theta_dot,
            gamma_M=s.gamma_M + sign * h * k.gamma_M_dot,
            V_M=s.V_M,
        )

    return (time_to_go(shifted(1.0), t) - time_to_go(shifted(-1.0), t)) / (2.0 * h)


def initial_states(scenario: "ScenarioConfig") -> tuple[list[InterceptorState], TargetState]:
    """Interceptor and target states at ``t = 0`` (target at the origin)."""
    out = []
    for x in scenario.interceptors:
        th = math.radians(x.theta0_deg)
        out.append(InterceptorState(
            r=x.r0_m, theta=th, gamma_M=math.radians(x.gammaM0_deg), V_M=x.V_M_mps,
            position=(-x.r0_m * math.cos(th), -x.r0_m * math.sin(th)),
        ))
    tgt = TargetState(V_T=scenario.target.V_T_mps, gamma_T=math.radians(scenario.target.gammaT_deg))
    return out, tgt
