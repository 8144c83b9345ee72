"""Command-line entry point: ``salvo-consensus <subcommand> SCENARIO [options]``.

Exit codes: 0 success, 1 analysis failure (divergence, failed check,
unsynchronised salvo), 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from . import __version__
from .consensus import (
    check_eventual_positivity,
    closed_form_cycle,
    closed_form_star,
    consensus_value,
    left_null_vector_generic,
    left_null_vector_projection,
    simulate_linear_consensus,
)
from .engagement import (
    guidance_command,
    initial_states,
    kinematics_derivative,
    simulate_salvo,
    tgo_dynamics,
    tgo_rate_finite_difference,
    time_to_go,
)
from .errors import (
    ConsensusError,
    EngagementError,
    GraphError,
    SalvoFailure,
    ScenarioError,
    SingularAtZeroError,
)
from .graph import (
    cycle_weights,
    diameter,
    incidence_decomposition,
    laplacian,
    star_weights,
)
from .robustness import (
    destabilizing_perturbation,
    edge_transfer_function,
    gain_margin,
    is_stable,
    edge_agreement_matrix,
    nyquist_trace,
)
from .scenario import ScenarioConfig, load_scenario, parse_override, shipped_scenario

EXIT_OK, EXIT_ANALYSIS, EXIT_INPUT = 0, 1, 2
CSV_COLUMNS = ["t", "i", "x", "y", "r", "theta_deg", "delta_deg", "a_cmd", "a_applied", "t_go"]


class InputError(Exception):
    pass


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def _resolve_scenario(arg: str, overrides: Sequence[str]) -> ScenarioConfig:
    path = Path(arg)
    if not path.exists():
        try:
            path = shipped_scenario(arg)
        except FileNotFoundError:
            raise InputError(f"scenario {arg!r} not found") from None
    cfg = load_scenario(path)
    if overrides:
        try:
            extra = dict(parse_override(o) for o in overrides)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        cfg = cfg.with_overrides(extra)
    return cfg


def _null_vectors(cfg: ScenarioConfig) -> list:
    g = cfg.effective_graph()
    L = laplacian(g)
    routes = [left_null_vector_generic(L)]
    try:
        routes.append(left_null_vector_projection(incidence_decomposition(g)))
    except ConsensusError:
        pass
    cw, sw = cycle_weights(g), star_weights(g)
    try:
        if cw is not None:
            routes.append(closed_form_cycle(*cw))
        elif sw is not None:
            routes.append(closed_form_star(*sw))
    except ConsensusError:
        pass
    return routes


def _initial_tgo(cfg: ScenarioConfig) -> np.ndarray:
    states, tgt = initial_states(cfg)
    return np.array([time_to_go(s, tgt) for s in states])


# -- subcommands -------------------------------------------------------------

def cmd_predict(args, out: TextIO) -> int:
    cfg = _resolve_scenario(args.scenario, args.override)
    tg = _initial_tgo(cfg)
    routes = _null_vectors(cfg)
    pred = consensus_value(routes[0], tg)
    if args.json:
        doc = {
            "scenario": cfg.name,
            "t_go0_s": [float(v) for v in tg],
            "null_vectors": {r.method: [float(v) for v in r.p] for r in routes},
            "consensus_value_s": pred.value,
        }
        json.dump(doc, out, indent=2)
        out.write("\n")
        return EXIT_OK
    out.write(f"scenario: {cfg.name}\n")
    out.write("t_go(0) [s]: " + " ".join(f"{v:.4f}" for v in tg) + "\n")
    for r in routes:
        out.write(f"p ({r.method}): " + " ".join(_fmt(v) for v in r.p) + f"  residual {r.residual:.2e}\n")
    out.write(f"consensus value [s]: {pred.value:.6f}\n")
    return EXIT_OK


def _edge_from_args(args) -> tuple[int, int]:
    i, j = args.edge
    return (i, j) if args.direction == "ij" else (j, i)


def _transfer(cfg: ScenarioConfig, edge: tuple[int, int]):
    d = incidence_decomposition(cfg.effective_graph())
    try:
        d.edge_index(*edge)
    except GraphError:
        raise InputError(f"no directed edge {edge[0]}->{edge[1]} in the graph") from None
    return d, edge_transfer_function(d, edge)


def cmd_margin(args, out: TextIO) -> int:
    cfg = _resolve_scenario(args.scenario, args.override)
    edge = _edge_from_args(args)
    d, tf = _transfer(cfg, edge)
    rep = gain_margin(tf, omega_max=args.omega_max)
    out.write(f"scenario: {cfg.name}\n")
    out.write(f"edge: e_{edge[0]}{edge[1]} (w_{edge[0]}{edge[1]} = {_fmt(rep.nominal_weight)})\n")
    out.write("phase crossovers [rad/s]: " + " ".join(_fmt(w) for w in rep.crossover_frequencies) + "\n")
    out.write("|M(j w_pc)|: " + " ".join(_fmt(v) for v in rep.gains_at_crossover) + "\n")
    out.write(f"effective gain margin: {rep.effective_gain_margin:.6f}\n")
    out.write(f"minimum admissible weight: {rep.min_admissible_weight:.6f}\n")
    nominal_ok = is_stable(edge_agreement_matrix(d))
    if not nominal_ok:
        out.write("warning: nominal edge-agreement dynamics are not stable\n")
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_nyquist(args, out: TextIO) -> int:
    cfg = _resolve_scenario(args.scenario, args.override)
    _, tf = _transfer(cfg, _edge_from_args(args))
    if args.omega_min <= 0 or args.omega_max <= args.omega_min or args.points < 2:
        raise InputError("need 0 < omega-min < omega-max and at least 2 points")
    grid = np.geomspace(args.omega_min, args.omega_max, args.points)
    if args.include_zero:
        grid = np.concatenate([[0.0], grid])
    rows = nyquist_trace(tf, grid)
    with _open_out(args.output, out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "re", "im"])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return EXIT_OK


class _open_out:
    def __init__(self, target: str | None, default: TextIO):
        self.target, self.default, self.fh = target, default, None

    def __enter__(self) -> TextIO:
        if self.target in (None, "-"):
            return self.default
        self.fh = open(self.target, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()


def write_trace_csv(trace, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    deg = np.degrees
    for k in range(trace.t.size):
        for i in range(trace.n):
            w.writerow([
                _fmt(trace.t[k]), i + 1,
                _fmt(trace.x[k, i]), _fmt(trace.y[k, i]), _fmt(trace.r[k, i]),
                _fmt(deg(trace.theta[k, i])), _fmt(deg(trace.delta[k, i])),
                _fmt(trace.a_cmd[k, i]), _fmt(trace.a_applied[k, i]), _fmt(trace.t_go[k, i]),
            ])


def _write_summary(trace, fh: TextIO, title: str) -> None:
    s = trace.summary
    fh.write(f"scenario: {title}\n")
    fh.write(f"status: {s.status}\n")
    fh.write("interception times [s]: " + " ".join(
        "-" if not math.isfinite(v) else f"{v:.4f}" for v in s.interception_times) + "\n")
    fh.write("miss distances [m]: " + " ".join(
        "-" if not math.isfinite(v) else f"{v:.4f}" for v in s.miss_distances) + "\n")
    spread = "-" if not math.isfinite(s.spread) else f"{s.spread:.6f}"
    fh.write(f"spread [s]: {spread}\n")
    if math.isfinite(s.spread):
        fh.write(f"common impact time [s]: {s.mean_interception_time:.4f}\n")
    if s.predicted_impact_time is not None:
        fh.write(f"predicted impact time [s]: {s.predicted_impact_time:.4f}\n")
    fh.write(f"saturation count: {s.saturation_count}\n")
    fh.write(f"v_theta guard count: {s.guard_count}\n")
    fh.write(f"salvo success: {'yes' if s.success else 'no'}\n")


def cmd_simulate(args, out: TextIO) -> int:
    cfg = _resolve_scenario(args.scenario, args.override)
    if args.dt is not None:
        if args.dt <= 0:
            raise InputError("--dt must be positive")
        cfg = replace(cfg, engagement=replace(cfg.engagement, dt_s=args.dt))
    if args.stride < 1:
        raise InputError("--stride must be >= 1")
    summary_fh = sys.stderr if args.output == "-" else out
    code = EXIT_OK
    try:
        trace = simulate_salvo(cfg, record_stride=args.stride)
    except SalvoFailure as exc:
        trace = exc.trace
        summary_fh.write(f"error: {type(exc).__name__}: {exc}\n")
        code = EXIT_ANALYSIS
    if args.output is not None and trace is not None:
        with _open_out(args.output, out) as fh:
            write_trace_csv(trace, fh)
    if trace is not None:
        _write_summary(trace, summary_fh, cfg.name)
        if not trace.summary.success:
            code = EXIT_ANALYSIS
    return code


# -- check -------------------------------------------------------------------

def _check_suite(cfg: ScenarioConfig) -> list[tuple[str, bool, str]]:
    results: list[tuple[str, bool, str]] = []

    def run(name: str, fn: Callable[[], tuple[bool, str]]) -> None:
        try:
            ok, detail = fn()
        except (ConsensusError, SingularAtZeroError, EngagementError, GraphError, ArithmeticError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, ok, detail))

    g = cfg.effective_graph()
    L = laplacian(g)
    d = incidence_decomposition(g)
    tg = _initial_tgo(cfg)

    def nominal_stability():
        lam = np.linalg.eigvals(-L)
        lam = lam[np.argsort(np.abs(lam))][1:]
        worst = float(np.max(lam.real))
        return worst < 0, f"largest nonzero eigenvalue real part of -L: {worst:.6g}"

    def routes_agree():
        routes = _null_vectors(cfg)
        ref = routes[0].p
        dev = max(float(np.max(np.abs(r.p - ref))) for r in routes)
        names = ", ".join(r.method for r in routes)
        return dev < 1e-8 and len(routes) >= 2, f"{len(routes)} routes ({names}); max deviation {dev:.2e}"

    def residual():
        r = left_null_vector_generic(L)
        return r.residual < 1e-9 * max(1.0, np.abs(L).max()), f"||L^T p|| = {r.residual:.2e}"

    def margins_vs_bisection():
        if not is_stable(edge_agreement_matrix(d)):
            return True, "skipped (nominal edge-agreement dynamics unstable)"
        worst = 0.0
        for e in d.edges:
            rep = gain_margin(edge_transfer_function(d, e))
            brute = destabilizing_perturbation(d, e)
            if math.isinf(rep.effective_gain_margin) and math.isinf(brute):
                continue
            worst = max(worst, abs(rep.effective_gain_margin - brute) / brute)
        return worst < 0.01, f"{len(d.edges)} edges; worst relative gap {worst:.2e}"

    def tgo_consistency():
        states, tgt = initial_states(cfg)
        worst = 0.0
        for i, s in enumerate(states):
            k = kinematics_derivative(s, tgt, 0.0)
            accs = [s.V_M * k.theta_dot, guidance_command(i, states, tgt, L, a_max=math.inf, tgo=tg).applied]
            for a in accs:
                an, fd = tgo_dynamics(s, tgt, a), tgo_rate_finite_difference(s, tgt, a)
                worst = max(worst, abs(an - fd) / max(1.0, abs(fd)))
        return worst < 1e-5, f"worst relative gap {worst:.2e}"

    def guidance_closes_loop():
        states, tgt = initial_states(cfg)
        want = -1.0 - L @ tg
        got = np.array([
            tgo_dynamics(s, tgt, guidance_command(i, states, tgt, L, a_max=math.inf, tgo=tg).applied)
            for i, s in enumerate(states)
        ])
        gap = float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want))))
        return gap < 1e-9, f"worst relative gap {gap:.2e}"

    def eventual_positivity():
        if any(e.w_ij <= 0 or e.w_ji <= 0 for e in g.edges):
            return True, "skipped (non-positive weight present)"
        ep = check_eventual_positivity(g)
        return ep.exponent <= diameter(g), f"k = {ep.exponent}, diameter = {diameter(g)}"

    def conservation():
        p = left_null_vector_generic(L).p
        run_ = simulate_linear_consensus(L, tg, horizon=1.0)
        q0, q1 = p @ run_.states[0], p @ run_.states[-1]
        drift = abs(q1 - q0) / max(abs(q0), 1e-300)
        return drift < 1e-6, f"relative drift of p^T x over 1 s: {drift:.2e}"

    def prediction_finite():
        v = consensus_value(left_null_vector_generic(L), tg).value
        return math.isfinite(v), f"consensus value {v:.6f} s"

    run("nominal protocol stable", nominal_stability)
    run("null-vector routes agree", routes_agree)
    run("left null vector residual", residual)
    run("consensus value defined", prediction_finite)
    run("gain margin matches eigenvalue bisection", margins_vs_bisection)
    run("t_go dynamics match finite difference", tgo_consistency)
    run("guidance closes the consensus loop", guidance_closes_loop)
    run("eventual positivity within diameter", eventual_positivity)
    run("p^T x conserved under linear protocol", conservation)
    return results


def cmd_check(args, out: TextIO) -> int:
    cfg = _resolve_scenario(args.scenario, args.override)
    results = _check_suite(cfg)
    out.write(f"scenario: {cfg.name}\n")
    for name, ok, detail in results:
        out.write(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}\n")
    failed = sum(not ok for _, ok, _ in results)
    out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_ANALYSIS


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="salvo-consensus", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario file or name of a bundled scenario")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="edge weight override, e.g. w:1:2:ij=-8.51 (repeatable)")

    def edge(sp):
        sp.add_argument("--edge", nargs=2, type=int, required=True, metavar=("I", "J"))
        sp.add_argument("--direction", choices=["ij", "ji"], default="ij",
                        help="ij perturbs w_ij, ji perturbs w_ji")

    sp = sub.add_parser("predict", help="initial time-to-go, left null vectors and consensus value")
    common(sp)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("margin", help="single-edge gain margin")
    common(sp)
    edge(sp)
    sp.add_argument("--omega-max", type=float, default=None)
    sp.set_defaults(func=cmd_margin)

    sp = sub.add_parser("nyquist", help="frequency response CSV (omega, re, im)")
    common(sp)
    edge(sp)
    sp.add_argument("--omega-min", type=float, default=1e-3)
    sp.add_argument("--omega-max", type=float, default=1e3)
    sp.add_argument("--points", type=int, default=400)
    sp.add_argument("--include-zero", action="store_true")
    sp.add_argument("--output", default=None, help="CSV path ('-' or omitted: stdout)")
    sp.set_defaults(func=cmd_nyquist)

    sp = sub.add_parser("simulate", help="nonlinear salvo simulation")
    common(sp)
    sp.add_argument("--output", default=None, help="trajectory CSV path ('-' for stdout)")
    sp.add_argument("--stride", type=int, default=10, help="record every N-th step")
    sp.add_argument("--dt", type=float, default=None, help="override integration step [s]")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check", help="cross-method invariant suite")
    common(sp)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except (InputError, ScenarioError, GraphError, FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (ConsensusError, SingularAtZeroError, EngagementError) as exc:
        sys.stderr.write(f"analysis error: {type(exc).__name__}: {exc}\n")
        return EXIT_ANALYSIS


def run(argv: Sequence[str]) -> tuple[int, str]:
    """Invoke the CLI in-process and capture stdout."""
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
