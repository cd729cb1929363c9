"""Command-line orchestration: matrices | reach | plan | simulate.

Runs are driven by a JSON config and emit deterministic CSV/JSON/SVG
artifacts plus a metadata.json (config echo, seeds, artifact hashes)
sufficient to reproduce the run.  Wall-clock numbers go to a separate
timing.json, the one intentionally non-reproducible file.

Exit codes: 0 success, 2 config error, 3 planning infeasible,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts
from .bezier import (
    boundary_matrix,
    derivative_map,
    diff_matrix,
    elevation_matrix,
    split_matrices,
    vectorization_maps,
)
from .constraints import InfeasibleCertificateError, InfeasibleReductionError
from .lp import IterationLimitError
from .models import (
    ConstraintSet,
    SingularActuationError,
    TrackingCertificate,
    integrator_chain,
    pendulum_energy_controller,
    pendulum_model,
)
from .planner import (
    PlannedTrajectory,
    UnreachableGoalError,
    build_graph,
    controlled_waypoints,
    extract_trajectory,
    sample_vertices,
    search,
)
from .reachability import ReachSpec, sample_cloud
from .sim import DivergenceError, monitor, rollout

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """Invalid or missing config entry, reported with its field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_SENTINEL = object()


def _get(cfg: dict, path: str, kind=None, default=_SENTINEL):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is not _SENTINEL:
                return default
            raise ConfigError(path, "missing required field")
        node = node[part]
    if kind is not None and not isinstance(node, kind):
        names = kind if isinstance(kind, type) else kind[0]
        raise ConfigError(path, f"expected {names.__name__}, got {type(node).__name__}")
    return node


def _number(cfg, path, default=_SENTINEL):
    v = _get(cfg, path, default=default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, "expected a number")
    return float(v)


def _vector(cfg, path, default=_SENTINEL):
    v = _get(cfg, path, default=default)
    if v is default and default is not _SENTINEL:
        return v
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric array") from None
    return arr


def build_model(cfg: dict):
    kind = _get(cfg, "model.kind", str)
    if kind == "pendulum":
        return pendulum_model(
            _number(cfg, "model.mass"),
            _number(cfg, "model.length"),
            _number(cfg, "model.gravity", 9.81),
        )
    if kind == "integrator":
        return integrator_chain(
            int(_number(cfg, "model.gamma")), int(_number(cfg, "model.m"))
        )
    raise ConfigError("model.kind", f"unknown model kind {kind!r}")


def build_certificate(cfg: dict) -> TrackingCertificate:
    return TrackingCertificate(
        e0=_number(cfg, "certificate.e0"),
        lipschitz_e=_number(cfg, "certificate.lipschitz_e", 0.0),
        lipschitz_pi=_number(cfg, "certificate.lipschitz_pi", 1.0),
        lipschitz_psi=_number(cfg, "certificate.lipschitz_psi", 1.0),
        lipschitz_k=_number(cfg, "certificate.lipschitz_k", 1.0),
    )


def build_constraints(cfg: dict) -> ConstraintSet:
    C = _vector(cfg, "constraints.C")
    d = _vector(cfg, "constraints.d")
    W = _get(cfg, "constraints.W", default=None)
    try:
        return ConstraintSet(
            C, d, u_max=_number(cfg, "constraints.u_max"),
            W=None if W is None else np.asarray(W, dtype=float),
        )
    except ValueError as exc:
        raise ConfigError("constraints", str(exc)) from exc


def build_spec(cfg: dict, model, cert, cs) -> ReachSpec:
    policy = _get(cfg, "curve.reference_policy", str, "fixed")
    x_ref = _vector(cfg, "curve.x_ref", None)
    qb = _get(cfg, "curve.q_gamma_bound", default=None)
    try:
        return ReachSpec(
            model=model,
            cert=cert,
            cs=cs,
            order=int(_number(cfg, "curve.order")),
            horizon=_number(cfg, "curve.horizon"),
            refinement=int(_number(cfg, "curve.refinement", 1)),
            reference_policy=policy,
            x_ref=x_ref,
            q_gamma_bound=None if qb is None else float(qb),
        )
    except ValueError as exc:
        raise ConfigError("curve", str(exc)) from exc


def _finish(out: Path, cfg: dict, command: str, seed, files: list[str], t0: float, extra=None):
    timing = {"command": command, "wall_seconds": time.perf_counter() - t0}
    artifacts.write_json(out / "timing.json", timing)
    meta = {
        "command": command,
        "config": cfg,
        "seed": seed,
        "threads": os.environ.get("BEZREACH_THREADS", ""),
        "artifacts": {name: artifacts.sha256_file(out / name) for name in sorted(files)},
    }
    if extra:
        meta.update(extra)
    artifacts.write_json(out / "metadata.json", meta)


def cmd_matrices(cfg: dict, out: Path, seed: int) -> int:
    t0 = time.perf_counter()
    model = build_model(cfg)
    p = int(_number(cfg, "curve.order"))
    T = _number(cfg, "curve.horizon")
    k = int(_number(cfg, "curve.refinement", 1))
    files = []

    def emit(name, M):
        artifacts.write_matrix_csv(out / name, M)
        files.append(name)

    emit("S.csv", diff_matrix(p, T))
    emit("E.csv", elevation_matrix(p))
    emit("H.csv", derivative_map(p, T))
    emit("D.csv", boundary_matrix(p, model.gamma, T))
    for i, Q in enumerate(split_matrices(p, k), start=1):
        emit(f"Q_{i}.csv", Q)
    maps = vectorization_maps(p, model.gamma, model.m, T)
    emit("H_vec.csv", maps.H_vec)
    emit("D_vec.csv", maps.D_vec)
    _finish(out, cfg, "matrices", seed, files, t0)
    return EXIT_OK


def cmd_reach(cfg: dict, out: Path, seed: int) -> int:
    t0 = time.perf_counter()
    model = build_model(cfg)
    cert = build_certificate(cfg)
    cs = build_constraints(cfg)
    spec = build_spec(cfg, model, cert, cs)
    direction = _get(cfg, "reach.direction", str, "forward")
    if direction not in ("forward", "backward"):
        raise ConfigError("reach.direction", "must be 'forward' or 'backward'")
    anchor = _vector(cfg, "reach.anchor")
    count = int(_number(cfg, "reach.samples", 500))
    poly = (
        spec.forward_polytope(anchor)
        if direction == "forward"
        else spec.backward_polytope(anchor)
    )
    files = ["polytope.txt", "cloud.csv"]
    lines = [
        " ".join(artifacts.fmt(v) for v in row) + " <= " + artifacts.fmt(rhs)
        for row, rhs in zip(poly.A, poly.b)
    ]
    (out / "polytope.txt").write_text("\n".join(lines) + "\n")
    pts, ratio = sample_cloud(poly, count, seed=seed)
    artifacts.write_csv(out / "cloud.csv", [f"x{i}" for i in range(poly.dim)], pts)
    if poly.dim == 2:
        artifacts.write_scatter_svg(out / "cloud.svg", pts)
        files.append("cloud.svg")
    _finish(
        out, cfg, "reach", seed, files, t0,
        extra={"empty": bool(pts.shape[0] == 0), "accept_ratio": ratio},
    )
    return EXIT_OK


def _planner_vertices(cfg: dict, model, seed: int):
    lo = _vector(cfg, "planner.bounds.lo")
    hi = _vector(cfg, "planner.bounds.hi")
    count = int(_number(cfg, "planner.count"))
    start = _vector(cfg, "planner.start")
    goal = _vector(cfg, "planner.goal")
    include = [start]
    wp_cfg = _get(cfg, "planner.waypoints", default=None)
    if wp_cfg is not None:
        kind = _get(cfg, "planner.waypoints.kind", str)
        if kind == "pendulum-energy":
            ctrl = pendulum_energy_controller(
                _number(cfg, "model.mass"),
                _number(cfg, "model.length"),
                _number(cfg, "model.gravity", 9.81),
                u_pump=_number(cfg, "planner.waypoints.u_pump"),
                u_catch=_number(cfg, "planner.waypoints.u_catch"),
            )
            two_pi = 2.0 * np.pi

            def near_upright(x):
                dth = x[0] - two_pi * round(x[0] / two_pi)
                return abs(dth) < 0.015 and abs(x[1]) < 0.03

            hop = 2.0 * _number(cfg, "curve.horizon")
            wps = controlled_waypoints(
                model, start, ctrl, hop,
                max_hops=int(_number(cfg, "planner.waypoints.max_hops", 400)),
                stop=near_upright,
            )
            include.extend(list(wps[1:]))
        elif kind == "explicit":
            include.extend(list(_vector(cfg, "planner.waypoints.points")))
        else:
            raise ConfigError("planner.waypoints.kind", f"unknown kind {kind!r}")
    include.append(goal)
    verts = sample_vertices((lo, hi), count, seed=seed, include=include)
    return verts, count, verts.shape[0] - 1


def cmd_plan(cfg: dict, out: Path, seed: int) -> int:
    t0 = time.perf_counter()
    model = build_model(cfg)
    cert = build_certificate(cfg)
    cs = build_constraints(cfg)
    spec = build_spec(cfg, model, cert, cs)
    goal = _vector(cfg, "planner.goal")
    if not cs.contains(goal):
        print(f"planner.goal: {goal.tolist()} outside the state constraint set",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    verts, i_start, i_goal = _planner_vertices(cfg, model, seed)
    edge_rule = _get(cfg, "planner.edge_rule", str, "intersection")
    graph = build_graph(verts, spec, seed=seed, edge_rule=edge_rule)
    try:
        path = search(graph, i_start, i_goal)
    except UnreachableGoalError as exc:
        print(f"planning infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    traj = extract_trajectory(graph, path)

    res = rollout(
        model, traj, cs, cert,
        kp=_number(cfg, "sim.gains.kp", 0.5),
        kd=_number(cfg, "sim.gains.kd", 0.5),
        disturbance=_get(cfg, "sim.disturbance", str, "zero"),
        seed=seed,
        dt=_get(cfg, "sim.dt", default=None),
    )
    report = monitor(res, cs)

    files = ["graph.json", "trajectory.json", "trajectory.csv", "rollout.csv",
             "summary.json"]
    artifacts.write_json(out / "graph.json", graph.to_json_dict())
    artifacts.write_json(out / "trajectory.json", traj.to_json_dict())
    ts = np.linspace(0.0, traj.total_duration,
                     int(_number(cfg, "output.trajectory_samples", 400)))
    states = traj.sample_states(ts)
    qg = traj.sample_q_gamma(ts)
    artifacts.write_csv(
        out / "trajectory.csv",
        ["t"] + [f"x{i}" for i in range(model.n)] + [f"q{j}" for j in range(model.m)],
        np.column_stack([ts, states.T, qg.T]),
    )
    artifacts.write_csv(
        out / "rollout.csv",
        ["t"] + [f"x{i}" for i in range(model.n)] + [f"u{j}" for j in range(model.m)]
        + ["state_margin", "input_margin"],
        np.column_stack([res.t, res.x_cl.T, res.u.T, res.state_margin, res.input_margin]),
    )
    artifacts.write_json(out / "summary.json", {
        "path": [int(i) for i in path],
        "path_edges": len(path) - 1,
        "graph_edges": len(graph.edges),
        "vertices": int(verts.shape[0]),
        "monitor_passed": report.passed,
        "min_state_margin": report.min_state_margin,
        "min_input_margin": report.min_input_margin,
        "total_duration": traj.total_duration,
    })
    if model.n == 2:
        artifacts.write_polyline_svg(out / "trajectory.svg", states.T)
        files.append("trajectory.svg")
    _finish(out, cfg, "plan", seed, files, t0)
    return EXIT_OK


def cmd_simulate(cfg: dict, out: Path, seed: int) -> int:
    t0 = time.perf_counter()
    model = build_model(cfg)
    cert = build_certificate(cfg)
    cs = build_constraints(cfg)
    traj_path = _get(cfg, "sim.trajectory", str)
    try:
        doc = json.loads(Path(traj_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("sim.trajectory", f"cannot load trajectory: {exc}") from exc
    traj = PlannedTrajectory.from_json_dict(doc)
    res = rollout(
        model, traj, cs, cert,
        kp=_number(cfg, "sim.gains.kp", 0.5),
        kd=_number(cfg, "sim.gains.kd", 0.5),
        disturbance=_get(cfg, "sim.disturbance", str, "zero"),
        seed=seed,
        disturbance_scale=_number(cfg, "sim.disturbance_scale", 1.0),
        dt=_get(cfg, "sim.dt", default=None),
    )
    report = monitor(res, cs)
    files = ["rollout.csv", "summary.json"]
    artifacts.write_csv(
        out / "rollout.csv",
        ["t"] + [f"x{i}" for i in range(model.n)] + [f"u{j}" for j in range(model.m)]
        + ["state_margin", "input_margin"],
        np.column_stack([res.t, res.x_cl.T, res.u.T, res.state_margin, res.input_margin]),
    )
    artifacts.write_json(out / "summary.json", {
        "monitor_passed": report.passed,
        "min_state_margin": report.min_state_margin,
        "min_input_margin": report.min_input_margin,
        "violation": res.violation,
        "steps": report.steps,
    })
    _finish(out, cfg, "simulate", seed, files, t0)
    return EXIT_OK


COMMANDS = {
    "matrices": cmd_matrices,
    "reach": cmd_reach,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bezreach",
        description="Polytopic reachability certificates over Bezier control points",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else int(_get(cfg, "seed", default=0))
    try:
        return COMMANDS[args.command](cfg, out, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleCertificateError, InfeasibleReductionError) as exc:
        print(f"planning infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, IterationLimitError, SingularActuationError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
