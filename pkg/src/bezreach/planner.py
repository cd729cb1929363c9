"""Sampling-based reachability graph and certified trajectory extraction.

Vertices are uniform state samples; a directed edge (i, j) exists when
the forward set of v_i intersects the backward set of v_j, with the
intersection witness stored for trajectory extraction.  Paths come from
uniform-cost search; every extracted segment is re-verified against its
certificate polytope before being returned.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .bezier import (
    BezierCurve,
    basis_matrix,
    bernstein_basis,
    derivative_map,
    state_matrix,
)
from .reachability import ReachSpec


class EmptyGraphError(ValueError):
    """Graph construction asked for zero vertices."""


class UnreachableGoalError(RuntimeError):
    """No path between the requested vertices."""

    def __init__(self, message: str, component_size: int):
        super().__init__(message)
        self.component_size = component_size


class InternalInconsistencyError(RuntimeError):
    """A stored edge failed certificate re-verification (bug signal)."""


def sample_vertices(
    bounds: tuple[np.ndarray, np.ndarray],
    count: int,
    seed: int,
    include: tuple = (),
) -> np.ndarray:
    """Uniform i.i.d. vertex samples in a state box, deterministic per
    seed, with any `include` states (start/goal) appended."""
    lo = np.asarray(bounds[0], dtype=float).reshape(-1)
    hi = np.asarray(bounds[1], dtype=float).reshape(-1)
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ValueError("invalid sampling box")
    if count < 1:
        raise EmptyGraphError("vertex count must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(count, lo.shape[0]))
    extras = [np.asarray(x, dtype=float).reshape(-1) for x in include]
    if extras:
        pts = np.vstack([pts] + [e[None, :] for e in extras])
    return pts


def controlled_waypoints(
    model,
    x0: np.ndarray,
    controller,
    hop: float,
    max_hops: int,
    stop=None,
    dt: float = 1e-3,
) -> np.ndarray:
    """Waypoints from rolling out u = controller(x) under the planning
    model, one waypoint per `hop` seconds (RK4, fixed step).

    Seeding graph vertices with waypoints of a coarse policy keeps the
    sampled graph connected when the certified tubes are narrow; the
    edges between them are still certificate-checked like any others.
    `stop(x)` truthy ends the rollout early.
    """
    x = np.asarray(x0, dtype=float).copy()
    wps = [x.copy()]
    steps = int(round(hop / dt))
    if steps < 1:
        raise ValueError("hop must exceed dt")
    for _ in range(max_hops):
        for _ in range(steps):
            def f(y):
                return model.state_derivative(y, np.atleast_1d(controller(y)))

            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        wps.append(x.copy())
        if stop is not None and stop(x):
            break
    return np.array(wps)


@dataclass
class ReachGraph:
    vertices: np.ndarray
    edges: dict  # (i, j) -> witness state
    seed: int
    spec: ReachSpec
    edge_rule: str = "intersection"

    @property
    def edge_cost(self) -> float:
        return 2.0 * self.spec.horizon

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.edges if a == i)

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "edge_rule": self.edge_rule,
            "vertex_count": int(self.vertices.shape[0]),
            "vertices": self.vertices.tolist(),
            "edges": [
                {"from": int(i), "to": int(j), "witness": w.tolist()}
                for (i, j), w in sorted(self.edges.items())
            ],
        }


def _boxes_overlap(box_a, box_b) -> bool:
    if box_a is None or box_b is None:
        return False
    return bool(np.all(box_a[0] <= box_b[1] + 1e-9) and np.all(box_b[0] <= box_a[1] + 1e-9))


def build_graph(
    vertices: np.ndarray,
    spec: ReachSpec,
    seed: int = 0,
    edge_rule: str = "intersection",
) -> ReachGraph:
    """All-pairs edge construction.

    edge_rule "intersection" follows the two-horizon witness test
    F(v_i) n B(v_j) != {}; "forward" is the cheaper one-horizon test
    v_j in F(v_i) (witness v_j).  Cheap vectorized witness candidates
    and bounding-box separation cut the number of LP calls.
    """
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    V = vertices.shape[0]
    if V == 0:
        raise EmptyGraphError("no vertices")
    fwd = [spec.forward_polytope(v) for v in vertices]
    if edge_rule == "forward":
        edges = {}
        for i in range(V):
            ok = np.all(fwd[i].A @ vertices.T <= fwd[i].b[:, None] + 1e-9, axis=0)
            for j in np.flatnonzero(ok):
                edges[(i, int(j))] = vertices[j].copy()
        return ReachGraph(vertices, edges, seed, spec, edge_rule)
    if edge_rule != "intersection":
        raise ValueError(f"unknown edge rule {edge_rule!r}")

    bwd = [spec.backward_polytope(v) for v in vertices]
    sat_f = np.vstack(
        [np.all(P.A @ vertices.T <= P.b[:, None] + 1e-9, axis=0) for P in fwd]
    )
    sat_b = np.vstack(
        [np.all(P.A @ vertices.T <= P.b[:, None] + 1e-9, axis=0) for P in bwd]
    )
    edges: dict = {}
    pending: list[tuple[int, int]] = []
    has_common = (sat_f.astype(np.float32) @ sat_b.astype(np.float32).T) > 0.5
    for i in range(V):
        for j in range(V):
            if has_common[i, j]:
                hit = int(np.flatnonzero(sat_f[i] & sat_b[j])[0])
                edges[(i, j)] = vertices[hit].copy()
            else:
                pending.append((i, j))

    # Midpoint candidates for pairs without a vertex witness.
    still: list[tuple[int, int]] = []
    for i, j in pending:
        w = 0.5 * (vertices[i] + vertices[j])
        if fwd[i].contains(w) and bwd[j].contains(w):
            edges[(i, j)] = w
        else:
            still.append((i, j))

    if still:
        boxes_f = [lp.bounding_box(P) for P in fwd]
        boxes_b = [lp.bounding_box(P) for P in bwd]
        for i, j in still:
            if not _boxes_overlap(boxes_f[i], boxes_b[j]):
                continue
            w = lp.feasible(fwd[i].intersect(bwd[j]))
            if w is not None:
                edges[(i, j)] = w
    return ReachGraph(vertices, edges, seed, spec, edge_rule)


def search(graph: ReachGraph, start: int, goal: int) -> list[int]:
    """Uniform-cost search; deterministic tie-break by vertex index."""
    V = graph.vertices.shape[0]
    if not (0 <= start < V and 0 <= goal < V):
        raise ValueError("start/goal must be vertex indices")
    if start == goal:
        return [start]
    adj: dict[int, list[int]] = {}
    for (i, j) in graph.edges:
        if i != j:
            adj.setdefault(i, []).append(j)
    for v in adj:
        adj[v].sort()
    dist = {start: 0.0}
    parent: dict[int, int] = {}
    heap = [(0.0, start)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            path = [goal]
            while path[-1] != start:
                path.append(parent[path[-1]])
            return path[::-1]
        for v in adj.get(u, []):
            nd = d + graph.edge_cost
            if v not in dist or nd < dist[v] - 1e-12:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    raise UnreachableGoalError(
        f"goal vertex {goal} unreachable from {start} "
        f"(connected component has {len(done)} vertices)",
        component_size=len(done),
    )


@dataclass
class PlannedTrajectory:
    """Ordered certified Bezier segments with chain-depth gamma."""

    segments: list[BezierCurve]
    gamma: int
    junction_tol: float = 1e-8
    _state_mats: list[np.ndarray] = field(init=False, repr=False)
    _qgamma_pts: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self._state_mats = []
        self._qgamma_pts = []
        for seg in self.segments:
            H = derivative_map(seg.order, seg.duration)
            self._state_mats.append(state_matrix(seg.points, self.gamma, seg.duration))
            self._qgamma_pts.append(seg.points @ np.linalg.matrix_power(H, self.gamma))
        for Pa, Pb in zip(self._state_mats, self._state_mats[1:]):
            if np.max(np.abs(Pa[:, -1] - Pb[:, 0])) > self.junction_tol:
                raise ValueError("segments are not C^(gamma-1) continuous")

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.segments)

    def _locate(self, t: float) -> tuple[int, float]:
        if not self.segments:
            raise ValueError("empty trajectory")
        acc = 0.0
        for idx, seg in enumerate(self.segments):
            if t <= acc + seg.duration or idx == len(self.segments) - 1:
                return idx, min(max(t - acc, 0.0), seg.duration)
            acc += seg.duration
        raise AssertionError

    def state(self, t: float) -> np.ndarray:
        idx, tl = self._locate(t)
        seg = self.segments[idx]
        z = bernstein_basis(seg.order, seg.duration, tl)
        return self._state_mats[idx] @ z

    def q_gamma(self, t: float) -> np.ndarray:
        idx, tl = self._locate(t)
        seg = self.segments[idx]
        z = bernstein_basis(seg.order, seg.duration, tl)
        return self._qgamma_pts[idx] @ z

    def _sample(self, ts: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
        """Evaluate per-segment control matrices on many times at once."""
        ts = np.asarray(ts, dtype=float).reshape(-1)
        ends = np.cumsum([seg.duration for seg in self.segments])
        # side="left" assigns junction times to the earlier segment,
        # matching the scalar state()/q_gamma() convention.
        idx = np.minimum(np.searchsorted(ends, ts, side="left"), len(self.segments) - 1)
        starts = ends - np.array([seg.duration for seg in self.segments])
        out = np.empty((mats[0].shape[0], ts.size))
        for i, seg in enumerate(self.segments):
            sel = np.flatnonzero(idx == i)
            if sel.size == 0:
                continue
            tl = np.clip(ts[sel] - starts[i], 0.0, seg.duration)
            out[:, sel] = mats[i] @ basis_matrix(seg.order, seg.duration, tl)
        return out

    def sample_states(self, ts: np.ndarray) -> np.ndarray:
        """States at many times, one column per time."""
        return self._sample(ts, self._state_mats)

    def sample_q_gamma(self, ts: np.ndarray) -> np.ndarray:
        """Top derivatives at many times, one column per time."""
        return self._sample(ts, self._qgamma_pts)

    def to_json_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "segments": [
                {
                    "order": seg.order,
                    "duration": seg.duration,
                    "points": seg.points.tolist(),
                }
                for seg in self.segments
            ],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "PlannedTrajectory":
        segs = [
            BezierCurve(s["duration"], np.asarray(s["points"], dtype=float))
            for s in doc["segments"]
        ]
        return PlannedTrajectory(segs, gamma=int(doc["gamma"]))


def extract_trajectory(graph: ReachGraph, path: list[int]) -> PlannedTrajectory:
    """Two certified curves per edge (v_i -> w -> v_j), re-checked
    against the certificate polytopes that justified the edge."""
    spec = graph.spec
    segments: list[BezierCurve] = []
    for i, j in zip(path, path[1:]):
        if (i, j) not in graph.edges:
            raise ValueError(f"path edge ({i}, {j}) not present in graph")
        w = graph.edges[(i, j)]
        vi = graph.vertices[i]
        vj = graph.vertices[j]
        first = spec.curve_between(vi, w)
        second = spec.curve_between(w, vj)
        # LP witnesses sit on polytope boundaries, so allow solver-scale slack.
        if not spec.certificate(vi, "forward").accepts(first.points, tol=1e-6):
            raise InternalInconsistencyError(
                f"edge ({i}, {j}): outbound segment fails its certificate"
            )
        if not spec.certificate(vj, "backward").accepts(second.points, tol=1e-6):
            raise InternalInconsistencyError(
                f"edge ({i}, {j}): inbound segment fails its certificate"
            )
        segments.extend([first, second])
    return PlannedTrajectory(segments, gamma=spec.model.gamma)
