"""Reachable-set queries over boundary states.

Composing the certificate polytope F vec(p) <= G with the min-norm
boundary solver turns reachability into halfspace sets over (x0, xT):
the forward set F(x0) collects terminal states reachable within one
horizon, the backward set B(xT) the initial states that can reach xT.
Membership always comes with a constructive witness curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .bezier import BezierCurve, boundary_matrix, solve_boundary, vectorization_maps
from .constraints import (
    CertificatePolytope,
    control_point_polytope,
    input_bound_row,
    lift_rows,
    refined_polytope,
    sigma_box,
    state_bound_rows,
)
from .models import ConstraintSet, PlanningModel, TrackingCertificate

REFERENCE_POLICIES = ("fixed", "drift")


@dataclass
class ReachSpec:
    """Precomputed reachability oracle for a fixed horizon and order.

    reference_policy "fixed" anchors every segment at `x_ref` (queries
    from different base points share one certificate and the forward /
    backward definitions are exact duals).  Policy "drift" re-anchors
    each query at samples of the drift flow from the query point, which
    trades duality for much less conservatism on swinging trajectories.
    """

    model: PlanningModel
    cert: TrackingCertificate
    cs: ConstraintSet
    order: int
    horizon: float
    refinement: int = 1
    reference_policy: str = "fixed"
    x_ref: np.ndarray | None = None
    q_gamma_bound: float | None = None
    _D: np.ndarray = field(init=False, repr=False)
    _D_pinv: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.reference_policy not in REFERENCE_POLICIES:
            raise ValueError(f"unknown reference policy {self.reference_policy!r}")
        if self.reference_policy == "fixed":
            if self.x_ref is None:
                raise ValueError("fixed reference policy needs x_ref")
            self.x_ref = np.asarray(self.x_ref, dtype=float).reshape(-1)
        self._D = boundary_matrix(self.order, self.model.gamma, self.horizon)
        maps = vectorization_maps(self.order, self.model.gamma, self.model.m, self.horizon)
        self._D_pinv = np.linalg.pinv(maps.D_vec)

    @property
    def n(self) -> int:
        return self.model.n

    # -- certificate construction -------------------------------------

    def _drift_flow(self, x0: np.ndarray, t: float, steps: int = 64) -> np.ndarray:
        """RK4 flow of the unforced dynamics from x0 over signed time t."""
        x = np.asarray(x0, dtype=float).copy()
        h = t / steps
        for _ in range(steps):
            k1 = self.model.drift_field(x)
            k2 = self.model.drift_field(x + 0.5 * h * k1)
            k3 = self.model.drift_field(x + 0.5 * h * k2)
            k4 = self.model.drift_field(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    def references(self, anchor: np.ndarray, direction: str) -> list[np.ndarray]:
        """Per-segment reference points for a query anchored at `anchor`."""
        k = self.refinement
        if self.reference_policy == "fixed":
            return [self.x_ref.copy() for _ in range(k)]
        T = self.horizon
        refs = []
        for i in range(k):
            t_mid = (i + 0.5) * T / k
            if direction == "forward":
                refs.append(self._drift_flow(anchor, t_mid))
            else:
                refs.append(self._drift_flow(anchor, -(T - t_mid)))
        return refs

    def certificate_for(self, refs: list[np.ndarray]) -> CertificatePolytope:
        u_eff = self.cs.effective_u_max()
        lifted = []
        for ref in refs:
            rows = [input_bound_row(self.cert, ref, u_eff)]
            rows.extend(state_bound_rows(self.cs, self.cert))
            s_max = sigma_box(self.model, self.cs, ref, self.q_gamma_bound)
            lifted.append(lift_rows(rows, self.model, ref, s_max))
        if len(lifted) == 1:
            return control_point_polytope(
                lifted[0], self.order, self.horizon, self.model.gamma, self.model.m
            )
        return refined_polytope(
            lifted, self.order, self.horizon, self.model.gamma, self.model.m
        )

    def certificate(self, anchor: np.ndarray, direction: str = "forward") -> CertificatePolytope:
        key = (self.reference_policy, direction if self.reference_policy == "drift" else "",
               np.asarray(anchor, dtype=float).tobytes()
               if self.reference_policy == "drift" else b"")
        if key not in self._cache:
            self._cache[key] = self.certificate_for(self.references(np.asarray(anchor, float), direction))
        return self._cache[key]

    # -- polytope queries ----------------------------------------------

    def forward_polytope(self, x0: np.ndarray) -> lp.Polytope:
        """Halfspace set over terminal states reachable from x0."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        cert = self.certificate(x0, "forward")
        FD = cert.F @ self._D_pinv
        A = FD[:, self.n :]
        b = cert.G - FD[:, : self.n] @ x0
        poly = lp.Polytope(A, b)
        return lp.reduce_2d(poly) if self.n == 2 else poly

    def backward_polytope(self, xT: np.ndarray) -> lp.Polytope:
        """Halfspace set over initial states that can reach xT."""
        xT = np.asarray(xT, dtype=float).reshape(-1)
        cert = self.certificate(xT, "backward")
        FD = cert.F @ self._D_pinv
        A = FD[:, : self.n]
        b = cert.G - FD[:, self.n :] @ xT
        poly = lp.Polytope(A, b)
        return lp.reduce_2d(poly) if self.n == 2 else poly

    def curve_between(self, x0: np.ndarray, xT: np.ndarray) -> BezierCurve:
        """Min-norm curve meeting both boundary states."""
        pts = solve_boundary(self._D, np.asarray(x0, float), np.asarray(xT, float))
        return BezierCurve(self.horizon, pts)

    def edge_feasible(self, vi: np.ndarray, vj: np.ndarray) -> np.ndarray | None:
        """Witness w in F(vi) intersected with B(vj), or None."""
        fwd = self.forward_polytope(np.asarray(vi, float))
        bwd = self.backward_polytope(np.asarray(vj, float))
        both = fwd.intersect(bwd)
        for cand in (np.asarray(vi, float), np.asarray(vj, float),
                     0.5 * (np.asarray(vi, float) + np.asarray(vj, float))):
            if both.contains(cand):
                return cand
        return lp.feasible(both)


def sample_cloud(poly: lp.Polytope, count: int, seed: int = 0, max_draws: int = 200_000):
    """Rejection-sampled interior points, plus the box used for sampling.

    Returns (points, accept_ratio); points may be fewer than `count` if
    the polytope is thin.  The accept ratio times the box volume is a
    Monte-Carlo volume estimate.
    """
    box = lp.bounding_box(poly)
    if box is None:
        return np.empty((0, poly.dim)), 0.0
    lo, hi = box
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("cannot sample an unbounded polytope")
    rng = np.random.default_rng(seed)
    pts = []
    draws = 0
    batch = max(1024, count)
    while len(pts) < count and draws < max_draws:
        xs = rng.uniform(lo, hi, size=(batch, poly.dim))
        draws += batch
        ok = np.all(poly.A @ xs.T <= poly.b[:, None] + 1e-9, axis=0)
        pts.extend(xs[ok])
    ratio = len(pts) / draws if draws else 0.0
    return (np.array(pts[:count]) if pts else np.empty((0, poly.dim))), ratio


def volume_estimate(poly: lp.Polytope, seed: int = 0, draws: int = 50_000) -> float:
    """Monte-Carlo volume via rejection sampling on the bounding box."""
    box = lp.bounding_box(poly)
    if box is None:
        return 0.0
    lo, hi = box
    vol_box = float(np.prod(hi - lo))
    if vol_box == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    xs = rng.uniform(lo, hi, size=(draws, poly.dim))
    ok = np.all(poly.A @ xs.T <= poly.b[:, None] + 1e-9, axis=0)
    return vol_box * float(np.mean(ok))
