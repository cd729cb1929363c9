"""Polytopic certificate synthesis over Bezier control points.

Pipeline: state and input requirements become rows mixing a linear state
term with norms of the state deviation and the planning input
(`MixedConstraintRow`); each row is relaxed to linear constraints on
(x_d, q^(gamma)) via a convex quadratic over-approximation and a
level-set containment over a compact sigma box
(`LiftedLinearConstraints`); finally the lifted rows are imposed on
every state-space control point and vectorized into F vec(p) <= G
(`CertificatePolytope`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bezier import split_matrices, stacked_derivative_vec
from .models import ConstraintSet, PlanningModel, TrackingCertificate

_BISECT_TOL = 1e-9


class InfeasibleCertificateError(ValueError):
    """Tracker error bound leaves no input authority."""


class InfeasibleReductionError(ValueError):
    """A constraint row admits no feasible point inside the sigma box."""


@dataclass(frozen=True)
class MixedConstraintRow:
    """a1^T x_d + a2 ||x_d - x_ref|| + a3 ||u_d|| <= b (infinity norms)."""

    a1: np.ndarray
    a2: float
    a3: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a1", np.asarray(self.a1, dtype=float).reshape(-1))
        if self.a2 < 0 or self.a3 < 0:
            raise ValueError("norm coefficients must be nonnegative")
        if not np.isfinite(self.b):
            raise ValueError("right-hand side must be finite")


@dataclass(frozen=True)
class LiftedLinearConstraints:
    """Rows L [x_d; q^(gamma)] <= h implying the source mixed rows."""

    L: np.ndarray
    h: np.ndarray
    reference: np.ndarray

    @property
    def rows(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class CertificatePolytope:
    """F vec(p) <= G over the vectorized control points."""

    F: np.ndarray
    G: np.ndarray
    metadata: dict = field(default_factory=dict)

    def accepts(self, points: np.ndarray, tol: float = 1e-8) -> bool:
        vec = np.asarray(points, dtype=float).reshape(-1, order="F")
        return bool(np.all(self.F @ vec <= self.G + tol))

    def to_halfspace_text(self) -> str:
        lines = []
        for row, g in zip(self.F, self.G):
            coeffs = " ".join(f"{v:.17g}" for v in row)
            lines.append(f"{coeffs} <= {g:.17g}")
        return "\n".join(lines) + "\n"


def input_bound_row(
    cert: TrackingCertificate, x_ref: np.ndarray, u_max: float
) -> MixedConstraintRow:
    """Row guaranteeing the tracker's applied input stays within u_max.

    The constant offset charges the tracker's effort at the reference
    plus its reaction to the base error bound: K = ||k_ref|| +
    max(1, L_k) * e0.  Raises if the tracker cannot be feasible at all.
    """
    x_ref = np.asarray(x_ref, dtype=float).reshape(-1)
    k_ref = float(cert.k_ref_norm(x_ref))
    deficit = u_max - cert.e0 - k_ref
    if deficit <= 0:
        raise InfeasibleCertificateError(
            f"u_max={u_max} leaves no margin: e(0)={cert.e0}, "
            f"||k(ref)||={k_ref} (deficit {deficit:.3e})"
        )
    K = k_ref + max(1.0, cert.lipschitz_k) * cert.e0
    return MixedConstraintRow(
        a1=np.zeros(x_ref.shape[0]),
        a2=cert.lipschitz_k * (1.0 + cert.lipschitz_psi),
        a3=cert.lipschitz_k * (1.0 + cert.lipschitz_e),
        b=u_max - K,
    )


def state_bound_rows(
    cs: ConstraintSet, cert: TrackingCertificate
) -> list[MixedConstraintRow]:
    """Rows tightening C x_d <= d by the projected tracking tube."""
    norms = np.sqrt(np.sum(cs.C**2, axis=1))
    rows = []
    for c, d_row, k_row in zip(cs.C, cs.d, norms):
        b = d_row - cert.lipschitz_pi * cert.e0 * k_row
        if not np.isfinite(b):
            raise ValueError("state row right-hand side is not finite")
        rows.append(
            MixedConstraintRow(
                a1=c.copy(),
                a2=0.0,
                a3=cert.lipschitz_pi * cert.lipschitz_e * k_row,
                b=b,
            )
        )
    return rows


def _psd_projection_2x2(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    w = np.maximum(w, 0.0)
    return (V * w) @ V.T


def _box_vertices(s_max: np.ndarray) -> np.ndarray:
    s1, s2 = s_max
    return np.array([[0.0, 0.0], [s1, 0.0], [0.0, s2], [s1, s2]])


def _cut_polygon_vertices(s_max: np.ndarray, c: np.ndarray, delta: float) -> np.ndarray:
    """Vertices of {0 <= s <= s_max, c^T s <= delta} (a 2-D polygon)."""
    verts = [v for v in _box_vertices(s_max) if c @ v <= delta + 1e-15]
    # Edge intersections with the cut line.
    edges = [
        (np.array([0.0, 0.0]), np.array([s_max[0], 0.0])),
        (np.array([0.0, 0.0]), np.array([0.0, s_max[1]])),
        (np.array([s_max[0], 0.0]), s_max.astype(float)),
        (np.array([0.0, s_max[1]]), s_max.astype(float)),
    ]
    for a, b in edges:
        da, db = c @ a - delta, c @ b - delta
        if da * db < 0:
            t = da / (da - db)
            verts.append(a + t * (b - a))
    return np.array(verts) if verts else np.empty((0, 2))


def _quad_max(M: np.ndarray, N: np.ndarray, verts: np.ndarray) -> float:
    if verts.size == 0:
        return -np.inf
    return float(np.max(np.einsum("ij,jk,ik->i", verts, M, verts) + verts @ N))


def _level_set_radius(
    M_hat: np.ndarray,
    N: np.ndarray,
    c: np.ndarray,
    b: float,
    s_max: np.ndarray,
    a1_zero: bool,
) -> float:
    """Largest delta with {c^T s <= delta} inside the box implying the
    quadratic bound s^T M_hat s + N^T s <= b.

    With the state term present the containment must survive an
    unbounded linear offset, which collapses to a vertex maximum; the
    pure-norm case is solved by bisection over the cut polygon.
    """
    verts = _box_vertices(s_max)
    if not a1_zero:
        worst = _quad_max(M_hat, N - c, verts)
        return b - worst

    def holds(delta: float) -> bool:
        poly = _cut_polygon_vertices(s_max, c, delta)
        return _quad_max(M_hat, N, poly) <= b + 1e-12

    cap = float(c @ s_max)
    if holds(cap):
        return cap
    if not holds(0.0):
        return -np.inf
    lo, hi = 0.0, cap
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _expand_norm_row(
    a1: np.ndarray,
    c: np.ndarray,
    delta: float,
    x_ref: np.ndarray,
    f_ref: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Signed-permutation expansion of c1||x-x_ref|| + c2||q-f_ref|| +
    a1^T x <= delta into 4nm linear rows on [x; q]."""
    n = x_ref.shape[0]
    m = f_ref.shape[0]
    rows = []
    rhs = []
    for i in range(n):
        for j in range(m):
            for s1 in (1.0, -1.0):
                for s2 in (1.0, -1.0):
                    lx = a1.copy()
                    lx[i] += c[0] * s1
                    lq = np.zeros(m)
                    lq[j] = c[1] * s2
                    rows.append(np.concatenate([lx, lq]))
                    rhs.append(delta + c[0] * s1 * x_ref[i] + c[1] * s2 * f_ref[j])
    return np.array(rows), np.array(rhs)


def sigma_box(
    model: PlanningModel,
    cs: ConstraintSet,
    x_ref: np.ndarray,
    q_gamma_bound: float | None = None,
) -> np.ndarray:
    """Bounds on (||x - x_ref||, ||q^(gamma) - f(x_ref)||) over C_X.

    The first entry comes from the bounding box of the state polytope;
    the second from a configured (or derived) bound on ||q^(gamma)||.
    """
    x_ref = np.asarray(x_ref, dtype=float).reshape(-1)
    lo, hi = cs.bounding_box()
    s1 = float(np.max(np.maximum(np.abs(lo - x_ref), np.abs(hi - x_ref))))
    if q_gamma_bound is None:
        q_gamma_bound = default_q_gamma_bound(model, cs)
    f_ref = np.atleast_1d(model.f_d(x_ref))
    s2 = float(q_gamma_bound + np.max(np.abs(f_ref)))
    if s1 <= 0 or s2 <= 0 or not np.isfinite(s1 + s2):
        raise ValueError(f"sigma box must be finite and positive, got ({s1}, {s2})")
    return np.array([s1, s2])


def default_q_gamma_bound(model: PlanningModel, cs: ConstraintSet, samples: int = 512) -> float:
    """Reachable top-derivative magnitude: max ||f|| + max ||g|| * u_max,
    estimated on a deterministic sample of the C_X bounding box."""
    lo, hi = cs.bounding_box()
    rng = np.random.default_rng(0)
    xs = rng.uniform(lo, hi, size=(samples, model.n))
    f_max = max(float(np.max(np.abs(model.f_d(x)))) for x in xs)
    g_max = max(
        float(np.max(np.sum(np.abs(np.atleast_2d(model.g_d(x))), axis=1))) for x in xs
    )
    return f_max + g_max * cs.effective_u_max()


def lift_rows(
    rows: Sequence[MixedConstraintRow],
    model: PlanningModel,
    x_ref: np.ndarray,
    s_max: np.ndarray,
) -> LiftedLinearConstraints:
    """Reduce mixed norm rows to linear rows on [x_d; q^(gamma)].

    Each row with norm terms is over-approximated by a convex quadratic
    in sigma = (||x - x_ref||, ||q^(gamma) - f(x_ref)||), shrunk to a
    linear level set via `_level_set_radius`, and expanded through the
    infinity norms.  Box rows enforcing sigma <= s_max are appended so
    the result is sound on its own.
    """
    x_ref = np.asarray(x_ref, dtype=float).reshape(-1)
    s_max = np.asarray(s_max, dtype=float).reshape(2)
    if np.any(s_max <= 0) or not np.all(np.isfinite(s_max)):
        raise ValueError("sigma box must be finite and positive")
    n = model.n
    m = model.m
    f_ref = np.atleast_1d(model.f_d(x_ref))
    g_ref_inv = np.linalg.inv(np.atleast_2d(model.g_d(x_ref)))
    g0 = float(np.max(np.sum(np.abs(g_ref_inv), axis=1)))
    L_f = model.lipschitz_f
    L_G = model.lipschitz_ginv

    L_blocks: list[np.ndarray] = []
    h_blocks: list[np.ndarray] = []
    for idx, row in enumerate(rows):
        if row.a1.shape[0] != n:
            raise ValueError(f"row {idx}: state coefficient dimension != {n}")
        if row.a2 == 0.0 and row.a3 == 0.0:
            L_blocks.append(np.concatenate([row.a1, np.zeros(m)])[None, :])
            h_blocks.append(np.array([row.b]))
            continue
        M = 0.5 * row.a3 * np.array([[2.0 * L_G * L_f, L_G], [L_G, 0.0]])
        N = np.array([row.a3 * L_f * g0 + row.a2, row.a3 * g0])
        M_hat = _psd_projection_2x2(M)
        c = N + M_hat @ s_max
        a1_zero = not np.any(row.a1)
        delta = _level_set_radius(M_hat, N, c, row.b, s_max, a1_zero)
        if not np.isfinite(delta) or delta < -1e30:
            raise InfeasibleReductionError(
                f"row {idx} admits no feasible point in the sigma box "
                f"(b={row.b}, s_max={s_max.tolist()})"
            )
        Lr, hr = _expand_norm_row(row.a1, c, delta, x_ref, f_ref)
        L_blocks.append(Lr)
        h_blocks.append(hr)

    # sigma-box enforcement: |x_i - x_ref_i| <= s1, |q_j - f_ref_j| <= s2.
    box_L = np.zeros((2 * (n + m), n + m))
    box_h = np.zeros(2 * (n + m))
    for i in range(n):
        box_L[2 * i, i] = 1.0
        box_h[2 * i] = s_max[0] + x_ref[i]
        box_L[2 * i + 1, i] = -1.0
        box_h[2 * i + 1] = s_max[0] - x_ref[i]
    for j in range(m):
        r = 2 * n + 2 * j
        box_L[r, n + j] = 1.0
        box_h[r] = s_max[1] + f_ref[j]
        box_L[r + 1, n + j] = -1.0
        box_h[r + 1] = s_max[1] - f_ref[j]
    L_blocks.append(box_L)
    h_blocks.append(box_h)

    return LiftedLinearConstraints(
        L=np.vstack(L_blocks), h=np.concatenate(h_blocks), reference=x_ref
    )


def control_point_polytope(
    lifted: LiftedLinearConstraints,
    p: int,
    T: float,
    gamma: int,
    m: int,
) -> CertificatePolytope:
    """Impose the lifted rows on every state-space control point column
    and vectorize: F vec(p) <= G with (p+1) * rows(L) rows."""
    if p < gamma:
        raise ValueError(f"order {p} < gamma {gamma}")
    n = gamma * m
    if lifted.L.size and lifted.L.shape[1] != n + m:
        raise ValueError(
            f"lifted rows act on R^{lifted.L.shape[1]}, expected {n + m}"
        )
    if lifted.rows == 0:
        return CertificatePolytope(
            F=np.zeros((0, m * (p + 1))),
            G=np.zeros(0),
            metadata={"order": p, "gamma": gamma, "m": m, "horizon": T},
        )
    ext_vec = stacked_derivative_vec(p, T, m, gamma + 1)
    F = np.kron(np.eye(p + 1), lifted.L) @ ext_vec
    G = np.tile(lifted.h, p + 1)
    return CertificatePolytope(
        F=F,
        G=G,
        metadata={
            "order": p,
            "gamma": gamma,
            "m": m,
            "horizon": T,
            "refinement": 1,
            "references": [lifted.reference.tolist()],
            "direction_rule": "N + Mhat @ s_max",
        },
    )


def refined_polytope(
    lifted_segments: Sequence[LiftedLinearConstraints],
    p: int,
    T: float,
    gamma: int,
    m: int,
) -> CertificatePolytope:
    """Stack per-segment certificates composed with the k-refinement
    splitting maps; one lifted constraint set (and reference) per segment."""
    k = len(lifted_segments)
    if k < 1:
        raise ValueError("need at least one segment")
    Qs = split_matrices(p, k)
    F_blocks = []
    G_blocks = []
    for lifted, Q in zip(lifted_segments, Qs):
        # Each subsegment runs for T / k, which changes the derivative scale.
        base = control_point_polytope(lifted, p, T / k, gamma, m)
        F_blocks.append(base.F @ np.kron(Q.T, np.eye(m)))
        G_blocks.append(base.G)
    return CertificatePolytope(
        F=np.vstack(F_blocks),
        G=np.concatenate(G_blocks),
        metadata={
            "order": p,
            "gamma": gamma,
            "m": m,
            "horizon": T,
            "refinement": k,
            "references": [ls.reference.tolist() for ls in lifted_segments],
            "direction_rule": "N + Mhat @ s_max",
        },
    )
