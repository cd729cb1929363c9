"""Bernstein/Bezier matrix algebra.

Control points are the *columns* of an m x (p+1) matrix, so every
operator here is a right multiplier: if `points` holds a curve of order
p, `points @ diff_matrix(p, T)` holds its derivative of order p-1,
`points @ split_matrices(p, k)[i]` holds the i-th segment of a uniform
k-refinement, and so on.  All maps are exact linear algebra; the only
approximation anywhere is floating point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Binomial coefficients overflow float precision well before this, and no
# sane trajectory parameterization needs higher order.
MAX_ORDER = 30


class InsufficientOrderError(ValueError):
    """Curve order too low for the requested boundary interpolation."""


def _check_order(p: int) -> None:
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise ValueError(f"order must be an integer >= 1, got {p}")
    if p > MAX_ORDER:
        raise ValueError(f"order {p} exceeds supported maximum {MAX_ORDER}")


def bernstein_basis(p: int, T: float, t: float) -> np.ndarray:
    """Bernstein basis vector z(t) of degree p over [0, T]."""
    _check_order(p)
    if T <= 0:
        raise ValueError(f"duration must be positive, got {T}")
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    s = t / T
    k = np.arange(p + 1)
    comb = np.array([math.comb(p, int(i)) for i in k], dtype=float)
    return comb * s**k * (1.0 - s) ** (p - k)


def basis_matrix(p: int, T: float, ts) -> np.ndarray:
    """Bernstein basis at many times: column j is z(ts[j])."""
    _check_order(p)
    if T <= 0:
        raise ValueError(f"duration must be positive, got {T}")
    ts = np.asarray(ts, dtype=float).reshape(-1)
    if ts.size and (ts.min() < 0 or ts.max() > T):
        raise ValueError("sample times outside [0, T]")
    s = ts / T
    k = np.arange(p + 1)[:, None]
    comb = np.array([[math.comb(p, int(i))] for i in range(p + 1)], dtype=float)
    return comb * s[None, :] ** k * (1.0 - s[None, :]) ** (p - k)


@dataclass(frozen=True)
class BezierCurve:
    """Order-p curve b(t) = points @ z(t) over [0, duration]."""

    duration: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        _check_order(pts.shape[1] - 1)
        object.__setattr__(self, "points", pts)

    @property
    def order(self) -> int:
        return self.points.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    def eval(self, t: float) -> np.ndarray:
        return self.points @ bernstein_basis(self.order, self.duration, t)

    def eval_grid(self, ts: np.ndarray) -> np.ndarray:
        """Curve values at many times, one column per time."""
        return self.points @ basis_matrix(self.order, self.duration, ts)

    def derivative(self) -> "BezierCurve":
        S = diff_matrix(self.order, self.duration)
        return BezierCurve(self.duration, self.points @ S)

    def elevated(self) -> "BezierCurve":
        E = elevation_matrix(self.order + 1)
        return BezierCurve(self.duration, self.points @ E)

    def to_json(self) -> str:
        return json.dumps(
            {
                "order": self.order,
                "duration": self.duration,
                "points": self.points.tolist(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "BezierCurve":
        doc = json.loads(text)
        pts = np.asarray(doc["points"], dtype=float)
        if pts.shape[1] != doc["order"] + 1:
            raise ValueError("point matrix inconsistent with declared order")
        return BezierCurve(doc["duration"], pts)


def diff_matrix(p: int, T: float) -> np.ndarray:
    """Right multiplier S, (p+1) x p: points @ S are derivative points."""
    _check_order(p)
    if T <= 0:
        raise ValueError(f"duration must be positive, got {T}")
    S = np.zeros((p + 1, p))
    for k in range(p):
        S[k, k] = -p / T
        S[k + 1, k] = p / T
    return S


def elevation_matrix(p: int) -> np.ndarray:
    """Right multiplier E, p x (p+1), raising a curve of order p-1 to p."""
    _check_order(p)
    E = np.zeros((p, p + 1))
    for j in range(p + 1):
        if j >= 1:
            E[j - 1, j] = j / p
        if j <= p - 1:
            E[j, j] = (p - j) / p
    return E


def derivative_map(p: int, T: float) -> np.ndarray:
    """Same-order derivative map H: points @ H are the control points of
    the derivative re-expressed at order p (differentiate, then elevate)."""
    return diff_matrix(p, T) @ elevation_matrix(p)


def _subdivision_matrices(p: int, u: float):
    """de Casteljau split at phase u: right multipliers (L, R) with
    points @ L the [0, u] segment and points @ R the [u, 1] segment,
    both re-parameterized over the full interval."""
    W = np.eye(p + 1)
    L = np.zeros((p + 1, p + 1))
    R = np.zeros((p + 1, p + 1))
    L[:, 0] = W[:, 0]
    R[:, p] = W[:, p]
    for level in range(1, p + 1):
        W = (1.0 - u) * W[:, : p + 1 - level] + u * W[:, 1 : p + 2 - level]
        L[:, level] = W[:, 0]
        R[:, p - level] = W[:, -1]
    return L, R


@lru_cache(maxsize=256)
def _split_matrices_cached(p: int, k: int):
    mats = []
    for i in range(1, k + 1):
        a = (i - 1) / k
        if a > 0:
            _, Q = _subdivision_matrices(p, a)
        else:
            Q = np.eye(p + 1)
        u2 = 1.0 / (k - i + 1)
        if u2 < 1.0:
            Lm, _ = _subdivision_matrices(p, u2)
            Q = Q @ Lm
        mats.append(Q)
    return tuple(m.copy() for m in mats)


def split_matrices(p: int, k: int) -> list[np.ndarray]:
    """Right multipliers Q_1..Q_k for the uniform k-refinement: the curve
    with points `points @ Q_i` equals the original restricted to
    [(i-1)T/k, iT/k], re-parameterized over [0, T]."""
    _check_order(p)
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"segment count must be an integer >= 1, got {k}")
    return [m.copy() for m in _split_matrices_cached(int(p), int(k))]


def boundary_matrix(p: int, gamma: int, T: float) -> np.ndarray:
    """Boundary-value matrix D, (p+1) x 2*gamma.

    Columns are the endpoint selectors of H^0..H^(gamma-1): a point
    matrix with `points @ D = [x0 | xT]` (derivative values arranged as
    m x 2*gamma columns) yields a state curve meeting both endpoint
    states exactly.  Requires p >= 2*gamma - 1.
    """
    _check_order(p)
    if gamma < 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    if p < 2 * gamma - 1:
        raise InsufficientOrderError(
            f"order {p} cannot interpolate {gamma} derivative boundary values "
            f"(need p >= {2 * gamma - 1})"
        )
    H = derivative_map(p, T)
    Hk = np.eye(p + 1)
    cols0, colsT = [], []
    for _ in range(gamma):
        cols0.append(Hk[:, 0].copy())
        colsT.append(Hk[:, p].copy())
        Hk = Hk @ H
    D = np.column_stack(cols0 + colsT)
    assert np.linalg.matrix_rank(D) == 2 * gamma, "boundary matrix lost rank"
    return D


def solve_boundary(
    D: np.ndarray,
    x0: np.ndarray,
    xT: np.ndarray,
    regularizer: np.ndarray | None = None,
) -> np.ndarray:
    """Control points meeting the boundary values encoded by D.

    Underdetermined systems resolve to the minimum-norm solution, or to
    the minimizer of vec(points)^T R vec(points) when a positive definite
    `regularizer` R is supplied.  Deterministic for fixed inputs.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xT = np.asarray(xT, dtype=float).reshape(-1)
    if x0.shape != xT.shape:
        raise ValueError("boundary states must share a dimension")
    gamma = D.shape[1] // 2
    n = x0.shape[0]
    if n % gamma != 0:
        raise ValueError(f"state dimension {n} not divisible by gamma={gamma}")
    m = n // gamma
    B = np.concatenate([x0, xT]).reshape(m, 2 * gamma, order="F")
    if regularizer is None:
        return B @ np.linalg.pinv(D)
    p1 = D.shape[0]
    R = np.asarray(regularizer, dtype=float)
    if R.shape != (m * p1, m * p1):
        raise ValueError("regularizer must act on vec(points)")
    # Equality-constrained quadratic program via KKT: D_vec as kron(D^T, I_m).
    Dv = np.kron(D.T, np.eye(m))
    k = Dv.shape[0]
    KKT = np.block([[2.0 * R, Dv.T], [Dv, np.zeros((k, k))]])
    rhs = np.concatenate([np.zeros(m * p1), np.concatenate([x0, xT])])
    sol = np.linalg.solve(KKT, rhs)
    return sol[: m * p1].reshape(m, p1, order="F")


def state_matrix(points: np.ndarray, gamma: int, T: float) -> np.ndarray:
    """Stacked state-space control points [points@H^0; ...; points@H^(gamma-1)]."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    p = points.shape[1] - 1
    H = derivative_map(p, T)
    blocks = []
    blk = points
    for _ in range(gamma):
        blocks.append(blk)
        blk = blk @ H
    return np.vstack(blocks)


def commutation_matrix(n: int, m: int) -> np.ndarray:
    """K with K @ vec(A^T) = vec(A) for any n x m matrix A."""
    K = np.zeros((n * m, n * m))
    for i in range(n):
        for j in range(m):
            K[i + n * j, j + m * i] = 1.0
    return K


def stacked_derivative_vec(p: int, T: float, m: int, n_blocks: int) -> np.ndarray:
    """Vectorized map for vertically stacked derivative blocks.

    Maps vec(points) to vec([points@H^0; ...; points@H^(n_blocks-1)])
    for an m-row point matrix of order p.
    """
    H = derivative_map(p, T)
    p1 = p + 1
    out = np.zeros((n_blocks * m * p1, m * p1))
    Hk = np.eye(p1)
    for k in range(n_blocks):
        # vec of the stack: row index i + m*k + m*n_blocks*j holds (points@H^k)_{i,j}
        for j in range(p1):
            for c in range(p1):
                w = Hk[c, j]
                if w != 0.0:
                    rows = np.arange(m) + m * k + m * n_blocks * j
                    out[rows, np.arange(m) + m * c] += w
        Hk = Hk @ H
    return out


@dataclass(frozen=True)
class VectorizationMaps:
    """Vectorized forms of the state-curve and boundary-value maps."""

    H_vec: np.ndarray  # n(p+1) x m(p+1): vec(points) -> vec(state matrix)
    D_vec: np.ndarray  # 2n x m(p+1): vec(points) -> [x0; xT]
    K_comm: np.ndarray  # commutation matrix used in the stacked construction


def vectorization_maps(p: int, gamma: int, m: int, T: float) -> VectorizationMaps:
    """Construct (H_vec, D_vec, K_comm) for order p, chain depth gamma."""
    if m < 1:
        raise ValueError(f"output dimension must be >= 1, got {m}")
    H_vec = stacked_derivative_vec(p, T, m, gamma)
    D = boundary_matrix(p, gamma, T)
    D_vec = np.kron(D.T, np.eye(m))
    K_comm = commutation_matrix(gamma, p + 1)
    return VectorizationMaps(H_vec=H_vec, D_vec=D_vec, K_comm=K_comm)
