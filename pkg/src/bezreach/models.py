"""Planning models, tracking certificates, and constraint sets.

A planning model is a gamma-chain of integrators whose top derivative is
control affine: q^(gamma) = f_d(x) + g_d(x) u.  Models are immutable
evaluators with analytically supplied Lipschitz constants (infinity norm
over the state constraint set); a sampling validator cross-checks them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lp


class SingularActuationError(RuntimeError):
    """Actuation matrix not invertible at the queried state."""


@dataclass(frozen=True)
class PlanningModel:
    gamma: int
    m: int
    f_d: Callable[[np.ndarray], np.ndarray]
    g_d: Callable[[np.ndarray], np.ndarray]
    lipschitz_f: float
    lipschitz_ginv: float
    name: str = ""

    @property
    def n(self) -> int:
        return self.gamma * self.m

    def drift_field(self, x: np.ndarray) -> np.ndarray:
        """Unforced state derivative of the chain dynamics."""
        x = np.asarray(x, dtype=float)
        dx = np.zeros_like(x)
        dx[: self.n - self.m] = x[self.m :]
        dx[self.n - self.m :] = self.f_d(x)
        return dx

    def state_derivative(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        dx = self.drift_field(x)
        dx[self.n - self.m :] += self.g_d(x) @ np.asarray(u, dtype=float)
        return dx


def flat_input(model: PlanningModel, x_d: np.ndarray, q_gamma: np.ndarray) -> np.ndarray:
    """Input reproducing the top derivative q_gamma at state x_d."""
    x_d = np.asarray(x_d, dtype=float).reshape(-1)
    q_gamma = np.asarray(q_gamma, dtype=float).reshape(-1)
    g = np.atleast_2d(model.g_d(x_d))
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularActuationError(
            f"g_d singular at state {x_d} (condition number {cond:.3e})"
        )
    return np.linalg.solve(g, q_gamma - model.f_d(x_d))


def pendulum_model(mass: float, length: float, gravity: float) -> PlanningModel:
    """Torque-controlled pendulum as a gamma=2 chain.

    theta'' = (g/l) sin(theta) + u / (m l^2); theta = 0 is the unstable
    upright equilibrium under this sign convention, theta = pi hangs down.
    """
    if mass <= 0 or length <= 0:
        raise ValueError("mass and length must be positive")
    a = gravity / length
    ginv = mass * length**2

    def f_d(x):
        return np.array([a * np.sin(x[0])])

    def g_d(x):
        return np.array([[1.0 / ginv]])

    return PlanningModel(
        gamma=2,
        m=1,
        f_d=f_d,
        g_d=g_d,
        lipschitz_f=abs(a),
        lipschitz_ginv=0.0,
        name="pendulum",
    )


def integrator_chain(gamma: int, m: int) -> PlanningModel:
    """Canonical linear test model: f == 0, g == I."""
    if gamma < 1 or m < 1:
        raise ValueError("gamma and m must be >= 1")
    zero = np.zeros(m)
    eye = np.eye(m)
    return PlanningModel(
        gamma=gamma,
        m=m,
        f_d=lambda x: zero.copy(),
        g_d=lambda x: eye.copy(),
        lipschitz_f=0.0,
        lipschitz_ginv=0.0,
        name=f"integrator{gamma}x{m}",
    )


def pendulum_energy_controller(
    mass: float,
    length: float,
    gravity: float,
    u_pump: float,
    u_catch: float,
    energy_gain: float = 6.0,
):
    """Low-torque swing-up policy used to seed planner waypoints.

    Pumps energy toward the upright level with a proportional torque and
    hands over to a gentle linear catch near the top.  Torque stays
    within max(u_pump, u_catch), so the policy traces trajectories close
    to the drift flow -- exactly the regime the drift-referenced
    certificates can certify.
    """
    ml2 = mass * length**2
    mgl = mass * gravity * length
    gl = gravity / length
    e_top = mgl

    def controller(x) -> float:
        theta, omega = float(x[0]), float(x[1])
        energy = 0.5 * ml2 * omega * omega + mgl * np.cos(theta)
        wrap = round(theta / (2.0 * np.pi))
        dth = theta - 2.0 * np.pi * wrap
        if abs(dth) < 0.25 and abs(omega) < 1.0:
            u = ml2 * (-gl * np.sin(theta) - 5.0 * dth - 3.5 * omega)
            return float(np.clip(u, -u_catch, u_catch))
        s = np.sign(omega) if abs(omega) > 1e-3 else 1.0
        return float(np.clip(energy_gain * (e_top - energy) * s, -u_pump, u_pump))

    return controller


@dataclass(frozen=True)
class TrackingCertificate:
    """Affine tracking-error bound e(u) = e0 + L_e * ||u|| plus the
    interface Lipschitz constants of the surrounding layer maps."""

    e0: float
    lipschitz_e: float
    lipschitz_pi: float
    lipschitz_psi: float
    lipschitz_k: float
    k_ref_norm: Callable[[np.ndarray], float] = field(default=lambda x_ref: 0.0)

    def __post_init__(self):
        if self.e0 < 0 or self.lipschitz_e < 0:
            raise ValueError("error bound parameters must be nonnegative")

    def error_bound(self, u_norm: float) -> float:
        return self.e0 + self.lipschitz_e * abs(u_norm)

    def feasible_for(self, u_max: float) -> bool:
        return u_max - self.e0 > 0

    @staticmethod
    def exact() -> "TrackingCertificate":
        return TrackingCertificate(0.0, 0.0, 1.0, 1.0, 0.0)


@dataclass(frozen=True)
class ConstraintSet:
    """State polytope C x <= d plus weighted box input bound."""

    C: np.ndarray
    d: np.ndarray
    u_max: float
    W: np.ndarray | None = None

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if C.shape[0] != d.shape[0]:
            raise ValueError("C and d row counts differ")
        if self.u_max <= 0:
            raise ValueError("u_max must be positive")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)
        if self.W is not None:
            W = np.asarray(self.W, dtype=float)
            if W.ndim == 1:
                W = np.diag(W)
            if not np.allclose(W, np.diag(np.diag(W))) or np.any(np.diag(W) <= 0):
                raise ValueError("W must be a positive diagonal matrix")
            object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.C.shape[1]

    @property
    def polytope(self) -> lp.Polytope:
        return lp.Polytope(self.C, self.d)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return self.polytope.contains(x, tol)

    def effective_u_max(self) -> float:
        """Box input bound folded through the channel weights."""
        if self.W is None:
            return self.u_max
        return self.u_max / float(np.max(np.diag(self.W)))

    def bounding_box(self):
        box = lp.bounding_box(self.polytope)
        if box is None:
            raise ValueError("state constraint set is empty")
        return box

    def is_compact(self) -> bool:
        lo, hi = self.bounding_box()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))


def validate_lipschitz(
    model: PlanningModel,
    cs: ConstraintSet,
    samples: int = 10_000,
    seed: int = 0,
    slack: float = 1e-9,
) -> bool:
    """Sampled difference quotients of f_d and g_d^-1 over the bounding
    box of C_X never exceed the stored constants."""
    lo, hi = cs.bounding_box()
    rng = np.random.default_rng(seed)
    xs = rng.uniform(lo, hi, size=(samples, model.n))
    ys = rng.uniform(lo, hi, size=(samples, model.n))
    for x, y in zip(xs, ys):
        dx = np.max(np.abs(x - y))
        if dx < 1e-12:
            continue
        df = np.max(np.abs(model.f_d(x) - model.f_d(y)))
        if df > model.lipschitz_f * dx + slack:
            return False
        gi_x = np.linalg.inv(np.atleast_2d(model.g_d(x)))
        gi_y = np.linalg.inv(np.atleast_2d(model.g_d(y)))
        dg = np.max(np.abs(gi_x - gi_y))
        if dg > model.lipschitz_ginv * dx + slack:
            return False
    return True
