"""Closed-loop verification of planned trajectories.

The planning-model loop is integrated with fixed-step RK4 under a
feedback-linearizing feedforward plus PD tracker.  The tracking
certificate is exercised by injecting a disturbance v with
||v|| <= e(u_d) on top of the integrated state; the monitor then checks
the state polytope and the weighted input bound at every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ConstraintSet, PlanningModel, TrackingCertificate, flat_input
from .planner import PlannedTrajectory

VIOLATION_TOL = 1e-6

DISTURBANCE_POLICIES = ("zero", "worst", "random")


class DivergenceError(RuntimeError):
    """Simulated state left the 10x safety box around C_X."""


@dataclass(frozen=True)
class RolloutResult:
    t: np.ndarray
    x_ref: np.ndarray  # reference states, one column per step
    x_sim: np.ndarray  # integrated tracker states
    x_cl: np.ndarray  # disturbed (certificate-surface) states
    u_d: np.ndarray  # planning inputs along the reference
    u: np.ndarray  # applied tracker inputs at the disturbed state
    state_margin: np.ndarray
    input_margin: np.ndarray
    violation: bool


@dataclass(frozen=True)
class MarginReport:
    min_state_margin: float
    min_input_margin: float
    passed: bool
    steps: int


def _tracker_gains(gamma: int, kp: float, kd: float) -> np.ndarray:
    gains = np.zeros(gamma)
    gains[0] = kp
    if gamma >= 2:
        gains[1] = kd
    return gains


def tracker_input(
    model: PlanningModel,
    x: np.ndarray,
    x_ref: np.ndarray,
    u_d: np.ndarray,
    gains: np.ndarray,
) -> np.ndarray:
    """Feedforward plus PD feedback through the actuation inverse."""
    m = model.m
    err = (x_ref - x).reshape(model.gamma, m)
    fb = gains @ err
    g = np.atleast_2d(model.g_d(x))
    return u_d + np.linalg.solve(g, fb)


def _disturbance(policy, rng, bound, cs, x_ref):
    n = x_ref.shape[0]
    if policy == "zero" or bound == 0.0:
        return np.zeros(n)
    if policy == "random":
        return bound * rng.choice([-1.0, 1.0], size=n)
    # worst-case-sign: push toward the tightest state constraint row.
    margins = cs.d - cs.C @ x_ref - bound * np.sum(np.abs(cs.C), axis=1)
    row = cs.C[int(np.argmin(margins))]
    return bound * np.where(row >= 0.0, 1.0, -1.0)


def rollout(
    model: PlanningModel,
    trajectory: PlannedTrajectory,
    cs: ConstraintSet,
    cert: TrackingCertificate,
    kp: float = 0.5,
    kd: float = 0.5,
    disturbance: str = "zero",
    seed: int = 0,
    disturbance_scale: float = 1.0,
    dt: float | None = None,
    x0: np.ndarray | None = None,
) -> RolloutResult:
    """Roll out the tracked loop and evaluate the constraint margins."""
    if disturbance not in DISTURBANCE_POLICIES:
        raise ValueError(f"unknown disturbance policy {disturbance!r}")
    seg_T = min(seg.duration for seg in trajectory.segments)
    if dt is None:
        dt = seg_T / 500.0
    if dt > seg_T / 200.0:
        raise ValueError(f"dt={dt} too coarse; need dt <= {seg_T / 200.0}")
    total = trajectory.total_duration
    steps = int(round(total / dt))
    t_grid = np.linspace(0.0, total, steps + 1)
    gains = _tracker_gains(model.gamma, kp, kd)
    rng = np.random.default_rng(seed)

    lo, hi = cs.bounding_box()
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    safe_lo, safe_hi = center - 10.0 * half, center + 10.0 * half

    # Reference and feedforward on the half-step grid for the RK4 stages.
    t_half = np.linspace(0.0, total, 2 * steps + 1)
    x_ref_half = trajectory.sample_states(t_half)
    qg_half = trajectory.sample_q_gamma(t_half)
    ud_half = np.column_stack(
        [
            flat_input(model, x_ref_half[:, i], qg_half[:, i])
            for i in range(t_half.size)
        ]
    )

    def closed_loop(x, half_idx):
        xr = x_ref_half[:, half_idx]
        ud = ud_half[:, half_idx]
        u = tracker_input(model, x, xr, ud, gains)
        return model.state_derivative(x, u)

    x = x_ref_half[:, 0].copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    x_sim = np.empty((model.n, steps + 1))
    x_sim[:, 0] = x
    h = total / steps
    for i in range(steps):
        k1 = closed_loop(x, 2 * i)
        k2 = closed_loop(x + 0.5 * h * k1, 2 * i + 1)
        k3 = closed_loop(x + 0.5 * h * k2, 2 * i + 1)
        k4 = closed_loop(x + h * k3, 2 * i + 2)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(x < safe_lo) or np.any(x > safe_hi):
            raise DivergenceError(f"state {x} left the safety box at t={t_grid[i + 1]}")
        x_sim[:, i + 1] = x

    x_ref_grid = x_ref_half[:, ::2]
    ud_grid = ud_half[:, ::2]
    x_cl = np.empty_like(x_sim)
    u_app = np.empty((model.m, steps + 1))
    for i in range(steps + 1):
        bound = disturbance_scale * cert.error_bound(float(np.max(np.abs(ud_grid[:, i]))))
        v = _disturbance(disturbance, rng, bound, cs, x_ref_grid[:, i])
        x_cl[:, i] = x_sim[:, i] + v
        u_app[:, i] = tracker_input(
            model, x_cl[:, i], x_ref_grid[:, i], ud_grid[:, i], gains
        )

    state_margin = np.min(cs.d[:, None] - cs.C @ x_cl, axis=0)
    W = cs.W if cs.W is not None else np.eye(model.m)
    input_margin = cs.u_max - np.max(np.abs(W @ u_app), axis=0)
    violation = bool(
        np.any(state_margin < -VIOLATION_TOL) or np.any(input_margin < -VIOLATION_TOL)
    )
    return RolloutResult(
        t=t_grid,
        x_ref=x_ref_grid,
        x_sim=x_sim,
        x_cl=x_cl,
        u_d=ud_grid,
        u=u_app,
        state_margin=state_margin,
        input_margin=input_margin,
        violation=violation,
    )


def monitor(result: RolloutResult, cs: ConstraintSet) -> MarginReport:
    """Recompute aggregate margins from the rollout states and inputs."""
    steps = result.x_cl.shape[1] if result.x_cl.size else 0
    if steps == 0:
        return MarginReport(np.inf, np.inf, True, 0)
    state_margin = np.min(cs.d[:, None] - cs.C @ result.x_cl, axis=0)
    W = cs.W if cs.W is not None else np.eye(result.u.shape[0])
    input_margin = cs.u_max - np.max(np.abs(W @ result.u), axis=0)
    min_s = float(np.min(state_margin))
    min_u = float(np.min(input_margin))
    return MarginReport(
        min_state_margin=min_s,
        min_input_margin=min_u,
        passed=min_s >= -VIOLATION_TOL and min_u >= -VIOLATION_TOL,
        steps=steps,
    )
