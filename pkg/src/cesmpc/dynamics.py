"""Closed-form rigid-body model of a 2-DoF planar manipulator.

Point masses at the link tips, gravity acting in the plane.  All functions
are pure; the plant integrator is a classical RK4 with the torque held
constant over the step (zero-order hold), used as simulation ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SingularMassMatrixError(ValueError):
    """The inertia matrix is numerically singular (invalid parameters)."""


class WorkspaceError(ValueError):
    """A requested task-space point is outside the reachable workspace."""


class DivergenceError(RuntimeError):
    """Plant integration produced a non-finite state."""


@dataclass(frozen=True)
class ManipulatorParams:
    """Link masses (kg), lengths (m) and gravitational acceleration (m/s^2)."""

    m1: float = 1.0
    m2: float = 0.25
    l1: float = 0.2
    l2: float = 0.2
    g: float = 9.8

    def __post_init__(self):
        for name in ("m1", "m2", "l1", "l2", "g"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"parameter {name} must be strictly positive")


@dataclass(frozen=True)
class JointState:
    """Joint positions q (rad) and velocities qd (rad/s)."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qd", np.asarray(self.qd, dtype=float))
        if self.q.shape != self.qd.shape:
            raise ValueError("q and qd must have the same length")

    @property
    def x(self) -> np.ndarray:
        """Stacked state vector [q, qd]."""
        return np.concatenate([self.q, self.qd])


@dataclass(frozen=True)
class JointTorque:
    """Joint torque vector (N*m)."""

    tau: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        if not np.all(np.isfinite(self.tau)):
            raise ValueError("torque entries must be finite")


@dataclass(frozen=True)
class TaskPoint:
    """End-effector position p (m) and velocity v (m/s)."""

    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


def mass_matrix(params: ManipulatorParams, q) -> np.ndarray:
    """Symmetric positive-definite inertia matrix M(q)."""
    c2 = math.cos(q[1])
    a = params.l2 ** 2 * params.m2
    b = params.l1 * params.l2 * params.m2
    m11 = a + 2.0 * b * c2 + params.l1 ** 2 * params.m1
    m12 = a + b * c2
    return np.array([[m11, m12], [m12, a]])


def coriolis_matrix(params: ManipulatorParams, q, qd) -> np.ndarray:
    """Centrifugal/Coriolis matrix C(q, qd)."""
    s2 = math.sin(q[1])
    b = params.l1 * params.l2 * params.m2
    return np.array(
        [
            [-b * s2 * qd[1], -b * s2 * (qd[0] + qd[1])],
            [b * s2 * qd[0], 0.0],
        ]
    )


def gravity_vector(params: ManipulatorParams, q) -> np.ndarray:
    """Gravity torque vector G(q) for a vertical planar arm."""
    c1 = math.cos(q[0])
    c12 = math.cos(q[0] + q[1])
    g2 = params.l2 * params.m2 * params.g * c12
    return np.array([g2 + params.m1 * params.l1 * params.g * c1, g2])


def _accel(params: ManipulatorParams, q0, q1, qd0, qd1, t0, t1):
    """Scalar fast path for qdd = M^-1 (tau - C qd - G); hot inner loop."""
    c2 = math.cos(q1)
    s2 = math.sin(q1)
    a = params.l2 * params.l2 * params.m2
    b = params.l1 * params.l2 * params.m2
    m11 = a + 2.0 * b * c2 + params.l1 * params.l1 * params.m1
    m12 = a + b * c2
    det = m11 * a - m12 * m12
    if abs(det) < 1e-14:
        raise SingularMassMatrixError("mass matrix is singular for these parameters")
    c12 = math.cos(q0 + q1)
    g2 = a / params.l2 * params.g * c12
    g1 = g2 + params.m1 * params.l1 * params.g * math.cos(q0)
    # rhs = tau - C qd - G
    r0 = t0 + b * s2 * (qd1 * qd0 + (qd0 + qd1) * qd1) - g1
    r1 = t1 - b * s2 * qd0 * qd0 - g2
    inv = 1.0 / det
    return (a * r0 - m12 * r1) * inv, (m11 * r1 - m12 * r0) * inv


def forward_dynamics(params: ManipulatorParams, state: JointState, tau) -> np.ndarray:
    """Joint acceleration qdd = M(q)^-1 (tau - C(q,qd) qd - G(q))."""
    t = tau.tau if isinstance(tau, JointTorque) else np.asarray(tau, dtype=float)
    qdd = _accel(params, state.q[0], state.q[1], state.qd[0], state.qd[1], t[0], t[1])
    return np.array(qdd)


def jacobian(params: ManipulatorParams, q) -> np.ndarray:
    """Kinematic Jacobian mapping joint rates to end-effector velocity."""
    s1, c1 = math.sin(q[0]), math.cos(q[0])
    s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
    return np.array(
        [
            [-params.l1 * s1 - params.l2 * s12, -params.l2 * s12],
            [params.l1 * c1 + params.l2 * c12, params.l2 * c12],
        ]
    )


def forward_kinematics(params: ManipulatorParams, q) -> np.ndarray:
    """End-effector position of the two-link chain."""
    return np.array(
        [
            params.l1 * math.cos(q[0]) + params.l2 * math.cos(q[0] + q[1]),
            params.l1 * math.sin(q[0]) + params.l2 * math.sin(q[0] + q[1]),
        ]
    )


def inverse_kinematics(params: ManipulatorParams, p, elbow: str = "down") -> np.ndarray:
    """Joint angles reaching task position p on the requested elbow branch.

    ``elbow="down"`` selects the q2 >= 0 solution, ``"up"`` the q2 <= 0 one.
    Raises WorkspaceError for points outside the reachable annulus.
    """
    if elbow not in ("up", "down"):
        raise ValueError(f"unknown elbow branch {elbow!r}")
    px, py = float(p[0]), float(p[1])
    r2 = px * px + py * py
    c2 = (r2 - params.l1 ** 2 - params.l2 ** 2) / (2.0 * params.l1 * params.l2)
    if abs(c2) > 1.0 + 1e-9:
        raise WorkspaceError(
            f"point ({px:.6g}, {py:.6g}) is outside the workspace annulus"
        )
    c2 = min(1.0, max(-1.0, c2))
    q2 = math.acos(c2)
    if elbow == "up":
        q2 = -q2
    q1 = math.atan2(py, px) - math.atan2(
        params.l2 * math.sin(q2), params.l1 + params.l2 * c2
    )
    return np.array([q1, q2])


def integrate_plant(
    params: ManipulatorParams,
    state: JointState,
    tau,
    dt: float,
    substeps: int = 1,
) -> JointState:
    """RK4 integration of the plant over dt with the torque held constant."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    t = tau.tau if isinstance(tau, JointTorque) else np.asarray(tau, dtype=float)
    t0, t1 = float(t[0]), float(t[1])
    h = dt / substeps
    q0, q1 = float(state.q[0]), float(state.q[1])
    v0, v1 = float(state.qd[0]), float(state.qd[1])
    for _ in range(substeps):
        try:
            a0, a1 = _accel(params, q0, q1, v0, v1, t0, t1)
            k2q0, k2q1 = v0 + 0.5 * h * a0, v1 + 0.5 * h * a1
            b0, b1 = _accel(
                params, q0 + 0.5 * h * v0, q1 + 0.5 * h * v1, k2q0, k2q1, t0, t1
            )
            k3q0, k3q1 = v0 + 0.5 * h * b0, v1 + 0.5 * h * b1
            c0, c1 = _accel(
                params, q0 + 0.5 * h * k2q0, q1 + 0.5 * h * k2q1, k3q0, k3q1, t0, t1
            )
            k4q0, k4q1 = v0 + h * c0, v1 + h * c1
            d0, d1 = _accel(params, q0 + h * k3q0, q1 + h * k3q1, k4q0, k4q1, t0, t1)
        except SingularMassMatrixError:
            raise
        except ValueError as exc:
            # a non-finite intermediate angle poisons the trig evaluations
            raise DivergenceError("plant state diverged during integration") from exc
        q0 += h / 6.0 * (v0 + 2.0 * k2q0 + 2.0 * k3q0 + k4q0)
        q1 += h / 6.0 * (v1 + 2.0 * k2q1 + 2.0 * k3q1 + k4q1)
        v0 += h / 6.0 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
        v1 += h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    if not (
        math.isfinite(q0) and math.isfinite(q1) and math.isfinite(v0) and math.isfinite(v1)
    ):
        raise DivergenceError("plant state diverged during integration")
    return JointState(q=np.array([q0, q1]), qd=np.array([v0, v1]))
