"""Contour-error estimation and joint-space coupling error.

The task-space contour error is estimated as the projection of the tracking
error onto the normal of the desired path (perpendicular drop onto the
tangent at the desired point).  It is mapped to joint space through the
Jacobian to form the synchronization error, blended with the tracking error
via the coupling coefficient, and folded into a corrected reference that the
predictive controller tracks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import JointState

ZERO_TANGENT_EPS = 1e-9


class ZeroTangentError(ValueError):
    """The desired path tangent vanishes; the projection is undefined."""


@dataclass(frozen=True)
class ReferencePoint:
    """Desired joint motion and the matching task-space point at one instant."""

    q_r: np.ndarray
    qd_r: np.ndarray
    qdd_r: np.ndarray
    p_d: np.ndarray
    v_d: np.ndarray


@dataclass(frozen=True)
class ContourTransform:
    """Symmetric projection matrix annihilating the path tangent."""

    Tc: np.ndarray


@dataclass(frozen=True)
class CouplingConfig:
    """Coupling coefficient and near-singularity handling for J inversion."""

    lam: float = 1.0
    singularity_damping: float = 1e-3
    singularity_threshold: float = 1e-4

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("coupling coefficient must be >= 0")


@dataclass(frozen=True)
class CorrectedReference:
    """Lambda-weighted blend of the nominal reference and the contour point."""

    xrc_pos: np.ndarray
    xrc_vel: np.ndarray


@dataclass(frozen=True)
class CouplingError:
    """Coupling error delta = x - x_rc plus its ingredients, for diagnostics."""

    delta_pos: np.ndarray
    delta_vel: np.ndarray
    sync: np.ndarray
    tracking_pos: np.ndarray
    tracking_vel: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        """Stacked [delta_pos, delta_vel]."""
        return np.concatenate([self.delta_pos, self.delta_vel])


def contour_transform(v_d) -> ContourTransform:
    """Projection onto the normal of the unit tangent v_d / ||v_d||."""
    v = np.asarray(v_d, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= ZERO_TANGENT_EPS:
        raise ZeroTangentError("path tangent is zero; contour transform undefined")
    t = v / norm
    return ContourTransform(Tc=np.eye(len(t)) - np.outer(t, t))


def contour_transform_or_identity(v_d) -> ContourTransform:
    """As contour_transform, but treat a vanishing tangent as full projection.

    At path corners or dwells the whole tracking error is conservatively
    counted as contour error.
    """
    try:
        return contour_transform(v_d)
    except ZeroTangentError:
        return ContourTransform(Tc=np.eye(len(np.asarray(v_d))))


def estimate_contour_error(e_o, tc: ContourTransform) -> np.ndarray:
    """Estimated task-space contour error: the normal component of e_o."""
    return tc.Tc @ np.asarray(e_o, dtype=float)


def _jacobian_inverse(J: np.ndarray, cfg: CouplingConfig) -> np.ndarray:
    det = np.linalg.det(J)
    if abs(det) >= cfg.singularity_threshold:
        return np.linalg.inv(J)
    mu2 = cfg.singularity_damping ** 2
    return J.T @ np.linalg.inv(J @ J.T + mu2 * np.eye(J.shape[0]))


def sync_error(
    J: np.ndarray, tc: ContourTransform, e1, cfg: CouplingConfig
) -> np.ndarray:
    """Joint-space synchronization error Jinv Tc J e1.

    Near kinematic singularities the exact inverse is replaced by the
    damped least-squares inverse, keeping the result finite.
    """
    Jinv = _jacobian_inverse(J, cfg)
    return Jinv @ tc.Tc @ J @ np.asarray(e1, dtype=float)


def corrected_reference(
    ref: ReferencePoint, x1, eps, lam: float
) -> CorrectedReference:
    """Blend the reference position toward the contour point x_c = x1 - eps."""
    if lam < 0.0:
        raise ValueError("coupling coefficient must be >= 0")
    x1 = np.asarray(x1, dtype=float)
    xc = x1 - np.asarray(eps, dtype=float)
    return CorrectedReference(
        xrc_pos=(ref.q_r + lam * xc) / (1.0 + lam),
        xrc_vel=ref.qd_r.copy(),
    )


def coupling_error(
    state: JointState,
    xrc: CorrectedReference,
    ref: ReferencePoint,
    eps,
    lam: float,
) -> CouplingError:
    """Coupling error delta = x - x_rc with tracking terms recorded alongside.

    The position block satisfies delta_pos * (1 + lam) = e1 + lam * eps; the
    velocity block is the plain velocity tracking error.
    """
    return CouplingError(
        delta_pos=state.q - xrc.xrc_pos,
        delta_vel=state.qd - xrc.xrc_vel,
        sync=np.asarray(eps, dtype=float),
        tracking_pos=state.q - ref.q_r,
        tracking_vel=state.qd - ref.qd_r,
    )
