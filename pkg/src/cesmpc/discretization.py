"""Taylor-expansion discretization of the arm and stacked horizon prediction.

The one-step model is x(h+1) = A x(h) + B tau(h) + Gp with A, B, Gp frozen
at the measurement instant; the horizon stack X = S x + G U + Cp reuses the
same frozen matrices for every step of the prediction window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    JointState,
    ManipulatorParams,
    forward_dynamics,
    integrate_plant,
    mass_matrix,
)


@dataclass(frozen=True)
class DiscreteModel:
    """One-step affine model: x(h+1) = A x(h) + B tau(h) + Gp."""

    A: np.ndarray
    B: np.ndarray
    Gp: np.ndarray
    T: float

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nu(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class PredictionModel:
    """Stacked horizon model: X = S x + Gmat U + Cp over Z steps."""

    S: np.ndarray
    Gmat: np.ndarray
    Cp: np.ndarray
    Z: int

    @property
    def nx(self) -> int:
        return self.S.shape[1]

    @property
    def nu(self) -> int:
        return self.Gmat.shape[1] // self.Z


def discretize(params: ManipulatorParams, state: JointState, T: float) -> DiscreteModel:
    """Evaluate the Taylor one-step model at the current state.

    A has the double-integrator block form, B carries M(q)^-1 and Gp the
    drift f(x1, x2), each split T^2/2 into the position block and T into
    the velocity block.
    """
    if T <= 0.0:
        raise ValueError("sampling period T must be positive")
    n = state.q.shape[0]
    M = mass_matrix(params, state.q)
    Minv = np.linalg.inv(M)
    f = forward_dynamics(params, state, np.zeros(n))

    A = np.eye(2 * n)
    A[:n, n:] = T * np.eye(n)
    B = np.vstack([0.5 * T * T * Minv, T * Minv])
    Gp = np.concatenate([0.5 * T * T * f, T * f])
    return DiscreteModel(A=A, B=B, Gp=Gp, T=T)


def step_model(model: DiscreteModel, x: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Advance the frozen one-step model once."""
    return model.A @ x + model.B @ tau + model.Gp


def build_prediction(model: DiscreteModel, Z: int) -> PredictionModel:
    """Stack Z copies of the one-step model into X = S x + G U + Cp."""
    if Z < 1:
        raise ValueError("horizon Z must be >= 1")
    nx, nu = model.nx, model.nu
    powers = [np.eye(nx)]
    for _ in range(Z):
        powers.append(model.A @ powers[-1])

    S = np.vstack([powers[i + 1] for i in range(Z)])
    Gmat = np.zeros((nx * Z, nu * Z))
    Cp = np.zeros(nx * Z)
    for i in range(Z):
        for j in range(i + 1):
            Gmat[i * nx : (i + 1) * nx, j * nu : (j + 1) * nu] = (
                powers[i - j] @ model.B
            )
        if i == 0:
            Cp[:nx] = model.Gp
        else:
            Cp[i * nx : (i + 1) * nx] = model.A @ Cp[(i - 1) * nx : i * nx] + model.Gp
    return PredictionModel(S=S, Gmat=Gmat, Cp=Cp, Z=Z)


def taylor_order_study(
    params: ManipulatorParams,
    state: JointState,
    tau: np.ndarray,
    periods: tuple[float, ...] = (2e-3, 1e-3, 5e-4),
    substeps: int = 100,
) -> dict:
    """One-step Taylor vs fine-RK4 error under period halving.

    Returns the per-period position/velocity errors and the consecutive
    error ratios; ideal ratios are 8 (position, local order T^3) and
    4 (velocity, local order T^2).
    """
    n = state.q.shape[0]
    pos_err, vel_err = [], []
    for T in periods:
        model = discretize(params, state, T)
        x_taylor = step_model(model, state.x, tau)
        truth = integrate_plant(params, state, tau, T, substeps=substeps)
        pos_err.append(np.linalg.norm(x_taylor[:n] - truth.q))
        vel_err.append(np.linalg.norm(x_taylor[n:] - truth.qd))
    pos_ratios = [pos_err[i] / pos_err[i + 1] for i in range(len(periods) - 1)]
    vel_ratios = [vel_err[i] / vel_err[i + 1] for i in range(len(periods) - 1)]
    return {
        "periods": list(periods),
        "pos_errors": pos_err,
        "vel_errors": vel_err,
        "pos_ratios": pos_ratios,
        "vel_ratios": vel_ratios,
    }
