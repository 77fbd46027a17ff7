"""Torque controllers: CTC, one-step baseline MPC, and dual-mode CES-MPC.

The CES-MPC step regulates the coupling error with a receding-horizon
box-constrained quadratic program outside the terminal ellipsoid and a
fixed local law inside it.  The local law commands a joint acceleration
u = H delta on the feedback-linearized double-integrator model and is
realized on the plant by exact inverse dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contour import (
    ContourTransform,
    CouplingConfig,
    CorrectedReference,
    ReferencePoint,
    contour_transform_or_identity,
    corrected_reference,
    coupling_error,
    sync_error,
)
from .discretization import DiscreteModel, PredictionModel, build_prediction, discretize
from .dynamics import (
    JointState,
    ManipulatorParams,
    coriolis_matrix,
    forward_dynamics,
    gravity_vector,
    jacobian,
    mass_matrix,
)
from .terminal import TerminalIngredients, terminal_membership


class SingularNormalMatrixError(np.linalg.LinAlgError):
    """G'QG + R is singular; regularize the torque weight R."""


def _as_gain(value, n: int) -> np.ndarray:
    """Expand a scalar gain to diag(value) of size n."""
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    if a.ndim == 1:
        return np.diag(a)
    return a


@dataclass(frozen=True)
class CtcGains:
    """Computed-torque position/velocity gains (positive definite)."""

    Kp: np.ndarray
    Kd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Kp", _as_gain(self.Kp, 2))
        object.__setattr__(self, "Kd", _as_gain(self.Kd, 2))


@dataclass(frozen=True)
class MpcWeights:
    """Stage weights (position Q1, velocity Q2, torque R) and horizon Z."""

    Q1: np.ndarray
    Q2: np.ndarray
    R: np.ndarray
    Z: int = 10

    def __post_init__(self):
        object.__setattr__(self, "Q1", _as_gain(self.Q1, 2))
        object.__setattr__(self, "Q2", _as_gain(self.Q2, 2))
        object.__setattr__(self, "R", _as_gain(self.R, 2))
        if self.Z < 1:
            raise ValueError("horizon Z must be >= 1")

    @property
    def stage(self) -> np.ndarray:
        """Per-step state weight diag(Q1, Q2)."""
        n = self.Q1.shape[0]
        Q = np.zeros((2 * n, 2 * n))
        Q[:n, :n] = self.Q1
        Q[n:, n:] = self.Q2
        return Q


@dataclass(frozen=True)
class TorqueLimits:
    """Symmetric per-joint torque bounds (N*m)."""

    tau_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau_max", np.asarray(self.tau_max, dtype=float))
        if not np.all(self.tau_max > 0.0):
            raise ValueError("torque bounds must be strictly positive")


@dataclass
class ControllerOutput:
    """Saturated torque plus per-step diagnostics."""

    tau: np.ndarray
    mode: str
    cost: float | None = None
    delta_norm: float | None = None
    diagnostics: dict = field(default_factory=dict)


def saturate(tau, limits: TorqueLimits) -> np.ndarray:
    """Component-wise clamp to [-tau_max, tau_max]."""
    return np.clip(np.asarray(tau, dtype=float), -limits.tau_max, limits.tau_max)


def ctc_step(
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
    gains: CtcGains,
    limits: TorqueLimits,
) -> ControllerOutput:
    """Computed-torque law tau = M (qdd_d + Kp e + Kd ed) + C qd + G.

    Uses the converging error convention e = q_d - q (the law is unstable
    with the opposite sign).
    """
    e = ref.q_r - state.q
    ed = ref.qd_r - state.qd
    M = mass_matrix(params, state.q)
    C = coriolis_matrix(params, state.q, state.qd)
    tau = (
        M @ (ref.qdd_r + gains.Kp @ e + gains.Kd @ ed)
        + C @ state.qd
        + gravity_vector(params, state.q)
    )
    return ControllerOutput(tau=saturate(tau, limits), mode="single")


def mpc_baseline_step(
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
    weights: MpcWeights,
    limits: TorqueLimits,
    T: float,
) -> ControllerOutput:
    """One-step predictive law of the baseline comparator.

    Evaluates the closed-form law with the e = x - x_r error convention
    and saturates the result.
    """
    n = state.q.shape[0]
    M = mass_matrix(params, state.q)
    f = forward_dynamics(params, state, np.zeros(n))
    e1 = state.q - ref.q_r
    e2 = state.qd - ref.qd_r
    Q1, Q2, R = weights.Q1, weights.Q2, weights.R
    Pbar = 0.25 * Q1 + Q2 + (T ** -4) * M @ R @ M
    try:
        bracket = (
            (T ** -2) * Q1 @ e1
            + (T ** -1) * (0.5 * Q1 + Q2) @ e2
            + (0.25 * Q1 + Q2) @ (f - ref.qdd_r)
        )
        tau = -M @ np.linalg.solve(Pbar, bracket)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalMatrixError(
            "baseline MPC weight matrix is singular; use a nonzero Q1 or R"
        ) from exc
    return ControllerOutput(tau=saturate(tau, limits), mode="single")


def _weight_stacks(
    weights: MpcWeights, Z: int, terminal: TerminalIngredients | None
) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal state weight W and input weight stack over Z steps.

    Without terminal ingredients every step carries the stage weight;
    with them the last step carries the terminal matrix P instead.
    """
    stage = weights.stage
    nx = stage.shape[0]
    nu = weights.R.shape[0]
    W = np.zeros((Z * nx, Z * nx))
    for i in range(Z):
        blk = stage
        if terminal is not None and i == Z - 1:
            blk = terminal.P
        W[i * nx : (i + 1) * nx, i * nx : (i + 1) * nx] = blk
    Rbar = np.kron(np.eye(Z), weights.R)
    return W, Rbar


def unconstrained_horizon_solution(
    pred: PredictionModel,
    x: np.ndarray,
    Xrc: np.ndarray,
    weights: MpcWeights,
    ridge: float = 0.0,
) -> np.ndarray:
    """Closed-form minimizer U = -(G'QG + R)^-1 G'Q (Sx + Cp - Xrc).

    Raises SingularNormalMatrixError when the normal matrix is singular
    and no ridge was supplied.
    """
    W, Rbar = _weight_stacks(weights, pred.Z, None)
    r = pred.S @ x + pred.Cp - Xrc
    N = pred.Gmat.T @ W @ pred.Gmat + Rbar
    if ridge:
        N = N + ridge * np.eye(N.shape[0])
    rhs = pred.Gmat.T @ W @ r
    try:
        L = np.linalg.cholesky(0.5 * (N + N.T))
    except np.linalg.LinAlgError as exc:
        raise SingularNormalMatrixError(
            "normal matrix G'QG + R is singular; regularize the torque weight R"
        ) from exc
    y = np.linalg.solve(L, -rhs)
    return np.linalg.solve(L.T, y)


def _horizon_cost(
    GU_r: np.ndarray, U: np.ndarray, W: np.ndarray, Rbar: np.ndarray
) -> float:
    return float(GU_r @ W @ GU_r + U @ Rbar @ U)


def constrained_horizon_solution(
    pred: PredictionModel,
    x: np.ndarray,
    Xrc: np.ndarray,
    weights: MpcWeights,
    limits: TorqueLimits,
    terminal: TerminalIngredients | None = None,
    max_iter: int = 5000,
    rel_tol: float = 1e-8,
    penalty_rounds: int = 10,
) -> tuple[np.ndarray, float, dict]:
    """Box-constrained horizon optimum by projected gradient with momentum.

    Minimizes the stage cost over steps 1..Z-1 plus the terminal cost at
    step Z (when `terminal` is given; plain stage cost at every step
    otherwise) subject to per-step torque bounds.  The terminal ellipsoid
    delta'P delta <= 1 is handled by a quadratic penalty doubled on
    violation.  Returns (U, cost, info); `info` flags inexact termination
    and ellipsoid infeasibility instead of raising.
    """
    Z, nx, nu = pred.Z, pred.nx, pred.nu
    W, Rbar = _weight_stacks(weights, Z, terminal)
    r = pred.S @ x + pred.Cp - Xrc
    G = pred.Gmat
    lo = np.tile(-limits.tau_max, Z)
    hi = np.tile(limits.tau_max, Z)

    Hm = G.T @ W @ G + Rbar
    Hm = 0.5 * (Hm + Hm.T)
    grad_lin = G.T @ W @ r
    info: dict = {"regularized": False, "iterations": 0, "converged": True}
    try:
        np.linalg.cholesky(Hm + 0.0)
        ridge = 0.0
    except np.linalg.LinAlgError:
        ridge = 1e-10
        Hm = Hm + ridge * np.eye(Hm.shape[0])
        info["regularized"] = True

    def cost_of(U: np.ndarray) -> float:
        GU_r = G @ U + r
        return _horizon_cost(GU_r, U, W, Rbar)

    # fast path: clamp of the closed-form optimum, accepted if nothing binds
    U_free = np.linalg.solve(Hm, -grad_lin)
    U0 = np.clip(U_free, lo, hi)
    E = G[(Z - 1) * nx :, :]  # rows selecting the terminal state block
    r_end = r[(Z - 1) * nx :]

    def terminal_level(U: np.ndarray) -> float:
        if terminal is None:
            return 0.0
        d = E @ U + r_end
        return float(d @ terminal.P @ d)

    if np.array_equal(U0, U_free) and (terminal is None or terminal_level(U_free) <= 1.0):
        info["ellipsoid_feasible"] = True
        info["objective_history"] = [cost_of(U_free)]
        return U_free, cost_of(U_free), info

    L0 = float(np.linalg.eigvalsh(Hm)[-1])
    rho = 10.0 * (cost_of(U0) + 1.0)
    U = U0
    history: list[float] = []
    for _round in range(penalty_rounds if terminal is not None else 1):
        def phi_and_grad(V: np.ndarray):
            GV_r = G @ V + r
            val = _horizon_cost(GV_r, V, W, Rbar) + ridge * float(V @ V)
            grad = 2.0 * (G.T @ (W @ GV_r) + Rbar @ V + ridge * V)
            if terminal is not None:
                d = E @ V + r_end
                s = float(d @ terminal.P @ d) - 1.0
                if s > 0.0:
                    val += rho * s * s
                    grad += 4.0 * rho * s * (E.T @ (terminal.P @ d))
            return val, grad

        t = 1.0 / L0
        y = U.copy()
        momentum = 0.0
        phi_u, _ = phi_and_grad(U)
        history = [phi_u]
        for it in range(max_iter):
            info["iterations"] += 1
            phi_y, g_y = phi_and_grad(y)
            while True:
                V = np.clip(y - t * g_y, lo, hi)
                phi_v, _ = phi_and_grad(V)
                dv = V - y
                if phi_v <= phi_y + g_y @ dv + (dv @ dv) / (2.0 * t) + 1e-15:
                    break
                t *= 0.5
            if phi_v > phi_u:  # monotone safeguard: restart momentum
                momentum = 0.0
                V = np.clip(U - t * phi_and_grad(U)[1], lo, hi)
                phi_v, _ = phi_and_grad(V)
                if phi_v > phi_u:
                    break
            step = np.linalg.norm(V - U)
            momentum_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2))
            y = V + ((momentum - 1.0) / momentum_new) * (V - U)
            momentum = momentum_new
            U = V
            phi_u = phi_v
            history.append(phi_u)
            if step <= rel_tol * (1.0 + np.linalg.norm(U)):
                break
        else:
            info["converged"] = False
        if terminal is None or terminal_level(U) <= 1.0 + 1e-9:
            break
        rho *= 2.0
    info["ellipsoid_feasible"] = terminal is None or terminal_level(U) <= 1.0 + 1e-9
    info["objective_history"] = history
    return U, cost_of(U), info


def local_law_to_torque(
    params: ManipulatorParams,
    state: JointState,
    xrc: CorrectedReference,
    H: np.ndarray,
    delta: np.ndarray,
) -> np.ndarray:
    """Realize the local law u = H delta as a physical torque.

    u is an acceleration-level input on the constant double-integrator
    model; exact inverse dynamics maps it to the plant torque
    tau = M(q) u + C(q, qd) qd + G(q).
    """
    u_acc = H @ delta
    M = mass_matrix(params, state.q)
    C = coriolis_matrix(params, state.q, state.qd)
    return M @ u_acc + C @ state.qd + gravity_vector(params, state.q)


def ces_mpc_step(
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
    coupling: CouplingConfig,
    weights: MpcWeights,
    terminal: TerminalIngredients,
    limits: TorqueLimits,
    T: float,
    prev_mode: str | None = None,
    exit_level: float | None = None,
) -> ControllerOutput:
    """One dual-mode control step.

    Builds the coupling error from the contour machinery, then applies the
    local law inside the terminal ellipsoid and the receding-horizon QP
    outside it; only the first torque block of the QP solution is used.
    `prev_mode`/`exit_level` optionally add switching hysteresis: once in
    local-law mode, the controller leaves it only above `exit_level`.
    """
    n = state.q.shape[0]
    J = jacobian(params, state.q)
    e1 = state.q - ref.q_r
    tc = contour_transform_or_identity(ref.v_d)
    eps = sync_error(J, tc, e1, coupling)
    xrc = corrected_reference(ref, state.q, eps, coupling.lam)
    delta = coupling_error(state, xrc, ref, eps, coupling.lam)
    dvec = delta.vector
    level = float(dvec @ terminal.P @ dvec)

    if prev_mode == "local-law" and exit_level is not None:
        in_terminal = level <= exit_level
    else:
        in_terminal = terminal_membership(dvec, terminal.P)

    if in_terminal:
        tau = local_law_to_torque(params, state, xrc, terminal.H, dvec)
        return ControllerOutput(
            tau=saturate(tau, limits),
            mode="local-law",
            cost=None,
            delta_norm=level,
        )

    model = discretize(params, state, T)
    pred = build_prediction(model, weights.Z)
    Xrc = np.tile(np.concatenate([xrc.xrc_pos, xrc.xrc_vel]), weights.Z)
    U, cost, info = constrained_horizon_solution(
        pred, state.x, Xrc, weights, limits, terminal=terminal
    )
    return ControllerOutput(
        tau=saturate(U[:n], limits),
        mode="horizon-qp",
        cost=cost,
        delta_norm=level,
        diagnostics=info,
    )


def simulate_linearized_dual_mode(
    A: np.ndarray,
    B: np.ndarray,
    weights: MpcWeights,
    terminal: TerminalIngredients,
    delta0: np.ndarray,
    steps: int,
) -> tuple[np.ndarray, list[str]]:
    """Dual-mode loop on the exact linearized coupling-error model.

    The plant is replaced by delta+ = A delta + B u with no saturation;
    returns the delta'P delta series (length steps + 1) and the mode taken
    at each step.  Once the state enters the terminal set the local law
    keeps the level non-increasing.
    """
    model = DiscreteModel(A=A, B=B, Gp=np.zeros(A.shape[0]), T=1.0)
    pred = build_prediction(model, weights.Z)
    big = TorqueLimits(tau_max=1e12 * np.ones(B.shape[1]))
    delta = np.asarray(delta0, dtype=float).copy()
    levels = [float(delta @ terminal.P @ delta)]
    modes: list[str] = []
    for _ in range(steps):
        if terminal_membership(delta, terminal.P):
            u = terminal.H @ delta
            modes.append("local-law")
        else:
            U, _, _ = constrained_horizon_solution(
                pred,
                delta,
                np.zeros(pred.Z * A.shape[0]),
                weights,
                big,
                terminal=terminal,
            )
            u = U[: B.shape[1]]
            modes.append("horizon-qp")
        delta = A @ delta + B @ u
        levels.append(float(delta @ terminal.P @ delta))
    return np.asarray(levels), modes
