"""Closed-loop simulation harness and ground-truth contour metrics.

Runs a selected controller against the RK4 plant at a fixed control period,
with the torque held over each period.  Each log row holds the state at the
end of a control interval together with the reference at that instant and
the torque that produced it, so logs replay deterministically and error
metrics compare like with like.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import (
    CouplingConfig,
    ReferencePoint,
    contour_transform_or_identity,
    estimate_contour_error,
)
from .controllers import (
    ControllerOutput,
    CtcGains,
    MpcWeights,
    TorqueLimits,
    ces_mpc_step,
    ctc_step,
    mpc_baseline_step,
)
from .dynamics import (
    DivergenceError,
    JointState,
    ManipulatorParams,
    forward_kinematics,
    integrate_plant,
    inverse_kinematics,
    jacobian,
)
from .terminal import TerminalIngredients, double_integrator_model, solve_terminal_lmi

CONTROLLER_NAMES = ("ctc", "mpc", "ces-mpc")


class InvalidConfigError(ValueError):
    """Simulation configuration fails validation."""


@dataclass(frozen=True)
class TrajectorySpec:
    """Reference path: a circle traversed at constant rate, or a line.

    Circle fields: center (m), radius (m), rate (rad/s), phase (rad).
    Line fields: start, end (m), duration (s) for one traversal.
    `elbow` selects the inverse-kinematics branch.
    """

    kind: str
    center: np.ndarray | None = None
    radius: float = 0.0
    rate: float = 0.0
    phase: float = 0.0
    start: np.ndarray | None = None
    end: np.ndarray | None = None
    line_duration: float = 1.0
    elbow: str = "down"

    def __post_init__(self):
        if self.kind not in ("circle", "line"):
            raise InvalidConfigError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "circle":
            if self.center is None or self.radius <= 0.0:
                raise InvalidConfigError("circle needs a center and radius > 0")
            object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        else:
            if self.start is None or self.end is None:
                raise InvalidConfigError("line needs start and end points")
            object.__setattr__(self, "start", np.asarray(self.start, dtype=float))
            object.__setattr__(self, "end", np.asarray(self.end, dtype=float))


def task_reference(spec: TrajectorySpec, t: float):
    """Analytic task position, velocity and acceleration at time t."""
    if spec.kind == "circle":
        ang = spec.phase + spec.rate * t
        c, s = math.cos(ang), math.sin(ang)
        p = spec.center + spec.radius * np.array([c, s])
        v = spec.radius * spec.rate * np.array([-s, c])
        a = -spec.radius * spec.rate ** 2 * np.array([c, s])
        return p, v, a
    frac = min(max(t / spec.line_duration, 0.0), 1.0)
    d = spec.end - spec.start
    p = spec.start + frac * d
    v = d / spec.line_duration if 0.0 <= t <= spec.line_duration else np.zeros(2)
    return p, v, np.zeros(2)


def generate_reference(
    spec: TrajectorySpec, params: ManipulatorParams, t: float
) -> ReferencePoint:
    """Joint-space reference at time t via inverse kinematics.

    Joint velocity is J^-1 v_d; joint acceleration is J^-1 (a_d - Jdot qd_r)
    with Jdot by central finite difference along the path.
    """
    p_d, v_d, a_d = task_reference(spec, t)
    q_r = inverse_kinematics(params, p_d, spec.elbow)
    J = jacobian(params, q_r)
    qd_r = np.linalg.solve(J, v_d)
    xi = 1e-6
    q_m = inverse_kinematics(params, task_reference(spec, t - xi)[0], spec.elbow)
    q_p = inverse_kinematics(params, task_reference(spec, t + xi)[0], spec.elbow)
    Jdot = (jacobian(params, q_p) - jacobian(params, q_m)) / (2.0 * xi)
    qdd_r = np.linalg.solve(J, a_d - Jdot @ qd_r)
    return ReferencePoint(q_r=q_r, qd_r=qd_r, qdd_r=qdd_r, p_d=p_d, v_d=v_d)


def validate_path(
    spec: TrajectorySpec,
    params: ManipulatorParams,
    duration: float,
    samples: int = 400,
    min_det: float = 1e-4,
) -> None:
    """Reject paths leaving the workspace or grazing a kinematic singularity."""
    inner = abs(params.l1 - params.l2)
    outer = params.l1 + params.l2
    for i in range(samples + 1):
        t = duration * i / samples if duration > 0 else 0.0
        p, _, _ = task_reference(spec, t)
        r = float(np.linalg.norm(p))
        if not (inner - 1e-12 <= r <= outer + 1e-12):
            raise InvalidConfigError(
                f"path point ({p[0]:.4g}, {p[1]:.4g}) leaves the workspace"
            )
        q = inverse_kinematics(params, p, spec.elbow)
        if abs(np.linalg.det(jacobian(params, q))) < min_det:
            raise InvalidConfigError(
                f"path passes within |det J| < {min_det:g} of a singularity"
            )


@dataclass
class SimConfig:
    """Everything one closed-loop run needs."""

    params: ManipulatorParams
    spec: TrajectorySpec
    controller: str
    T: float = 0.002
    duration: float = 8.0
    initial: JointState | None = None
    gains: CtcGains = field(default_factory=lambda: CtcGains(300.0, 20.0))
    weights: MpcWeights = field(default_factory=lambda: MpcWeights(10.0, 0.0, 0.0, 10))
    limits: TorqueLimits = field(
        default_factory=lambda: TorqueLimits(np.array([10.0, 1.0]))
    )
    coupling: CouplingConfig = field(default_factory=CouplingConfig)
    substeps: int = 20
    hysteresis_exit: float = 1.2

    def __post_init__(self):
        if self.controller not in CONTROLLER_NAMES:
            raise InvalidConfigError(f"unknown controller {self.controller!r}")
        if self.T <= 0.0:
            raise InvalidConfigError("control period T must be positive")
        if self.duration < 0.0:
            raise InvalidConfigError("duration must be >= 0")
        if self.substeps < 1:
            raise InvalidConfigError("substeps must be >= 1")


@dataclass
class SimLog:
    """Per-step arrays of one closed-loop run (row k = end of interval k)."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    q_r: np.ndarray
    qd_r: np.ndarray
    tau: np.ndarray
    p: np.ndarray
    p_d: np.ndarray
    eps: np.ndarray
    mode: list[str]
    cost: np.ndarray
    diverged: bool = False

    def __len__(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class Metrics:
    """Summary metrics of one run, with brute-force contour ground truth."""

    max_contour_error: float
    rms_contour_error: float
    mean_joint_error: np.ndarray
    max_joint_error: np.ndarray
    torque_min: np.ndarray
    torque_max: np.ndarray
    settling_index: int


def terminal_ingredients_for(config: SimConfig) -> TerminalIngredients:
    """Certified (P, H) for the linearized coupling-error model at period T."""
    A, B = double_integrator_model(config.T, n=2)
    return solve_terminal_lmi(A, B, config.weights.stage)


def run_closed_loop(config: SimConfig) -> SimLog:
    """Simulate one controller over the configured duration.

    Deterministic for a fixed config.  On plant divergence the log is
    truncated and flagged instead of raising.
    """
    validate_path(config.spec, config.params, config.duration)
    n_steps = int(math.floor(config.duration / config.T + 1e-9))
    params = config.params
    if config.initial is not None:
        state = config.initial
    else:
        ref0 = generate_reference(config.spec, params, 0.0)
        state = JointState(ref0.q_r, ref0.qd_r)

    terminal = None
    if config.controller == "ces-mpc":
        terminal = terminal_ingredients_for(config)

    rows: dict[str, list] = {k: [] for k in ("t", "q", "qd", "q_r", "qd_r", "tau",
                                             "p", "p_d", "eps", "mode", "cost")}
    diverged = False
    ref = generate_reference(config.spec, params, 0.0) if n_steps else None
    prev_mode: str | None = None
    for k in range(n_steps):
        if config.controller == "ctc":
            out = ctc_step(params, state, ref, config.gains, config.limits)
        elif config.controller == "mpc":
            out = mpc_baseline_step(
                params, state, ref, config.weights, config.limits, config.T
            )
        else:
            out = ces_mpc_step(
                params,
                state,
                ref,
                config.coupling,
                config.weights,
                terminal,
                config.limits,
                config.T,
                prev_mode=prev_mode,
                exit_level=config.hysteresis_exit,
            )
            prev_mode = out.mode
        try:
            state = integrate_plant(
                params, state, out.tau, config.T, config.substeps
            )
        except DivergenceError:
            diverged = True
            break
        t_next = (k + 1) * config.T
        ref_next = generate_reference(config.spec, params, t_next)
        p = forward_kinematics(params, state.q)
        tc = contour_transform_or_identity(ref_next.v_d)
        eps = estimate_contour_error(p - ref_next.p_d, tc)
        rows["t"].append(t_next)
        rows["q"].append(state.q)
        rows["qd"].append(state.qd)
        rows["q_r"].append(ref_next.q_r)
        rows["qd_r"].append(ref_next.qd_r)
        rows["tau"].append(out.tau)
        rows["p"].append(p)
        rows["p_d"].append(ref_next.p_d)
        rows["eps"].append(eps)
        rows["mode"].append(out.mode)
        rows["cost"].append(math.nan if out.cost is None else out.cost)
        ref = ref_next

    def arr(key, width=2):
        vals = rows[key]
        if not vals:
            return np.zeros((0, width) if width else 0)
        return np.asarray(vals)

    return SimLog(
        t=np.asarray(rows["t"], dtype=float),
        q=arr("q"),
        qd=arr("qd"),
        q_r=arr("q_r"),
        qd_r=arr("qd_r"),
        tau=arr("tau"),
        p=arr("p"),
        p_d=arr("p_d"),
        eps=arr("eps"),
        mode=rows["mode"],
        cost=np.asarray(rows["cost"], dtype=float),
        diverged=diverged,
    )


def _path_samples(spec: TrajectorySpec, oversample: int) -> np.ndarray:
    if spec.kind == "circle":
        ang = np.linspace(0.0, 2.0 * math.pi, oversample, endpoint=False)
        return spec.center + spec.radius * np.stack(
            [np.cos(ang), np.sin(ang)], axis=1
        )
    frac = np.linspace(0.0, 1.0, oversample)
    return spec.start + frac[:, None] * (spec.end - spec.start)


def _path_segments(spec: TrajectorySpec, oversample: int):
    """Sampled path as polyline segments (a, b endpoints); circles wrap."""
    pts = _path_samples(spec, oversample)
    if spec.kind == "circle":
        return pts, np.roll(pts, -1, axis=0)
    return pts[:-1], pts[1:]


def _min_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Min distance from each query point to any segment, chunked over segments."""
    best = np.full(points.shape[0], np.inf)
    u = b - a
    uu = np.einsum("ij,ij->i", u, u)
    uu = np.where(uu > 0.0, uu, 1.0)
    chunk = max(1, 20_000_000 // max(points.shape[0], 1))
    for i in range(0, a.shape[0], chunk):
        ai, ui = a[i : i + chunk], u[i : i + chunk]
        w = points[:, None, :] - ai[None, :, :]
        s = np.clip(np.einsum("ijk,jk->ij", w, ui) / uu[None, i : i + chunk], 0.0, 1.0)
        d = w - s[:, :, None] * ui[None, :, :]
        best = np.minimum(best, np.einsum("ijk,ijk->ij", d, d).min(axis=1))
    return np.sqrt(best)


def circle_contour_error(p, spec: TrajectorySpec) -> float:
    """Analytic distance from a point to a circular path."""
    return abs(float(np.linalg.norm(np.asarray(p) - spec.center)) - spec.radius)


def true_contour_error(p, spec: TrajectorySpec, oversample: int = 100_000) -> float:
    """Minimum distance from p to the densely sampled desired path.

    The sampled path is treated as a polyline, so for circles the result
    agrees with the analytic distance to within the squared arc step.
    """
    if oversample < 1000:
        raise ValueError("oversample must be >= 1000")
    a, b = _path_segments(spec, oversample)
    return float(_min_segment_distance(np.asarray(p, dtype=float)[None, :], a, b)[0])


def contour_error_series(
    log: SimLog, spec: TrajectorySpec, oversample: int = 20_000
) -> np.ndarray:
    """Ground-truth contour error at every logged position."""
    if len(log) == 0:
        return np.zeros(0)
    a, b = _path_segments(spec, oversample)
    return _min_segment_distance(log.p, a, b)


def compute_metrics(
    log: SimLog,
    spec: TrajectorySpec,
    oversample: int = 20_000,
    settle_threshold: float = 1e-3,
    contour: np.ndarray | None = None,
) -> Metrics:
    """Summary metrics over a non-empty log."""
    if len(log) == 0:
        raise ValueError("cannot compute metrics of an empty log")
    if contour is None:
        contour = contour_error_series(log, spec, oversample)
    err = log.q - log.q_r
    settled = np.nonzero(contour >= settle_threshold)[0]
    if contour[-1] < settle_threshold:
        settling = int(settled[-1]) + 1 if settled.size else 0
    else:
        settling = -1
    return Metrics(
        max_contour_error=float(np.max(contour)),
        rms_contour_error=float(np.sqrt(np.mean(contour ** 2))),
        mean_joint_error=np.mean(np.abs(err), axis=0),
        max_joint_error=np.max(np.abs(err), axis=0),
        torque_min=np.min(log.tau, axis=0),
        torque_max=np.max(log.tau, axis=0),
        settling_index=settling,
    )


@dataclass
class ComparisonReport:
    """Aligned three-controller comparison on one configuration."""

    t: np.ndarray
    logs: dict[str, SimLog]
    metrics: dict[str, Metrics]
    contour: dict[str, np.ndarray]
    failures: dict[str, str]


def compare_controllers(base: SimConfig, oversample: int = 20_000) -> ComparisonReport:
    """Run CTC, baseline MPC and CES-MPC from identical initial conditions."""
    logs: dict[str, SimLog] = {}
    metrics: dict[str, Metrics] = {}
    contour: dict[str, np.ndarray] = {}
    failures: dict[str, str] = {}
    t = np.zeros(0)
    for name in CONTROLLER_NAMES:
        cfg = SimConfig(
            params=base.params,
            spec=base.spec,
            controller=name,
            T=base.T,
            duration=base.duration,
            initial=base.initial,
            gains=base.gains,
            weights=base.weights,
            limits=base.limits,
            coupling=base.coupling,
            substeps=base.substeps,
            hysteresis_exit=base.hysteresis_exit,
        )
        try:
            log = run_closed_loop(cfg)
        except Exception as exc:  # keep other runs alive
            failures[name] = str(exc)
            continue
        logs[name] = log
        if log.diverged:
            failures[name] = "plant diverged; partial log retained"
        if len(log):
            series = contour_error_series(log, base.spec, oversample)
            metrics[name] = compute_metrics(log, base.spec, contour=series)
            contour[name] = series
            t = log.t
    return ComparisonReport(
        t=t, logs=logs, metrics=metrics, contour=contour, failures=failures
    )
