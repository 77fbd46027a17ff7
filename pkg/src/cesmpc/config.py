"""Experiment configuration: key = value files with [section] headers.

The format is plain INI (comments start with '#'), chosen so experiment
files stay dependency-free and diff-friendly.  Serialization is canonical
(fixed key order, 17-significant-digit floats) so parse -> serialize is a
lossless round trip.
"""
from __future__ import annotations

import configparser
import io
import math

import numpy as np

from .contour import CouplingConfig
from .controllers import CtcGains, MpcWeights, TorqueLimits
from .dynamics import JointState, ManipulatorParams, inverse_kinematics
from .sim import InvalidConfigError, SimConfig, TrajectorySpec

PRESET_NAMES = ("fig3-repro", "gravity-hold")


class ConfigError(ValueError):
    """Malformed or incomplete configuration file."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _get(cp: configparser.ConfigParser, section: str, key: str) -> str:
    if not cp.has_section(section):
        raise ConfigError(f"missing section [{section}]")
    if not cp.has_option(section, key):
        raise ConfigError(f"missing key '{key}' in section [{section}]")
    return cp.get(section, key)


def _getf(cp, section, key) -> float:
    raw = _get(cp, section, key)
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(
            f"key '{key}' in section [{section}] is not a number: {raw!r}"
        ) from exc


def parse_config(text: str) -> SimConfig:
    """Build a SimConfig from configuration text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    params = ManipulatorParams(
        m1=_getf(cp, "manipulator", "m1"),
        m2=_getf(cp, "manipulator", "m2"),
        l1=_getf(cp, "manipulator", "l1"),
        l2=_getf(cp, "manipulator", "l2"),
        g=_getf(cp, "manipulator", "g"),
    )
    kind = _get(cp, "trajectory", "kind")
    elbow = _get(cp, "trajectory", "elbow")
    if kind == "circle":
        spec = TrajectorySpec(
            kind="circle",
            center=np.array(
                [_getf(cp, "trajectory", "center_x"), _getf(cp, "trajectory", "center_y")]
            ),
            radius=_getf(cp, "trajectory", "radius"),
            rate=_getf(cp, "trajectory", "rate"),
            phase=_getf(cp, "trajectory", "phase"),
            elbow=elbow,
        )
    elif kind == "line":
        spec = TrajectorySpec(
            kind="line",
            start=np.array(
                [_getf(cp, "trajectory", "start_x"), _getf(cp, "trajectory", "start_y")]
            ),
            end=np.array(
                [_getf(cp, "trajectory", "end_x"), _getf(cp, "trajectory", "end_y")]
            ),
            line_duration=_getf(cp, "trajectory", "line_duration"),
            elbow=elbow,
        )
    else:
        raise ConfigError(f"unknown trajectory kind {kind!r}")

    initial = None
    if all(cp.has_option("sim", k) for k in ("q1_0", "q2_0", "qd1_0", "qd2_0")):
        initial = JointState(
            q=np.array([_getf(cp, "sim", "q1_0"), _getf(cp, "sim", "q2_0")]),
            qd=np.array([_getf(cp, "sim", "qd1_0"), _getf(cp, "sim", "qd2_0")]),
        )
    try:
        return SimConfig(
            params=params,
            spec=spec,
            controller=_get(cp, "controller", "type"),
            T=_getf(cp, "sim", "period"),
            duration=_getf(cp, "sim", "duration"),
            initial=initial,
            gains=CtcGains(_getf(cp, "weights", "kp"), _getf(cp, "weights", "kd")),
            weights=MpcWeights(
                Q1=_getf(cp, "weights", "q1"),
                Q2=_getf(cp, "weights", "q2"),
                R=_getf(cp, "weights", "r"),
                Z=int(_getf(cp, "weights", "horizon")),
            ),
            limits=TorqueLimits(
                np.array(
                    [_getf(cp, "limits", "tau1_max"), _getf(cp, "limits", "tau2_max")]
                )
            ),
            coupling=CouplingConfig(
                lam=_getf(cp, "controller", "lambda"),
                singularity_damping=_getf(cp, "controller", "singularity_damping"),
                singularity_threshold=_getf(cp, "controller", "singularity_threshold"),
            ),
            substeps=int(_getf(cp, "sim", "substeps")),
            hysteresis_exit=_getf(cp, "sim", "hysteresis_exit"),
        )
    except (InvalidConfigError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: SimConfig) -> str:
    """Canonical configuration text for a SimConfig (round-trips parse)."""
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for k, v in pairs:
            out.write(f"{k} = {v}\n")
        out.write("\n")

    p = cfg.params
    section(
        "manipulator",
        [(k, _fmt(getattr(p, k))) for k in ("m1", "m2", "l1", "l2", "g")],
    )
    s = cfg.spec
    if s.kind == "circle":
        section(
            "trajectory",
            [
                ("kind", "circle"),
                ("center_x", _fmt(s.center[0])),
                ("center_y", _fmt(s.center[1])),
                ("radius", _fmt(s.radius)),
                ("rate", _fmt(s.rate)),
                ("phase", _fmt(s.phase)),
                ("elbow", s.elbow),
            ],
        )
    else:
        section(
            "trajectory",
            [
                ("kind", "line"),
                ("start_x", _fmt(s.start[0])),
                ("start_y", _fmt(s.start[1])),
                ("end_x", _fmt(s.end[0])),
                ("end_y", _fmt(s.end[1])),
                ("line_duration", _fmt(s.line_duration)),
                ("elbow", s.elbow),
            ],
        )
    section(
        "controller",
        [
            ("type", cfg.controller),
            ("lambda", _fmt(cfg.coupling.lam)),
            ("singularity_damping", _fmt(cfg.coupling.singularity_damping)),
            ("singularity_threshold", _fmt(cfg.coupling.singularity_threshold)),
        ],
    )
    section(
        "weights",
        [
            ("kp", _fmt(cfg.gains.Kp[0, 0])),
            ("kd", _fmt(cfg.gains.Kd[0, 0])),
            ("q1", _fmt(cfg.weights.Q1[0, 0])),
            ("q2", _fmt(cfg.weights.Q2[0, 0])),
            ("r", _fmt(cfg.weights.R[0, 0])),
            ("horizon", str(cfg.weights.Z)),
        ],
    )
    section(
        "limits",
        [
            ("tau1_max", _fmt(cfg.limits.tau_max[0])),
            ("tau2_max", _fmt(cfg.limits.tau_max[1])),
        ],
    )
    sim_pairs = [
        ("period", _fmt(cfg.T)),
        ("duration", _fmt(cfg.duration)),
        ("substeps", str(cfg.substeps)),
        ("hysteresis_exit", _fmt(cfg.hysteresis_exit)),
    ]
    if cfg.initial is not None:
        sim_pairs += [
            ("q1_0", _fmt(cfg.initial.q[0])),
            ("q2_0", _fmt(cfg.initial.q[1])),
            ("qd1_0", _fmt(cfg.initial.qd[0])),
            ("qd2_0", _fmt(cfg.initial.qd[1])),
        ]
    section("sim", sim_pairs)
    return out.getvalue()


def preset(name: str) -> SimConfig:
    """Built-in experiment presets.

    ``fig3-repro``: circle of radius 5 cm, 4 s period, 8 s run, CES-MPC,
    initial joint state offset 2 cm radially outward from the path start.
    ``gravity-hold``: stationary reference (degenerate line), CTC, 2 s.
    """
    params = ManipulatorParams()
    if name == "fig3-repro":
        spec = TrajectorySpec(
            kind="circle",
            center=np.array([0.15, 0.15]),
            radius=0.05,
            rate=2.0 * math.pi / 4.0,
            phase=0.0,
            elbow="down",
        )
        # start 2 cm radially outward from the path start
        radial = np.array([math.cos(spec.phase), math.sin(spec.phase)])
        p0 = spec.center + (spec.radius + 0.02) * radial
        q0 = inverse_kinematics(params, p0, "down")
        return SimConfig(
            params=params,
            spec=spec,
            controller="ces-mpc",
            duration=8.0,
            initial=JointState(q=q0, qd=np.zeros(2)),
        )
    if name == "gravity-hold":
        point = np.array([0.25, 0.1])
        spec = TrajectorySpec(
            kind="line", start=point, end=point.copy(), line_duration=1.0
        )
        q0 = inverse_kinematics(params, point, "down")
        return SimConfig(
            params=params,
            spec=spec,
            controller="ctc",
            duration=2.0,
            initial=JointState(q=q0, qd=np.zeros(2)),
        )
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
