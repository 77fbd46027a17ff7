"""Experiment-file parsing, canonical serialization, and presets."""
import numpy as np
import pytest

from cesmpc.config import (
    ConfigError,
    PRESET_NAMES,
    parse_config,
    preset,
    serialize_config,
)
from cesmpc.dynamics import forward_kinematics


def configs_equal(a, b):
    if (a.initial is None) != (b.initial is None):
        return False
    checks = [
        a.controller == b.controller,
        a.T == b.T,
        a.duration == b.duration,
        a.substeps == b.substeps,
        a.hysteresis_exit == b.hysteresis_exit,
        a.spec.kind == b.spec.kind,
        a.spec.elbow == b.spec.elbow,
        np.array_equal(a.gains.Kp, b.gains.Kp),
        np.array_equal(a.gains.Kd, b.gains.Kd),
        np.array_equal(a.weights.Q1, b.weights.Q1),
        np.array_equal(a.weights.Q2, b.weights.Q2),
        np.array_equal(a.weights.R, b.weights.R),
        a.weights.Z == b.weights.Z,
        np.array_equal(a.limits.tau_max, b.limits.tau_max),
        a.coupling.lam == b.coupling.lam,
        a.params == b.params,
    ]
    if a.spec.kind == "circle":
        checks += [
            np.array_equal(a.spec.center, b.spec.center),
            a.spec.radius == b.spec.radius,
            a.spec.rate == b.spec.rate,
            a.spec.phase == b.spec.phase,
        ]
    else:
        checks += [
            np.array_equal(a.spec.start, b.spec.start),
            np.array_equal(a.spec.end, b.spec.end),
            a.spec.line_duration == b.spec.line_duration,
        ]
    if a.initial is not None:
        checks += [
            np.array_equal(a.initial.q, b.initial.q),
            np.array_equal(a.initial.qd, b.initial.qd),
        ]
    return all(checks)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_round_trip(name):
    cfg = preset(name)
    text = serialize_config(cfg)
    again = parse_config(text)
    assert configs_equal(cfg, again)
    # serialization itself is canonical: a second pass is identical text
    assert serialize_config(again) == text


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("does-not-exist")


def test_fig3_repro_geometry():
    cfg = preset("fig3-repro")
    assert cfg.controller == "ces-mpc"
    assert cfg.duration == 8.0
    assert np.allclose(cfg.spec.center, [0.15, 0.15])
    assert cfg.spec.radius == 0.05
    # initial state sits 2 cm radially outward from the path start, at rest
    p0 = forward_kinematics(cfg.params, cfg.initial.q)
    assert np.allclose(p0, [0.22, 0.15], atol=1e-12)
    assert np.allclose(cfg.initial.qd, 0.0)


def test_missing_section_and_key_messages():
    cfg = preset("gravity-hold")
    text = serialize_config(cfg)
    with pytest.raises(ConfigError, match=r"missing section \[manipulator\]"):
        parse_config(text.replace("[manipulator]", "[robot]"))
    with pytest.raises(ConfigError, match=r"'kp'.*\[weights\]"):
        parse_config(text.replace("kp = ", "kp_renamed = "))


def test_non_numeric_value():
    text = serialize_config(preset("gravity-hold")).replace(
        "duration = 2", "duration = soon"
    )
    with pytest.raises(ConfigError, match="not a number"):
        parse_config(text)


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line"):
        parse_config("[manipulator]\nm1 = 1\n= broken\n")


def test_unknown_trajectory_kind():
    text = serialize_config(preset("fig3-repro")).replace(
        "kind = circle", "kind = helix"
    )
    with pytest.raises(ConfigError, match="helix"):
        parse_config(text)


def test_invalid_downstream_value_becomes_config_error():
    text = serialize_config(preset("fig3-repro")).replace(
        "type = ces-mpc", "type = pid"
    )
    with pytest.raises(ConfigError):
        parse_config(text)


def test_initial_state_is_optional():
    cfg = preset("fig3-repro")
    text = serialize_config(cfg)
    lines = [
        ln for ln in text.splitlines()
        if not ln.startswith(("q1_0", "q2_0", "qd1_0", "qd2_0"))
    ]
    cfg2 = parse_config("\n".join(lines))
    assert cfg2.initial is None


def test_comments_are_ignored():
    text = "# experiment file\n" + serialize_config(preset("gravity-hold"))
    text = text.replace("duration = 2", "duration = 2  # seconds")
    cfg = parse_config(text)
    assert cfg.duration == 2.0
