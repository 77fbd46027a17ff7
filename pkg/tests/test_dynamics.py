"""Rigid-body model tests: closed forms, kinematics, and the RK4 plant."""
import math

import numpy as np
import pytest

from cesmpc.dynamics import (
    DivergenceError,
    JointState,
    JointTorque,
    ManipulatorParams,
    WorkspaceError,
    coriolis_matrix,
    forward_dynamics,
    forward_kinematics,
    gravity_vector,
    integrate_plant,
    inverse_kinematics,
    jacobian,
    mass_matrix,
)

PARAMS = ManipulatorParams()


def random_state(rng):
    return JointState(
        q=rng.uniform(-math.pi, math.pi, 2), qd=rng.uniform(-3.0, 3.0, 2)
    )


def test_mass_matrix_hand_values():
    # m2 l2^2 = 0.01, m1 l1^2 = 0.04, cross term 0.01
    M = mass_matrix(PARAMS, np.zeros(2))
    assert np.allclose(M, [[0.07, 0.02], [0.02, 0.01]])
    M = mass_matrix(PARAMS, np.array([0.0, math.pi / 2]))
    assert np.allclose(M, [[0.05, 0.01], [0.01, 0.01]])


def test_mass_matrix_symmetric_positive_definite():
    rng = np.random.default_rng(11)
    for _ in range(200):
        q = rng.uniform(-math.pi, math.pi, 2)
        M = mass_matrix(PARAMS, q)
        assert np.allclose(M, M.T)
        assert np.all(np.linalg.eigvalsh(M) > 0.0)


def test_gravity_hand_values():
    assert np.allclose(gravity_vector(PARAMS, np.zeros(2)), [2.45, 0.49])
    # arm pointing straight up: no gravity torque
    up = np.array([math.pi / 2, 0.0])
    assert np.allclose(gravity_vector(PARAMS, up), 0.0, atol=1e-12)


def test_coriolis_skew_symmetry():
    """Mdot - 2C is skew-symmetric (Mdot by central difference along qd)."""
    rng = np.random.default_rng(4)
    h = 1e-7
    for _ in range(50):
        s = random_state(rng)
        Mdot = (
            mass_matrix(PARAMS, s.q + h * s.qd) - mass_matrix(PARAMS, s.q - h * s.qd)
        ) / (2.0 * h)
        S = Mdot - 2.0 * coriolis_matrix(PARAMS, s.q, s.qd)
        assert np.allclose(S, -S.T, atol=1e-6)


def test_forward_dynamics_matches_matrix_solve():
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = random_state(rng)
        tau = rng.uniform(-5.0, 5.0, 2)
        qdd = forward_dynamics(PARAMS, s, tau)
        M = mass_matrix(PARAMS, s.q)
        rhs = tau - coriolis_matrix(PARAMS, s.q, s.qd) @ s.qd - gravity_vector(PARAMS, s.q)
        assert np.allclose(qdd, np.linalg.solve(M, rhs), atol=1e-12)


def test_forward_dynamics_accepts_torque_wrapper():
    s = JointState(np.zeros(2), np.zeros(2))
    a = forward_dynamics(PARAMS, s, JointTorque(np.array([1.0, 0.2])))
    b = forward_dynamics(PARAMS, s, np.array([1.0, 0.2]))
    assert np.array_equal(a, b)


def test_joint_torque_rejects_nonfinite():
    with pytest.raises(ValueError):
        JointTorque(np.array([np.nan, 0.0]))


def test_params_must_be_positive():
    with pytest.raises(ValueError):
        ManipulatorParams(m1=0.0)
    with pytest.raises(ValueError):
        ManipulatorParams(l2=-0.1)


def test_fk_ik_round_trip_both_branches():
    rng = np.random.default_rng(23)
    for _ in range(300):
        r = rng.uniform(0.05, 0.39)
        ang = rng.uniform(-math.pi, math.pi)
        p = r * np.array([math.cos(ang), math.sin(ang)])
        for elbow in ("down", "up"):
            q = inverse_kinematics(PARAMS, p, elbow)
            assert np.allclose(forward_kinematics(PARAMS, q), p, atol=1e-12)
            if elbow == "down":
                assert q[1] >= -1e-12
            else:
                assert q[1] <= 1e-12


def test_ik_known_point():
    q = inverse_kinematics(PARAMS, np.array([0.2, 0.2]), "down")
    assert np.allclose(q, [0.0, math.pi / 2])


def test_ik_outside_workspace():
    with pytest.raises(WorkspaceError):
        inverse_kinematics(PARAMS, np.array([0.5, 0.0]))
    uneven = ManipulatorParams(l1=0.3, l2=0.1)
    with pytest.raises(WorkspaceError):
        inverse_kinematics(uneven, np.array([0.05, 0.0]))


def test_ik_rejects_unknown_branch():
    with pytest.raises(ValueError):
        inverse_kinematics(PARAMS, np.array([0.2, 0.2]), "sideways")


def test_jacobian_matches_finite_difference():
    rng = np.random.default_rng(2)
    h = 1e-7
    for _ in range(100):
        q = rng.uniform(-math.pi, math.pi, 2)
        J = jacobian(PARAMS, q)
        for j in range(2):
            dq = np.zeros(2)
            dq[j] = h
            col = (
                forward_kinematics(PARAMS, q + dq) - forward_kinematics(PARAMS, q - dq)
            ) / (2.0 * h)
            assert np.allclose(J[:, j], col, atol=1e-8)


def test_free_swing_conserves_energy():
    """Zero torque: kinetic + potential energy is constant under RK4.

    The potential matching the closed-form gravity vector is
    V = m1 g l1 sin(q1) + m2 g l2 sin(q1 + q2).
    """

    def energy(s):
        kin = 0.5 * s.qd @ mass_matrix(PARAMS, s.q) @ s.qd
        pot = PARAMS.m1 * PARAMS.g * PARAMS.l1 * math.sin(s.q[0]) + (
            PARAMS.m2 * PARAMS.g * PARAMS.l2 * math.sin(s.q[0] + s.q[1])
        )
        return kin + pot

    s = JointState(np.array([0.4, 1.1]), np.array([0.5, -0.3]))
    e0 = energy(s)
    for _ in range(500):
        s = integrate_plant(PARAMS, s, np.zeros(2), 1e-3, substeps=2)
        assert abs(energy(s) - e0) < 1e-9


def test_rk4_fourth_order_convergence():
    s = JointState(np.array([0.3, 0.9]), np.array([1.0, -0.5]))
    tau = np.array([1.5, 0.3])
    ref = integrate_plant(PARAMS, s, tau, 0.02, substeps=512)
    errs = []
    for n in (4, 8, 16):
        out = integrate_plant(PARAMS, s, tau, 0.02, substeps=n)
        errs.append(np.linalg.norm(out.x - ref.x))
    assert 12.0 < errs[0] / errs[1] < 20.0
    assert 12.0 < errs[1] / errs[2] < 20.0


def test_integrate_plant_argument_validation():
    s = JointState(np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        integrate_plant(PARAMS, s, np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        integrate_plant(PARAMS, s, np.zeros(2), 0.01, substeps=0)


def test_integrate_plant_flags_divergence():
    s = JointState(np.zeros(2), np.array([np.inf, 0.0]))
    with pytest.raises(DivergenceError):
        integrate_plant(PARAMS, s, np.zeros(2), 0.01)


def test_state_shape_mismatch():
    with pytest.raises(ValueError):
        JointState(np.zeros(2), np.zeros(3))
