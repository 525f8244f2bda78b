"""Cascaded controller stages: laws, model inverse, saturation, latching.

Expected numbers were computed independently from the stated control
laws (PD position law, per-axis first-order rate law with gyroscopic
feedforward, closed-form actuator inverse) and frozen as literals.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailsim.control import (
    FORCE_FLOOR,
    ROLL_CLAMP_MARGIN,
    ActuatorCommand,
    CascadeController,
    ControllerGains,
    LoopRates,
    Setpoint,
    StateEstimate,
    attitude_control,
    attitude_setpoint,
    clamp_command,
    model_inverse,
    position_control,
    rate_control,
)
from tailsim.errors import DegenerateThrustError, DomainError, InfeasibleRollError
from tailsim.model import VehicleParams
from tailsim.rotations import quat_to_matrix
from tailsim.scenarios import hover_attitude

PARAMS = VehicleParams()
GAINS = ControllerGains()


def hover_estimate(p=(0.0, 0.0, 1.5), yaw=0.0):
    return StateEstimate(
        p=np.array(p, dtype=float),
        v=np.zeros(3),
        q=hover_attitude(yaw),
        omega=np.zeros(3),
    )


def still_setpoint(p=(0.0, 0.0, 1.5), psi=0.0):
    return Setpoint(p_des=np.array(p, dtype=float), v_des=np.zeros(3), psi_des=psi)


# --------------------------------------------------------------------------
# position loop
# --------------------------------------------------------------------------

def test_position_control_zero_error_gives_hover_force():
    f = position_control(still_setpoint(), np.array([0.0, 0.0, 1.5]), np.zeros(3), GAINS, PARAMS)
    assert np.allclose(f, [0.0, 0.0, 0.65 * 9.81], rtol=1e-15)


def test_position_control_vertical_step():
    # 0.3 m below the setpoint: a_z = g + 0.3 / tau_z^2 = 9.81 + 3.3333...
    f = position_control(still_setpoint(), np.array([0.0, 0.0, 1.2]), np.zeros(3), GAINS, PARAMS)
    assert f[2] == pytest.approx(8.543166666666667, rel=1e-12)
    assert f[0] == 0.0 and f[1] == 0.0


def test_position_control_horizontal_gains():
    # 1 m position error: a = 1 / tau_xy^2 = 4; 1 m/s velocity error: a = 2 zeta / tau = 2.4
    f_p = position_control(
        still_setpoint(p=(1.0, 0.0, 1.5)), np.array([0.0, 0.0, 1.5]), np.zeros(3), GAINS, PARAMS
    )
    assert f_p[0] == pytest.approx(0.65 * 4.0, rel=1e-12)
    sp = Setpoint(p_des=np.array([0.0, 0.0, 1.5]), v_des=np.array([1.0, 0.0, 0.0]))
    f_v = position_control(sp, np.array([0.0, 0.0, 1.5]), np.zeros(3), GAINS, PARAMS)
    assert f_v[0] == pytest.approx(0.65 * 2.4, rel=1e-12)


# --------------------------------------------------------------------------
# attitude setpoint and attitude loop
# --------------------------------------------------------------------------

def test_attitude_setpoint_hover():
    R_wb, f_a = attitude_setpoint(np.array([0.0, 0.0, 6.3765]), 0.0, PARAMS)
    assert f_a == pytest.approx(3.18825, rel=1e-12)
    assert np.allclose(R_wb, np.diag([1.0, -1.0, -1.0]), atol=1e-15)


def test_attitude_setpoint_heading_only():
    psi = 0.7
    R_wb, _ = attitude_setpoint(np.array([0.0, 0.0, 6.3765]), psi, PARAMS)
    R_bw = R_wb.T
    # thrust axis (body -z) still world-up; body x rotated to the heading
    assert np.allclose(R_bw @ [0.0, 0.0, -1.0], [0.0, 0.0, 1.0], atol=1e-14)
    assert np.allclose(R_bw @ [1.0, 0.0, 0.0], [math.cos(psi), math.sin(psi), 0.0], atol=1e-14)


def test_attitude_setpoint_tilts_thrust_axis_onto_force():
    f_des = np.array([1.0, -0.5, 6.0])
    R_wb, f_a = attitude_setpoint(f_des, 0.3, PARAMS)
    f_hat = f_des / np.linalg.norm(f_des)
    assert np.allclose(R_wb.T @ [0.0, 0.0, -1.0], f_hat, atol=1e-13)
    assert f_a == pytest.approx(0.5 * np.linalg.norm(f_des), rel=1e-14)
    assert np.allclose(R_wb @ R_wb.T, np.eye(3), atol=1e-13)
    assert np.linalg.det(R_wb) == pytest.approx(1.0, abs=1e-12)


def test_attitude_setpoint_straight_down_force_uses_fallback():
    R_wb, _ = attitude_setpoint(np.array([0.0, 0.0, -2.0]), 0.0, PARAMS)
    assert np.allclose(R_wb.T @ [0.0, 0.0, -1.0], [0.0, 0.0, -1.0], atol=1e-13)


def test_attitude_setpoint_rejects_tiny_force():
    with pytest.raises(DegenerateThrustError):
        attitude_setpoint(np.array([0.0, 0.0, 0.5 * FORCE_FLOOR]), 0.0, PARAMS)


def test_attitude_control_zero_error():
    R = quat_to_matrix(hover_attitude(0.4)).T
    assert np.allclose(attitude_control(R, R, GAINS), np.zeros(3), atol=1e-14)


def test_attitude_control_yaw_error_rate():
    R_des = quat_to_matrix(hover_attitude(0.0)).T
    R_est = quat_to_matrix(hover_attitude(0.1)).T
    w = attitude_control(R_est, R_des, GAINS)
    # 0.1 rad heading error over tau_att = 0.2 s -> 0.5 rad/s about body z
    assert w[2] == pytest.approx(0.5, rel=1e-9)
    assert np.allclose(w[:2], 0.0, atol=1e-12)


def test_attitude_control_error_scales_inverse_tau():
    gains_fast = ControllerGains(tau_att=0.1)
    R_des = quat_to_matrix(hover_attitude(0.0)).T
    R_est = quat_to_matrix(hover_attitude(0.1)).T
    assert attitude_control(R_est, R_des, gains_fast)[2] == pytest.approx(1.0, rel=1e-9)


# --------------------------------------------------------------------------
# rate loop
# --------------------------------------------------------------------------

def test_rate_control_proportional_term():
    m = rate_control(np.zeros(3), np.array([0.1, 0.0, 0.0]), np.zeros(3), GAINS, PARAMS)
    # J_xx * (0.1 / tau_omega_x) = 0.014 * 2.5
    assert m[0] == pytest.approx(0.035, rel=1e-12)
    assert m[1] == 0.0 and m[2] == 0.0


def test_rate_control_gyroscopic_feedforward():
    omega = np.array([1.0, 2.0, 3.0])
    m = rate_control(omega, omega, np.zeros(3), GAINS, PARAMS)
    J = np.diag([0.014, 0.0064, 0.018])
    assert np.allclose(m, np.cross(omega, J @ omega), rtol=1e-12)


def test_rate_control_integral_term():
    m = rate_control(np.zeros(3), np.zeros(3), np.array([0.01, 0.01, 0.01]), GAINS, PARAMS)
    assert m[0] == pytest.approx(0.014 * 20.0 * 0.01, rel=1e-12)
    assert m[1] == pytest.approx(0.0064 * 5.0 * 0.01, rel=1e-12)
    assert m[2] == 0.0  # yaw integral gain defaults to zero


# --------------------------------------------------------------------------
# model inverse
# --------------------------------------------------------------------------

def drag_free_wrench(cmd: ActuatorCommand, params: VehicleParams):
    """Forward force/moment map with slipstream drag omitted.

    Returns (total thrust N, body torque N m) assembled from first
    principles: thrust k_t w^2 per rotor at lateral arms +/- l, rotor
    reaction torque +/- k_m w^2, slipstream lift -k_l w^2 delta at the
    same arms, elevon pitch torque -k_p w^2 delta.
    """
    w2l, w2r = cmd.omega_left**2, cmd.omega_right**2
    thrust = params.k_t * (w2l + w2r)
    m_x = params.l * params.k_t * (w2l - w2r)
    m_y = -params.k_p * (w2l * cmd.delta_left + w2r * cmd.delta_right)
    m_z = params.k_m * (w2l - w2r) + params.l * params.k_l * (
        w2r * cmd.delta_right - w2l * cmd.delta_left
    )
    return thrust, np.array([m_x, m_y, m_z])


def test_model_inverse_pure_roll_rotor_speeds():
    cmd = model_inverse(np.array([0.1, 0.0, 0.0]), 3.188, PARAMS)
    assert cmd.omega_left == pytest.approx(661.3656932081311, rel=1e-12)
    assert cmd.omega_right == pytest.approx(611.3847794969294, rel=1e-12)


def test_model_inverse_zero_torque_is_hover():
    cmd = model_inverse(np.zeros(3), 0.5 * 0.65 * 9.81, PARAMS)
    assert cmd.omega_left == pytest.approx(636.8907056884772, rel=1e-12)
    assert cmd.omega_right == pytest.approx(cmd.omega_left, rel=1e-15)
    assert cmd.delta_left == pytest.approx(0.0, abs=1e-15)
    assert cmd.delta_right == pytest.approx(0.0, abs=1e-15)


def test_model_inverse_round_trip_specific_case():
    m_des = np.array([0.05, -0.02, 0.01])
    f_a = 3.0
    cmd = model_inverse(m_des, f_a, PARAMS)
    thrust, torque = drag_free_wrench(cmd, PARAMS)
    assert thrust == pytest.approx(2.0 * f_a, rel=1e-12)
    assert np.allclose(torque, m_des, rtol=1e-12, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(-0.5, 0.5),
    st.floats(-0.05, 0.05),
    st.floats(-0.05, 0.05),
    st.floats(1.0, 4.9),
)
def test_model_inverse_round_trip_property(m_x, m_y, m_z, f_a):
    m_des = np.array([m_x, m_y, m_z])
    if abs(m_x) >= 2.0 * f_a * PARAMS.l * 0.999:
        return
    cmd = model_inverse(m_des, f_a, PARAMS)
    thrust, torque = drag_free_wrench(cmd, PARAMS)
    assert thrust == pytest.approx(2.0 * f_a, rel=1e-9)
    assert np.allclose(torque, m_des, rtol=1e-9, atol=1e-12)


def test_model_inverse_roll_feasibility_boundary():
    f_a = 2.0
    lever = 2.0 * f_a * PARAMS.l
    with pytest.raises(InfeasibleRollError):
        model_inverse(np.array([lever, 0.0, 0.0]), f_a, PARAMS)
    with pytest.raises(InfeasibleRollError):
        model_inverse(np.array([-lever - 0.01, 0.0, 0.0]), f_a, PARAMS)
    # just inside the boundary still solves
    cmd = model_inverse(np.array([0.99 * lever, 0.0, 0.0]), f_a, PARAMS)
    assert cmd.omega_right > 0.0


def test_model_inverse_rejects_nonpositive_thrust():
    with pytest.raises(DomainError):
        model_inverse(np.zeros(3), 0.0, PARAMS)
    with pytest.raises(DomainError):
        model_inverse(np.zeros(3), -1.0, PARAMS)


# --------------------------------------------------------------------------
# saturation
# --------------------------------------------------------------------------

def test_clamp_command_passes_valid_through():
    cmd = ActuatorCommand(600.0, 650.0, 0.3, -0.3)
    clamped, saturated = clamp_command(cmd, PARAMS)
    assert not saturated
    assert clamped.as_array() == pytest.approx(cmd.as_array())


def test_clamp_command_clips_and_flags():
    cmd = ActuatorCommand(900.0, -5.0, 1.0, -1.0)
    clamped, saturated = clamp_command(cmd, PARAMS)
    assert saturated
    assert clamped.omega_left == 790.0
    assert clamped.omega_right == 0.0
    assert clamped.delta_left == 0.785
    assert clamped.delta_right == -0.785


# --------------------------------------------------------------------------
# cascade wiring
# --------------------------------------------------------------------------

def test_cascade_hover_equilibrium_command():
    ctrl = CascadeController(PARAMS, GAINS)
    cmd = ctrl.update(0.0, hover_estimate(), still_setpoint())
    assert cmd.omega_left == pytest.approx(636.8907056884772, rel=1e-9)
    assert cmd.omega_right == pytest.approx(636.8907056884772, rel=1e-9)
    assert cmd.delta_left == pytest.approx(0.0, abs=1e-9)
    assert cmd.delta_right == pytest.approx(0.0, abs=1e-9)
    assert not ctrl.saturated and not ctrl.roll_clamped


def test_cascade_stage_latching():
    ctrl = CascadeController(PARAMS, GAINS)
    ctrl.update(0.0, hover_estimate(), still_setpoint())
    f_des_0 = ctrl.f_des.copy()
    # 1 ms later no loop is due (position 10 ms, attitude 4 ms, rate 2 ms):
    # even a wildly different setpoint must not change any latched output
    cmd = ctrl.update(0.001, hover_estimate(), still_setpoint(p=(50.0, 0.0, 1.5)))
    assert np.allclose(ctrl.f_des, f_des_0)
    assert cmd.omega_left == pytest.approx(636.8907056884772, rel=1e-9)
    # at 10 ms the position loop refires and the force command moves
    ctrl.update(0.010, hover_estimate(), still_setpoint(p=(50.0, 0.0, 1.5)))
    assert not np.allclose(ctrl.f_des, f_des_0)


def test_cascade_rate_loop_cadence():
    ctrl = CascadeController(PARAMS, GAINS, LoopRates(100.0, 250.0, 500.0))
    sp = still_setpoint()
    changes = 0
    prev = ctrl.update(0.0, hover_estimate(), sp).as_array()
    for k in range(1, 20):  # 1 kHz calls over 19 ms
        est_k = hover_estimate()
        est_k.omega = np.array([0.0, 0.01 * k, 0.0])  # fresh rate error every call
        cur = ctrl.update(k / 1000.0, est_k, sp).as_array()
        if not np.array_equal(cur, prev):
            changes += 1
        prev = cur
    # the 500 Hz stage refires every 2 ms: 9 changes in (0, 19] ms
    assert changes == 9


def test_cascade_roll_clamp_keeps_command_feasible():
    ctrl = CascadeController(PARAMS, GAINS)
    est = hover_estimate()
    est.omega = np.array([-40.0, 0.0, 0.0])  # violent roll rate error
    ctrl.update(0.0, est, still_setpoint())
    assert ctrl.roll_clamped
    limit = (1.0 - ROLL_CLAMP_MARGIN) * 2.0 * ctrl.f_a * PARAMS.l
    assert abs(ctrl.m_des[0]) == pytest.approx(limit, rel=1e-12)


def test_cascade_integral_freezes_while_saturated():
    ctrl = CascadeController(PARAMS, GAINS)
    est = hover_estimate()
    est.omega = np.array([0.0, -80.0, 0.0])  # forces elevon saturation
    ctrl.update(0.0, est, still_setpoint())
    assert ctrl.saturated
    assert np.allclose(ctrl.integral, np.zeros(3))
    # once the error is sane again the integral accumulates
    ctrl2 = CascadeController(PARAMS, GAINS)
    est2 = hover_estimate()
    est2.omega = np.array([0.0, 0.1, 0.0])
    ctrl2.update(0.0, est2, still_setpoint())
    assert not ctrl2.saturated
    assert ctrl2.integral[1] == pytest.approx(-0.1 / 500.0, rel=1e-12)


def test_cascade_reset_restores_initial_latches():
    ctrl = CascadeController(PARAMS, GAINS)
    ctrl.update(0.0, hover_estimate(p=(1.0, 2.0, 3.0)), still_setpoint())
    ctrl.reset()
    assert np.allclose(ctrl.f_des, [0.0, 0.0, 0.65 * 9.81])
    assert np.allclose(ctrl.integral, np.zeros(3))
    assert ctrl.command.as_array() == pytest.approx(np.zeros(4))


def test_gains_validation():
    with pytest.raises(DomainError):
        ControllerGains(tau_att=0.0)
    with pytest.raises(DomainError):
        ControllerGains(k_i_omega_x=-1.0)
    with pytest.raises(DomainError):
        LoopRates(position_rate=0.0)


def test_setpoint_validation_and_heading_wrap():
    with pytest.raises(DomainError):
        Setpoint(p_des=np.array([0.0, 0.0]), v_des=np.zeros(3))
    with pytest.raises(DomainError):
        Setpoint(p_des=np.array([0.0, 0.0, np.inf]), v_des=np.zeros(3))
    sp = Setpoint(p_des=np.zeros(3), v_des=np.zeros(3), psi_des=3.0 * math.pi)
    assert sp.psi_des == pytest.approx(math.pi)
