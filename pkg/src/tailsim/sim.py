"""Rigid-body simulation, sensor models, and state estimation.

The plant is a single rigid body driven by the wrench of
:mod:`tailsim.model` plus optional constant disturbance offsets.  States
integrate with a classical fixed-step fourth-order Runge-Kutta scheme at
a default 2 kHz; rotor speeds and elevon deflections follow first-order
lags whose exact exponential solution is evaluated at the Runge-Kutta
substage times, so the coupled scheme keeps its fourth-order accuracy.

Equations of motion (body rates ``omega``, diagonal inertia ``J``)::

    p_dot     = v
    v_dot     = R_bw @ f_body / m        (f_body includes gravity)
    q_dot     = 0.5 * q * (0, omega)
    omega_dot = J^-1 (torque - omega x J omega)

Sensing mimics the flight hardware: a 1 kHz IMU (rate gyro plus
accelerometer measuring specific force) and a 100 Hz external pose
source, each with white Gaussian noise.  The complementary estimator
integrates low-pass-filtered gyro rates and blends pose corrections in;
a perfect-state mode passes the true state through for controller
verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import StateEstimate
from .errors import DomainError, SimulationDivergedError
from .model import ActuatorState, VehicleParams, Wrench
from .rotations import (
    quat_conjugate,
    quat_derivative,
    quat_from_rotvec,
    quat_integrate,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    quat_to_rotvec,
)

MAX_PHYSICS_DT = 2e-3


@dataclass
class DisturbanceSpec:
    """Constant offsets, sensor noise levels, and the run's random seed.

    The force offset is a steady world-frame push (wind analogue); the
    torque offset is a body-frame trim asymmetry.  Noise standard
    deviations apply per axis and per sample.  Defaults are sized so a
    disturbed hover lands in the centimetre error regime, dominated by
    the horizontal force offset along x.
    """

    force_offset_world: np.ndarray = field(
        default_factory=lambda: np.array([0.10, 0.02, 0.03])
    )                                     # N
    torque_offset_body: np.ndarray = field(
        default_factory=lambda: np.array([5e-4, 2e-3, 5e-4])
    )                                     # N m
    gyro_noise_std: float = 0.005         # rad/s
    accel_noise_std: float = 0.05         # m/s^2
    pose_pos_noise_std: float = 0.001     # m
    pose_att_noise_std: float = 0.00175   # rad (about 0.1 deg)
    seed: int = 0

    def __post_init__(self) -> None:
        self.force_offset_world = np.asarray(self.force_offset_world, dtype=float)
        self.torque_offset_body = np.asarray(self.torque_offset_body, dtype=float)
        if self.force_offset_world.shape != (3,) or self.torque_offset_body.shape != (3,):
            raise DomainError("disturbance offsets must be 3-vectors")
        for name in ("gyro_noise_std", "accel_noise_std",
                     "pose_pos_noise_std", "pose_att_noise_std"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"DisturbanceSpec.{name} must be >= 0")

    @classmethod
    def none(cls) -> "DisturbanceSpec":
        """All offsets and noise levels zero."""
        return cls(np.zeros(3), np.zeros(3), 0.0, 0.0, 0.0, 0.0)


@dataclass
class VehicleState:
    """Full simulator state."""

    p: np.ndarray                      # position, world frame, m
    v: np.ndarray                      # velocity, world frame, m/s
    q: np.ndarray                      # attitude quaternion (unit norm)
    omega: np.ndarray                  # body rates, rad/s
    act: ActuatorState = field(default_factory=ActuatorState)

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        w, x, y, z = self.q
        norm = math.sqrt(w * w + x * x + y * y + z * z)
        if abs(norm - 1.0) > 1e-6:
            raise DomainError(f"attitude quaternion must be unit norm, |q| = {norm!r}")

    def estimate_view(self) -> StateEstimate:
        """The state repackaged as a (perfect) estimate."""
        return StateEstimate(
            self.p.copy(), self.v.copy(), self.q.copy(), self.omega.copy()
        )


@dataclass
class StateDerivative:
    p_dot: np.ndarray
    v_dot: np.ndarray
    q_dot: np.ndarray
    omega_dot: np.ndarray


def derivative(state: VehicleState, wrench: Wrench, params: VehicleParams) -> StateDerivative:
    """Newton-Euler time derivative under a given body wrench."""
    R_bw = quat_to_matrix(state.q)
    J = params.inertia_diag
    return StateDerivative(
        p_dot=state.v.copy(),
        v_dot=R_bw @ wrench.force / params.m,
        q_dot=quat_derivative(state.q, state.omega),
        omega_dot=(wrench.torque - np.cross(state.omega, J * state.omega)) / J,
    )


def actuator_step(
    act: ActuatorState, command, dt: float, params: VehicleParams
) -> ActuatorState:
    """Advance actuators toward a command by their first-order lags.

    Each channel follows ``x(t) = cmd + (x0 - cmd) exp(-t / tau)`` with
    ``tau_motor`` for rotor speeds and ``tau_servo`` for elevons; results
    are clipped to the actuator limits.
    """
    if dt < 0.0:
        raise DomainError("actuator_step requires dt >= 0")
    a_m = math.exp(-dt / params.tau_motor)
    a_s = math.exp(-dt / params.tau_servo)
    return ActuatorState(
        omega_left=_clip(command.omega_left + (act.omega_left - command.omega_left) * a_m,
                         0.0, params.omega_max),
        omega_right=_clip(command.omega_right + (act.omega_right - command.omega_right) * a_m,
                          0.0, params.omega_max),
        delta_left=_clip(command.delta_left + (act.delta_left - command.delta_left) * a_s,
                         -params.delta_max, params.delta_max),
        delta_right=_clip(command.delta_right + (act.delta_right - command.delta_right) * a_s,
                          -params.delta_max, params.delta_max),
    )


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def _consts(params: VehicleParams) -> tuple:
    """Flatten the constants _rhs needs into one tuple of floats."""
    return (
        params.k_t, params.k_m, params.k_l, params.k_d, params.k_p, params.l,
        -params.m * params.g_mag, 1.0 / params.m,
        params.j_xx, params.j_yy, params.j_zz,
    )


def _rhs(y: tuple, act: tuple, consts: tuple, dist_f: tuple, dist_m: tuple) -> tuple:
    """Scalar-arithmetic right-hand side of the full state ODE.

    ``y`` packs (p, v, q, omega) as 13 floats, ``act`` the four actuator
    values, and ``consts`` the output of :func:`_consts`.  Kept free of
    array allocations because it runs four times per physics step.
    """
    (px, py, pz, vx, vy, vz, qw, qx, qy, qz, wx, wy, wz) = y
    wl, wr, dl, dr = act
    k_t, k_m, k_l, k_d, k_p, l, mg, inv_m, jx, jy, jz = consts

    # body-to-world rotation entries
    r00 = 1.0 - 2.0 * (qy * qy + qz * qz)
    r01 = 2.0 * (qx * qy - qw * qz)
    r02 = 2.0 * (qx * qz + qw * qy)
    r10 = 2.0 * (qx * qy + qw * qz)
    r11 = 1.0 - 2.0 * (qx * qx + qz * qz)
    r12 = 2.0 * (qy * qz - qw * qx)
    r20 = 2.0 * (qx * qz - qw * qy)
    r21 = 2.0 * (qy * qz + qw * qx)
    r22 = 1.0 - 2.0 * (qx * qx + qy * qy)

    # actuator wrench (same model as tailsim.model, unrolled)
    A = wl * wl
    B = wr * wr
    u_l = A * dl
    u_r = B * dr
    fx = -k_l * (u_l + u_r)
    fy = 0.0
    fz = -k_t * (A + B) + k_d * (u_l * dl + u_r * dr)
    mx = k_t * l * (A - B) - k_d * l * (u_l * dl - u_r * dr) + dist_m[0]
    my = -k_p * (u_l + u_r) + dist_m[1]
    mz = k_m * (A - B) - k_l * l * (u_l - u_r) + dist_m[2]

    # weight and world-frame force offset rotated into body axes
    dfx, dfy, dfz = dist_f
    fx += mg * r20 + r00 * dfx + r10 * dfy + r20 * dfz
    fy += mg * r21 + r01 * dfx + r11 * dfy + r21 * dfz
    fz += mg * r22 + r02 * dfx + r12 * dfy + r22 * dfz

    return (
        vx, vy, vz,
        (r00 * fx + r01 * fy + r02 * fz) * inv_m,
        (r10 * fx + r11 * fy + r12 * fz) * inv_m,
        (r20 * fx + r21 * fy + r22 * fz) * inv_m,
        0.5 * (-qx * wx - qy * wy - qz * wz),
        0.5 * (qw * wx + qy * wz - qz * wy),
        0.5 * (qw * wy - qx * wz + qz * wx),
        0.5 * (qw * wz + qx * wy - qy * wx),
        (mx - (wy * jz * wz - wz * jy * wy)) / jx,
        (my - (wz * jx * wx - wx * jz * wz)) / jy,
        (mz - (wx * jy * wy - wy * jx * wx)) / jz,
    )


def step(
    state: VehicleState,
    command,
    dt: float,
    params: VehicleParams,
    disturbance: DisturbanceSpec | None = None,
) -> VehicleState:
    """One fixed-step RK4 integration step of the full vehicle.

    Actuators are evaluated on their exact exponential response to the
    (saturated) command at the substage times 0, dt/2, and dt, and the
    attitude quaternion is renormalised afterwards.

    Args:
        state: state at the start of the step.
        command: actuator command held constant over the step (any object
            with the four actuator fields).
        dt: step size, s; must satisfy ``0 < dt <= 2e-3``.
        params: vehicle constants.
        disturbance: optional constant force/torque offsets.

    Raises:
        DomainError: on an invalid step size.
        SimulationDivergedError: if any state component leaves the
            finite range.
    """
    if not (0.0 < dt <= MAX_PHYSICS_DT):
        raise DomainError(f"physics step must satisfy 0 < dt <= {MAX_PHYSICS_DT}, got {dt!r}")
    if disturbance is None:
        dist_f = (0.0, 0.0, 0.0)
        dist_m = (0.0, 0.0, 0.0)
    else:
        dist_f = tuple(disturbance.force_offset_world)
        dist_m = tuple(disturbance.torque_offset_body)

    y0 = (*state.p, *state.v, *state.q, *state.omega)

    # exact actuator trajectories across the step
    a0 = state.act
    e_m2 = math.exp(-0.5 * dt / params.tau_motor)
    e_s2 = math.exp(-0.5 * dt / params.tau_servo)
    c_wl, c_wr = command.omega_left, command.omega_right
    c_dl, c_dr = command.delta_left, command.delta_right
    act0 = (a0.omega_left, a0.omega_right, a0.delta_left, a0.delta_right)
    act_half = (
        c_wl + (a0.omega_left - c_wl) * e_m2,
        c_wr + (a0.omega_right - c_wr) * e_m2,
        c_dl + (a0.delta_left - c_dl) * e_s2,
        c_dr + (a0.delta_right - c_dr) * e_s2,
    )
    act_full = (
        c_wl + (act_half[0] - c_wl) * e_m2,
        c_wr + (act_half[1] - c_wr) * e_m2,
        c_dl + (act_half[2] - c_dl) * e_s2,
        c_dr + (act_half[3] - c_dr) * e_s2,
    )

    half = 0.5 * dt
    consts = _consts(params)
    k1 = _rhs(y0, act0, consts, dist_f, dist_m)
    k2 = _rhs(
        tuple([y0[i] + half * k1[i] for i in range(13)]),
        act_half, consts, dist_f, dist_m,
    )
    k3 = _rhs(
        tuple([y0[i] + half * k2[i] for i in range(13)]),
        act_half, consts, dist_f, dist_m,
    )
    k4 = _rhs(
        tuple([y0[i] + dt * k3[i] for i in range(13)]),
        act_full, consts, dist_f, dist_m,
    )

    sixth = dt / 6.0
    y1 = [
        y0[i] + sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) for i in range(13)
    ]
    total = 0.0
    for v in y1:
        total += v
    if not math.isfinite(total):
        raise SimulationDivergedError("non-finite state after integration step")

    qw, qx, qy, qz = y1[6], y1[7], y1[8], y1[9]
    inv_n = 1.0 / math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    q = np.array([qw * inv_n, qx * inv_n, qy * inv_n, qz * inv_n])
    new_act = ActuatorState(
        _clip(act_full[0], 0.0, params.omega_max),
        _clip(act_full[1], 0.0, params.omega_max),
        _clip(act_full[2], -params.delta_max, params.delta_max),
        _clip(act_full[3], -params.delta_max, params.delta_max),
    )
    # bypass dataclass validation: q is unit by construction here
    out = object.__new__(VehicleState)
    out.p = np.array(y1[0:3])
    out.v = np.array(y1[3:6])
    out.q = q
    out.omega = np.array(y1[10:13])
    out.act = new_act
    return out


@dataclass
class SensorSample:
    """One IMU sample, optionally paired with an external pose fix."""

    t: float
    gyro: np.ndarray                   # body rates, rad/s
    accel: np.ndarray                  # specific force, body frame, m/s^2
    pose_p: np.ndarray | None = None   # measured position, world frame, m
    pose_q: np.ndarray | None = None   # measured attitude quaternion


def sense(
    state: VehicleState,
    true_wrench: Wrench,
    params: VehicleParams,
    disturbance: DisturbanceSpec,
    rng: np.random.Generator,
    t: float = 0.0,
    with_pose: bool = False,
) -> SensorSample:
    """Simulated IMU (and optional pose) measurement of the current state.

    The accelerometer reports specific force: the total body force minus
    weight, divided by mass, so a hovering vehicle reads ``g`` along its
    thrust axis.  All channels draw independent Gaussian noise from
    ``rng`` in a fixed order (gyro, accel, pose position, pose attitude)
    to keep runs reproducible.

    Args:
        state: true vehicle state.
        true_wrench: total body wrench currently acting (gravity included).
        params: vehicle constants.
        disturbance: noise standard deviations.
        rng: noise source.
        t: sample timestamp, s.
        with_pose: attach a pose fix to this sample.
    """
    R_wb = quat_to_matrix(state.q).T
    weight_body = R_wb @ (params.m * params.gravity_world)
    specific_force = (true_wrench.force - weight_body) / params.m

    gyro = state.omega + disturbance.gyro_noise_std * rng.standard_normal(3)
    accel = specific_force + disturbance.accel_noise_std * rng.standard_normal(3)
    pose_p = pose_q = None
    if with_pose:
        pose_p = state.p + disturbance.pose_pos_noise_std * rng.standard_normal(3)
        tilt = disturbance.pose_att_noise_std * rng.standard_normal(3)
        pose_q = quat_normalize(quat_multiply(state.q, quat_from_rotvec(tilt)))
    return SensorSample(t=t, gyro=gyro, accel=accel, pose_p=pose_p, pose_q=pose_q)


class LowPass:
    """First-order low-pass filter with exact zero-order-hold discretisation.

    ``y += (1 - exp(-dt / tau)) * (x - y)`` with ``tau = 1 / (2 pi f_c)``;
    unit DC gain, amplitude ``1 / sqrt(1 + (f / f_c)^2)`` well below the
    sampling rate.
    """

    def __init__(self, cutoff_hz: float, initial=None):
        if cutoff_hz <= 0.0:
            raise DomainError("low-pass cutoff must be > 0")
        self.tau = 1.0 / (2.0 * math.pi * cutoff_hz)
        self.y = None if initial is None else np.asarray(initial, dtype=float).copy()

    def step(self, x: np.ndarray, dt: float) -> np.ndarray:
        """Advance the filter by one sample and return the new output."""
        if dt <= 0.0:
            raise DomainError("low-pass step requires dt > 0")
        x = np.asarray(x, dtype=float)
        if self.y is None:
            self.y = x.copy()
            return self.y.copy()
        alpha = 1.0 - math.exp(-dt / self.tau)
        self.y = self.y + alpha * (x - self.y)
        return self.y.copy()


IMU_CUTOFF_HZ = 20.0


class PerfectEstimator:
    """Passes the true state through; the controller-verification default."""

    def update(self, sample: SensorSample, dt: float, truth: VehicleState) -> None:
        self._estimate = truth.estimate_view()

    def estimate(self) -> StateEstimate:
        return self._estimate


class ComplementaryEstimator:
    """Gyro-integration attitude filter with pose blending.

    Between pose fixes the attitude integrates low-pass-filtered gyro
    rates and the position propagates with the velocity estimate.  Each
    pose fix pulls the attitude a fixed fraction along the geodesic
    toward the measured attitude and applies constant-gain position and
    velocity corrections (an alpha-beta observer).

    Args:
        initial: starting estimate (measured pose at deployment).
        pose_rate: pose fix rate, Hz (sets the velocity correction gain).
        attitude_blend: per-fix fraction of the attitude innovation applied.
        pos_alpha: per-fix fraction of the position innovation applied.
        vel_beta: per-fix velocity correction, units of innovation / s
            after division by the pose period.
        cutoff_hz: IMU low-pass cutoff frequency, Hz.
    """

    def __init__(
        self,
        initial: StateEstimate,
        pose_rate: float = 100.0,
        attitude_blend: float = 0.167,
        pos_alpha: float = 0.4,
        vel_beta: float = 0.05,
        cutoff_hz: float = IMU_CUTOFF_HZ,
    ):
        if not 0.0 < attitude_blend <= 1.0 or not 0.0 < pos_alpha <= 1.0:
            raise DomainError("blend fractions must lie in (0, 1]")
        if cutoff_hz <= 0.0:
            raise DomainError("cutoff frequency must be positive")
        self.q = np.asarray(initial.q, dtype=float).copy()
        self.p = np.asarray(initial.p, dtype=float).copy()
        self.v = np.asarray(initial.v, dtype=float).copy()
        self.omega = np.asarray(initial.omega, dtype=float).copy()
        self.attitude_blend = attitude_blend
        self.pos_alpha = pos_alpha
        self.vel_gain = vel_beta * pose_rate
        self._gyro_lp = LowPass(cutoff_hz, initial.omega)
        self._accel_lp = LowPass(cutoff_hz)

    def update(self, sample: SensorSample, dt: float, truth: VehicleState | None = None) -> None:
        """Fuse one IMU sample (and its optional pose fix) into the estimate."""
        self.omega = self._gyro_lp.step(sample.gyro, dt)
        self.accel_filtered = self._accel_lp.step(sample.accel, dt)

        self.q = quat_integrate(self.q, self.omega, dt)
        self.p = self.p + self.v * dt

        if sample.pose_p is not None and sample.pose_q is not None:
            err = quat_multiply(quat_conjugate(self.q), sample.pose_q)
            self.q = quat_normalize(
                quat_multiply(
                    self.q, quat_from_rotvec(self.attitude_blend * quat_to_rotvec(err))
                )
            )
            innovation = sample.pose_p - self.p
            self.p = self.p + self.pos_alpha * innovation
            self.v = self.v + self.vel_gain * innovation

    def estimate(self) -> StateEstimate:
        return StateEstimate(self.p.copy(), self.v.copy(), self.q.copy(), self.omega.copy())
