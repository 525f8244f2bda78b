"""Cascaded flight controller for the dual-rotor tail-sitter.

Three nested loops run at fixed, independent rates, each latching the
most recent output of the stage above it:

* position loop (default 100 Hz): world-frame PD law with velocity
  reference feedforward produces a desired total force vector,
* attitude loop (default 250 Hz): converts the desired force direction
  plus a heading reference into a desired rotation and a proportional
  body-rate command,
* body-rate loop (default 500 Hz): computes a desired torque with
  gyroscopic compensation and integral action, then inverts the force
  and moment model to obtain per-rotor speeds and per-elevon angles.

The model inverse linearises the plant exactly (slipstream drag aside),
so loop tuning reduces to the time constants in :class:`ControllerGains`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateThrustError, DomainError, InfeasibleRollError
from .model import VehicleParams
from .rotations import (
    euler_zyx_from_matrix,
    quat_to_matrix,
    rotation_between,
    rotvec_from_matrix,
    wrap_angle,
)

# Desired-force magnitudes below this cannot define a thrust direction.
FORCE_FLOOR = 1e-3

# Fraction of the differential-thrust roll limit kept in reserve when an
# infeasible roll command is clamped.
ROLL_CLAMP_MARGIN = 0.05

# Hover attitude at zero heading: body -z up, body x along world x.
_R_BW_HOVER0 = np.diag([1.0, -1.0, -1.0])


@dataclass
class ControllerGains:
    """Loop time constants, damping ratios, and integral gains."""

    tau_p_xy: float = 0.5      # horizontal position loop time constant, s
    tau_p_z: float = 0.3       # vertical position loop time constant, s
    zeta_p_xy: float = 0.6     # horizontal position loop damping ratio
    zeta_p_z: float = 0.83     # vertical position loop damping ratio
    tau_att: float = 0.2       # attitude loop time constant, s
    tau_omega_x: float = 0.04  # roll rate loop time constant, s
    tau_omega_y: float = 0.11  # pitch rate loop time constant, s
    tau_omega_z: float = 0.04  # yaw rate loop time constant, s
    k_i_omega_x: float = 20.0  # roll rate integral gain, 1/s
    k_i_omega_y: float = 5.0   # pitch rate integral gain, 1/s
    k_i_omega_z: float = 0.0   # yaw rate integral gain, 1/s

    def __post_init__(self) -> None:
        for name in ("tau_p_xy", "tau_p_z", "zeta_p_xy", "zeta_p_z", "tau_att",
                     "tau_omega_x", "tau_omega_y", "tau_omega_z"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"ControllerGains.{name} must be finite and > 0, got {value!r}")
        for name in ("k_i_omega_x", "k_i_omega_y", "k_i_omega_z"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise DomainError(f"ControllerGains.{name} must be finite and >= 0, got {value!r}")

    @property
    def tau_omega(self) -> np.ndarray:
        return np.array([self.tau_omega_x, self.tau_omega_y, self.tau_omega_z])

    @property
    def k_i_omega(self) -> np.ndarray:
        return np.array([self.k_i_omega_x, self.k_i_omega_y, self.k_i_omega_z])


@dataclass
class LoopRates:
    """Execution rates of the three cascade stages, Hz."""

    position_rate: float = 100.0
    attitude_rate: float = 250.0
    rate_rate: float = 500.0

    def __post_init__(self) -> None:
        if not (self.position_rate > 0 and self.attitude_rate > 0 and self.rate_rate > 0):
            raise DomainError("loop rates must be positive")


@dataclass
class Setpoint:
    """Trajectory sample handed to the controller."""

    p_des: np.ndarray                 # desired position, world frame, m
    v_des: np.ndarray                 # desired velocity, world frame, m/s
    psi_des: float = 0.0              # desired heading, rad, wrapped to (-pi, pi]

    def __post_init__(self) -> None:
        self.p_des = np.asarray(self.p_des, dtype=float)
        self.v_des = np.asarray(self.v_des, dtype=float)
        if self.p_des.shape != (3,) or self.v_des.shape != (3,):
            raise DomainError("setpoint position/velocity must be 3-vectors")
        if not (np.all(np.isfinite(self.p_des)) and np.all(np.isfinite(self.v_des))
                and math.isfinite(self.psi_des)):
            raise DomainError("setpoint must be finite")
        self.psi_des = wrap_angle(float(self.psi_des))


@dataclass
class StateEstimate:
    """State fed back to the controller (true or estimated)."""

    p: np.ndarray                     # position, world frame, m
    v: np.ndarray                     # velocity, world frame, m/s
    q: np.ndarray                     # attitude quaternion (see rotations module)
    omega: np.ndarray                 # body rates, rad/s

    def R_wb(self) -> np.ndarray:
        """World-to-body rotation matrix of the estimated attitude."""
        return quat_to_matrix(self.q).T


@dataclass
class ActuatorCommand:
    """Rotor speed and elevon deflection commands."""

    omega_left: float = 0.0
    omega_right: float = 0.0
    delta_left: float = 0.0
    delta_right: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.omega_left, self.omega_right, self.delta_left, self.delta_right]
        )


def position_control(
    setpoint: Setpoint,
    p_est: np.ndarray,
    v_est: np.ndarray,
    gains: ControllerGains,
    params: VehicleParams,
) -> np.ndarray:
    """Desired world-frame force from position/velocity errors.

    Implements ``a_des = -g + (1/tau_p^2) (p_des - p) + (2 zeta_p / tau_p)
    (v_des - v)`` per axis (horizontal and vertical gains differ) and
    returns ``f_des = m * a_des``.  Gravity enters with a minus sign, so
    zero errors yield the upward hover force ``(0, 0, m g)``.
    """
    inv_tau2 = np.array(
        [1.0 / gains.tau_p_xy**2, 1.0 / gains.tau_p_xy**2, 1.0 / gains.tau_p_z**2]
    )
    damp = np.array(
        [
            2.0 * gains.zeta_p_xy / gains.tau_p_xy,
            2.0 * gains.zeta_p_xy / gains.tau_p_xy,
            2.0 * gains.zeta_p_z / gains.tau_p_z,
        ]
    )
    a_des = (
        -params.gravity_world
        + inv_tau2 * (setpoint.p_des - p_est)
        + damp * (setpoint.v_des - v_est)
    )
    return params.m * a_des


def attitude_setpoint(
    f_des: np.ndarray, psi_des: float, params: VehicleParams
) -> tuple[np.ndarray, float]:
    """Desired attitude and per-rotor thrust from a desired force vector.

    The desired rotation is assembled heading-first: starting from the
    hover attitude yawed to ``psi_des``, a minimal tilt (axis in the
    horizontal plane) takes the thrust axis onto the desired force
    direction.  At hover the tilt is the identity.

    Args:
        f_des: desired total force, world frame, N.
        psi_des: desired heading, rad.
        params: vehicle constants.

    Returns:
        ``(R_wb_des, f_a)``: world-to-body rotation of the desired
        attitude and the per-rotor thrust ``|f_des| / 2`` in N.

    Raises:
        DegenerateThrustError: if ``|f_des|`` is below the force floor.
    """
    f_des = np.asarray(f_des, dtype=float)
    norm = float(np.linalg.norm(f_des))
    if not np.all(np.isfinite(f_des)) or norm < FORCE_FLOOR:
        raise DegenerateThrustError(
            f"|f_des| = {norm:.3e} N is below the {FORCE_FLOOR:.0e} N floor"
        )
    f_hat = f_des / norm

    c, s = math.cos(psi_des), math.sin(psi_des)
    R_z = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    # Minimal world-frame tilt from straight-up thrust onto f_hat.  For a
    # force pointing straight down the tilt axis is arbitrary; pitch
    # about the heading-rotated y axis then.
    R_xy = rotation_between(
        np.array([0.0, 0.0, 1.0]), f_hat, fallback_axis=R_z @ np.array([0.0, 1.0, 0.0])
    )
    R_bw_des = R_xy @ R_z @ _R_BW_HOVER0
    return R_bw_des.T, 0.5 * norm


def attitude_control(
    R_wb_est: np.ndarray, R_wb_des: np.ndarray, gains: ControllerGains
) -> np.ndarray:
    """Proportional body-rate command from an attitude error.

    The error rotation ``R_err = R_est @ R_des^-1`` expresses, in body
    axes, the rotation still needed to reach the desired attitude.  Its
    intrinsic Z-Y-X Euler angles (rotation vector near the pitch
    singularity) scaled by ``1 / tau_att`` give the body-rate command
    that shrinks the error.
    """
    R_err = R_wb_est @ R_wb_des.T
    angles, ok = euler_zyx_from_matrix(R_err)
    if not ok:
        angles = rotvec_from_matrix(R_err)
    return angles / gains.tau_att


def rate_control(
    omega_est: np.ndarray,
    omega_des: np.ndarray,
    integral: np.ndarray,
    gains: ControllerGains,
    params: VehicleParams,
) -> np.ndarray:
    """Desired body torque from a rate error.

    ``m_des = omega x J omega + J (omega_err / tau_omega)
    + J (K_I * integral)`` with diagonal inertia; the caller owns the
    error integral and its anti-windup policy.
    """
    jx, jy, jz = params.j_xx, params.j_yy, params.j_zz
    wx, wy, wz = omega_est
    ex = omega_des[0] - wx
    ey = omega_des[1] - wy
    ez = omega_des[2] - wz
    return np.array(
        [
            wy * jz * wz - wz * jy * wy
            + jx * (ex / gains.tau_omega_x + gains.k_i_omega_x * integral[0]),
            wz * jx * wx - wx * jz * wz
            + jy * (ey / gains.tau_omega_y + gains.k_i_omega_y * integral[1]),
            wx * jy * wy - wy * jx * wx
            + jz * (ez / gains.tau_omega_z + gains.k_i_omega_z * integral[2]),
        ]
    )


def model_inverse(m_des: np.ndarray, f_a: float, params: VehicleParams) -> ActuatorCommand:
    """Exact drag-free inverse of the force/moment model.

    Solves for rotor speeds from total thrust ``2 f_a`` and roll torque,
    then for elevon deflections from pitch and yaw torque (the yaw
    equation accounts for the rotor reaction-torque imbalance that the
    roll command creates).  Slipstream drag is ignored, matching the
    forward model with ``k_d = 0``.

    Args:
        m_des: desired body torque (m_x, m_y, m_z), N m.
        f_a: per-rotor thrust, N (> 0).
        params: vehicle constants.

    Returns:
        Unsaturated actuator command; apply :func:`clamp_command` before
        sending it to hardware or the simulator.

    Raises:
        DomainError: if ``f_a <= 0`` or inputs are non-finite.
        InfeasibleRollError: if ``|m_x| >= 2 f_a l`` so a rotor-speed
            radicand would be non-positive.
    """
    m_des = np.asarray(m_des, dtype=float)
    if not (np.all(np.isfinite(m_des)) and math.isfinite(f_a)):
        raise DomainError("model_inverse inputs must be finite")
    if f_a <= 0.0:
        raise DomainError(f"per-rotor thrust must be > 0, got {f_a!r}")
    m_x, m_y, m_z = float(m_des[0]), float(m_des[1]), float(m_des[2])
    k_t, k_m, k_l, k_p, l = params.k_t, params.k_m, params.k_l, params.k_p, params.l

    lever = 2.0 * f_a * l
    rad_left = (m_x + lever) / (2.0 * k_t * l)
    rad_right = (-m_x + lever) / (2.0 * k_t * l)
    if rad_left <= 0.0 or rad_right <= 0.0:
        raise InfeasibleRollError(
            f"roll torque {m_x:.4f} N m exceeds differential-thrust range "
            f"+/-{lever:.4f} N m at f_a = {f_a:.4f} N"
        )

    coupling = k_m * k_p * m_x
    delta_left = (-k_l * k_t * m_y * l * l - k_p * k_t * m_z * l + coupling) / (
        k_l * k_p * l * (m_x + lever)
    )
    delta_right = (k_l * k_t * m_y * l * l - k_p * k_t * m_z * l + coupling) / (
        k_l * k_p * l * (m_x - lever)
    )
    return ActuatorCommand(
        omega_left=math.sqrt(rad_left),
        omega_right=math.sqrt(rad_right),
        delta_left=delta_left,
        delta_right=delta_right,
    )


def clamp_command(cmd: ActuatorCommand, params: VehicleParams) -> tuple[ActuatorCommand, bool]:
    """Saturate a command to actuator limits; flags whether anything clipped."""
    w_l = min(max(cmd.omega_left, 0.0), params.omega_max)
    w_r = min(max(cmd.omega_right, 0.0), params.omega_max)
    d_l = min(max(cmd.delta_left, -params.delta_max), params.delta_max)
    d_r = min(max(cmd.delta_right, -params.delta_max), params.delta_max)
    clamped = ActuatorCommand(w_l, w_r, d_l, d_r)
    saturated = (
        w_l != cmd.omega_left
        or w_r != cmd.omega_right
        or d_l != cmd.delta_left
        or d_r != cmd.delta_right
    )
    return clamped, saturated


@dataclass
class CascadeController:
    """Multi-rate cascade wiring the four control laws together.

    Call :meth:`update` at least as often as the fastest loop; each stage
    fires when its own period has elapsed and latches its output for the
    stages below.  Between rate-loop firings the last actuator command is
    held.  Telemetry of every latched intermediate is kept on the
    instance for logging.
    """

    params: VehicleParams
    gains: ControllerGains
    rates: LoopRates = field(default_factory=LoopRates)

    def __post_init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        """Return to the initial latched state (hover-force guess, zero rates)."""
        self.f_des = np.array([0.0, 0.0, self.params.m * self.params.g_mag])
        self.R_wb_des, self.f_a = attitude_setpoint(self.f_des, 0.0, self.params)
        self.omega_des = np.zeros(3)
        self.m_des = np.zeros(3)
        self.integral = np.zeros(3)
        self.command = ActuatorCommand()
        self.saturated = False
        self.roll_clamped = False
        self._fired = {"position": 0, "attitude": 0, "rate": 0}

    def _due(self, loop: str, rate: float, t: float) -> bool:
        count = self._fired[loop]
        if t + 1e-9 >= count / rate:
            self._fired[loop] = count + 1
            return True
        return False

    def update(self, t: float, estimate: StateEstimate, setpoint: Setpoint) -> ActuatorCommand:
        """Advance the cascade to time ``t`` and return the actuator command.

        Args:
            t: current time, s (nondecreasing across calls).
            estimate: fed-back vehicle state.
            setpoint: current trajectory sample.
        """
        if self._due("position", self.rates.position_rate, t):
            self.f_des = position_control(
                setpoint, estimate.p, estimate.v, self.gains, self.params
            )

        if self._due("attitude", self.rates.attitude_rate, t):
            self.R_wb_des, self.f_a = attitude_setpoint(
                self.f_des, setpoint.psi_des, self.params
            )
            self.omega_des = attitude_control(estimate.R_wb(), self.R_wb_des, self.gains)

        if self._due("rate", self.rates.rate_rate, t):
            omega_err = self.omega_des - estimate.omega
            m_des = rate_control(
                estimate.omega, self.omega_des, self.integral, self.gains, self.params
            )
            self.roll_clamped = False
            roll_limit = (1.0 - ROLL_CLAMP_MARGIN) * 2.0 * self.f_a * self.params.l
            if abs(m_des[0]) > roll_limit:
                m_des = m_des.copy()
                m_des[0] = math.copysign(roll_limit, m_des[0])
                self.roll_clamped = True
            self.m_des = m_des
            raw = model_inverse(m_des, self.f_a, self.params)
            self.command, self.saturated = clamp_command(raw, self.params)
            if not self.saturated:
                # anti-windup: hold the integral while any actuator clips
                self.integral = self.integral + omega_err / self.rates.rate_rate

        return self.command
