"""Propeller/wing force and moment model of a dual-rotor tail-sitter MAV.

Frames and sign conventions
---------------------------

* Body frame: ``z`` runs nose to tail so propeller thrust points along
  ``-z``; ``y`` points from the centre of mass toward the right rotor;
  ``x`` completes the right-handed triad (out of the wing's suction side).
* World frame: ``z`` up, gravity ``(0, 0, -g_mag)``.
* In hover the body ``-z`` axis points world-up.

Each half of the vehicle carries one propeller and one full-span elevon
sitting in that propeller's slipstream.  With rotor speed ``omega``
(rad/s) and elevon deflection ``delta`` (rad), a single side produces, in
body axes:

* thrust ``(0, 0, -k_t * omega^2)`` plus a reaction torque about ``z``
  whose sign alternates between the counter-rotating sides (left ``+``,
  right ``-``),
* slipstream lift ``(-k_l * omega^2 * delta, 0, 0)``,
* slipstream drag ``(0, 0, k_d * omega^2 * delta^2)``,
* elevon pitch torque ``(0, -k_p * omega^2 * delta, 0)``.

Forces act at the per-side application points ``(0, -l, 0)`` (left) and
``(0, +l, 0)`` (right), so differential thrust rolls the vehicle and
differential lift yaws it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_SIDES = ("left", "right")


@dataclass
class VehicleParams:
    """Physical constants of the vehicle and its actuators.

    Units: SI throughout; rotor speeds in rad/s, angles in rad.  The
    aerodynamic coefficients multiply ``omega^2`` terms as described in
    the module docstring.
    """

    m: float = 0.65            # vehicle mass, kg
    l: float = 0.20            # rotor lateral offset from centre of mass, m
    b: float = 0.64            # wing span, m (bookkeeping only)
    j_xx: float = 1.4e-2       # roll inertia, kg m^2
    j_yy: float = 6.4e-3       # pitch inertia, kg m^2
    j_zz: float = 1.8e-2       # yaw inertia, kg m^2
    k_t: float = 7.86e-6       # thrust coefficient, N s^2
    k_m: float = 1.80e-7       # rotor reaction torque coefficient, N m s^2
    k_l: float = 3.48e-6       # slipstream lift coefficient, N s^2
    k_d: float = 1.75e-6       # slipstream drag coefficient, N s^2
    k_p: float = 3.44e-7       # elevon pitch torque coefficient, N m s^2
    omega_max: float = 790.0   # rotor speed ceiling, rad/s
    delta_max: float = 0.785   # elevon deflection limit, rad
    g_mag: float = 9.81        # gravitational acceleration, m/s^2
    tau_motor: float = 0.025   # rotor speed first-order lag, s
    tau_servo: float = 0.020   # elevon deflection first-order lag, s

    def __post_init__(self) -> None:
        positive = (
            "m", "l", "b", "j_xx", "j_yy", "j_zz",
            "k_t", "k_m", "k_l", "k_d", "k_p",
            "omega_max", "delta_max", "g_mag", "tau_motor", "tau_servo",
        )
        for name in positive:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"VehicleParams.{name} must be finite and > 0, got {value!r}")

    @property
    def inertia_diag(self) -> np.ndarray:
        """Principal moments of inertia (J_xx, J_yy, J_zz)."""
        return np.array([self.j_xx, self.j_yy, self.j_zz])

    @property
    def gravity_world(self) -> np.ndarray:
        """Gravitational acceleration in world axes."""
        return np.array([0.0, 0.0, -self.g_mag])

    def hover_rotor_speed(self) -> float:
        """Rotor speed at which two propellers carry the full weight."""
        return math.sqrt(self.m * self.g_mag / (2.0 * self.k_t))


@dataclass
class ActuatorState:
    """Instantaneous rotor speeds (rad/s) and elevon deflections (rad)."""

    omega_left: float = 0.0
    omega_right: float = 0.0
    delta_left: float = 0.0
    delta_right: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.omega_left, self.omega_right, self.delta_left, self.delta_right]
        )


@dataclass
class Wrench:
    """A force/torque pair in body axes, N and N m."""

    force: np.ndarray
    torque: np.ndarray

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.torque + other.torque)

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))


def _check_actuation(omega: float, delta: float | None, params: VehicleParams) -> None:
    if not math.isfinite(omega) or omega < 0.0:
        raise DomainError(f"rotor speed must be finite and >= 0, got {omega!r}")
    if delta is not None:
        if not math.isfinite(delta) or abs(delta) > params.delta_max + 1e-12:
            raise DomainError(
                f"elevon deflection must satisfy |delta| <= {params.delta_max}, got {delta!r}"
            )


def prop_wrench(omega: float, side: str, params: VehicleParams) -> Wrench:
    """Thrust and reaction torque of one propeller about its own hub.

    Args:
        omega: rotor speed, rad/s (>= 0).
        side: "left" or "right"; selects the reaction torque sign
            (left spins so its reaction torque is +z, right -z).
        params: vehicle constants.

    Returns:
        Wrench with force ``(0, 0, -k_t omega^2)`` and torque
        ``(0, 0, +/- k_m omega^2)``.
    """
    if side not in _SIDES:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    _check_actuation(omega, None, params)
    w2 = omega * omega
    sign = 1.0 if side == "left" else -1.0
    return Wrench(
        np.array([0.0, 0.0, -params.k_t * w2]),
        np.array([0.0, 0.0, sign * params.k_m * w2]),
    )


def aero_wrench(omega: float, delta: float, params: VehicleParams) -> Wrench:
    """Slipstream lift/drag force and elevon pitch torque of one side.

    Args:
        omega: rotor speed driving the slipstream, rad/s (>= 0).
        delta: elevon deflection, rad, ``|delta| <= delta_max``.
        params: vehicle constants.

    Returns:
        Wrench with force ``(-k_l omega^2 delta, 0, k_d omega^2 delta^2)``
        and torque ``(0, -k_p omega^2 delta, 0)``.
    """
    _check_actuation(omega, delta, params)
    w2 = omega * omega
    return Wrench(
        np.array([-params.k_l * w2 * delta, 0.0, params.k_d * w2 * delta * delta]),
        np.array([0.0, -params.k_p * w2 * delta, 0.0]),
    )


def total_wrench(act: ActuatorState, R_wb: np.ndarray, params: VehicleParams) -> Wrench:
    """Total body-frame wrench about the centre of mass, gravity included.

    Sums both sides' propeller and slipstream wrenches, adds the moments
    the per-side forces produce about the centre of mass (application
    points ``(0, -l, 0)`` left and ``(0, +l, 0)`` right), and adds the
    weight rotated into body axes.

    Args:
        act: current rotor speeds and elevon deflections.
        R_wb: 3x3 rotation, world frame to body frame.
        params: vehicle constants.
    """
    total = Wrench(
        R_wb @ (params.m * params.gravity_world),
        np.zeros(3),
    )
    for side, omega, delta, arm_y in (
        ("left", act.omega_left, act.delta_left, -params.l),
        ("right", act.omega_right, act.delta_right, +params.l),
    ):
        side_force = Wrench.zero()
        side_force = side_force + prop_wrench(omega, side, params)
        side_force = side_force + aero_wrench(omega, delta, params)
        arm = np.array([0.0, arm_y, 0.0])
        total = total + Wrench(side_force.force, side_force.torque + np.cross(arm, side_force.force))
    return total
