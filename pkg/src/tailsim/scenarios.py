"""Reference trajectories, closed-loop scenario runs, logging, and metrics.

A scenario couples a reference trajectory (hover hold, waypoint legs,
circle, or star) with the full closed loop: physics stepped at the
configured rate, sensors sampled and fused when the complementary
estimator is selected, the controller cascade polled at the rate-loop
frequency, and a fixed-rate log captured before each logged tick is
stepped.  Everything is deterministic given the configuration and seed.

Waypoint-style paths use a trapezoidal speed profile per leg (capped at
the configured speed, symmetric acceleration), so commanded positions
are continuous and commanded speed never exceeds the cap.  After the
path ends the reference holds the final point.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .control import CascadeController, Setpoint
from .errors import DomainError, MetricsWindowError, SimulationDivergedError
from .model import VehicleParams, Wrench, total_wrench
from .rotations import matrix_to_quat, quat_to_matrix, wrap_angle
from .sim import (
    ComplementaryEstimator,
    DisturbanceSpec,
    PerfectEstimator,
    VehicleState,
    ActuatorState,
    sense,
    step,
)

LOG_COLUMNS = (
    "t",
    "ref_px", "ref_py", "ref_pz", "ref_vx", "ref_vy", "ref_vz", "ref_psi",
    "px", "py", "pz", "vx", "vy", "vz",
    "qw", "qx", "qy", "qz", "wx", "wy", "wz",
    "est_px", "est_py", "est_pz", "est_vx", "est_vy", "est_vz",
    "est_qw", "est_qx", "est_qy", "est_qz", "est_wx", "est_wy", "est_wz",
    "fdes_x", "fdes_y", "fdes_z",
    "wdes_x", "wdes_y", "wdes_z",
    "mdes_x", "mdes_y", "mdes_z",
    "cmd_omega_left", "cmd_omega_right", "cmd_delta_left", "cmd_delta_right",
    "act_omega_left", "act_omega_right", "act_delta_left", "act_delta_right",
    "saturated", "roll_clamped",
)

_FLAG_COLUMNS = ("saturated", "roll_clamped")


# ---------------------------------------------------------------------------
# reference trajectories


@dataclass
class _Leg:
    """One straight path segment under a trapezoidal speed profile."""

    t0: float                 # leg start time, s
    duration: float           # leg duration, s
    p0: np.ndarray            # leg start point
    u: np.ndarray             # unit direction
    length: float
    accel: float
    t_acc: float              # acceleration phase duration, s
    v_peak: float

    def sample(self, tau: float) -> tuple[float, float]:
        """(distance along leg, speed) at leg-relative time ``tau``."""
        tau = min(max(tau, 0.0), self.duration)
        if tau <= self.t_acc:
            return 0.5 * self.accel * tau * tau, self.accel * tau
        if tau >= self.duration - self.t_acc:
            rem = self.duration - tau
            return self.length - 0.5 * self.accel * rem * rem, self.accel * rem
        d_acc = 0.5 * self.accel * self.t_acc * self.t_acc
        return d_acc + self.v_peak * (tau - self.t_acc), self.v_peak


def _make_legs(
    points: np.ndarray, speed: float, accel: float, dwell: float = 0.0
) -> list[_Leg]:
    """Trapezoidal legs through ``points`` with a hold after each leg.

    The dwell lets the closed loop settle at each waypoint before the
    next leg excites it again; the reference holds the waypoint (zero
    velocity) for that long.
    """
    legs: list[_Leg] = []
    t0 = 0.0
    for a, b in zip(points[:-1], points[1:]):
        delta = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        length = float(np.linalg.norm(delta))
        if length < 1e-12:
            continue
        t_acc = speed / accel
        if length < accel * t_acc * t_acc:       # too short to reach the cap
            v_peak = math.sqrt(length * accel)
            t_acc = v_peak / accel
            duration = 2.0 * t_acc
        else:
            v_peak = speed
            duration = 2.0 * t_acc + (length - accel * t_acc * t_acc) / speed
        legs.append(
            _Leg(t0, duration, np.asarray(a, dtype=float), delta / length,
                 length, accel, t_acc, v_peak)
        )
        t0 += duration + dwell
    if not legs:
        raise DomainError("path has no legs with nonzero length")
    return legs


def _star_vertices(center: np.ndarray, radius: float, n_points: int) -> np.ndarray:
    """Closed star polygon: every second vertex of a regular n-gon."""
    step_k = 2 if n_points % 2 else 1   # even counts fall back to the n-gon
    angles = [
        math.pi / 2 + (step_k * k) * 2.0 * math.pi / n_points
        for k in range(n_points + 1)
    ]
    return np.array(
        [center + radius * np.array([math.cos(a), math.sin(a), 0.0]) for a in angles]
    )


@dataclass
class Scenario:
    """A reference trajectory definition over a fixed time horizon."""

    kind: str
    duration_s: float
    yaw_mode: str = "fixed"
    yaw_fixed_rad: float = 0.0
    hover_pos: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.5]))
    circle_center: np.ndarray | None = None
    circle_radius: float = 1.5
    circle_rate: float = 1.0          # rad/s, = speed / radius
    legs: list[_Leg] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.duration_s <= 0.0:
            raise DomainError(f"duration must be > 0, got {self.duration_s}")


def make_scenario(config: Config) -> Scenario:
    """Build the Scenario selected by the configuration."""
    h = config.harness
    common = dict(
        duration_s=h.duration_s, yaw_mode=h.yaw_mode, yaw_fixed_rad=h.yaw_fixed_rad
    )
    if h.scenario == "hover":
        return Scenario("hover", hover_pos=h.hover_pos.copy(), **common)
    if h.scenario == "circle":
        return Scenario(
            "circle",
            circle_center=h.circle_center.copy(),
            circle_radius=h.circle_radius_m,
            circle_rate=h.circle_speed_mps / h.circle_radius_m,
            **common,
        )
    if h.scenario == "waypoint":
        legs = _make_legs(
            h.waypoints, h.waypoint_speed_mps, h.waypoint_accel_mps2,
            h.waypoint_dwell_s,
        )
        return Scenario("waypoint", legs=legs, **common)
    if h.scenario == "star":
        vertices = _star_vertices(h.star_center, h.star_radius_m, h.star_points)
        legs = _make_legs(
            vertices, h.star_speed_mps, h.star_accel_mps2, h.waypoint_dwell_s
        )
        return Scenario("star", legs=legs, **common)
    raise DomainError(f"unknown scenario kind {h.scenario!r}")


def _leg_yaw(leg: _Leg, fallback: float) -> float:
    if abs(leg.u[0]) < 1e-12 and abs(leg.u[1]) < 1e-12:
        return fallback
    return math.atan2(leg.u[1], leg.u[0])


def reference(t: float, scenario: Scenario) -> Setpoint:
    """Reference setpoint at time ``t``.

    Raises:
        DomainError: if ``t`` lies outside [0, duration].
    """
    if not -1e-9 <= t <= scenario.duration_s + 1e-9:
        raise DomainError(
            f"reference time {t!r} outside [0, {scenario.duration_s}]"
        )
    yaw = scenario.yaw_fixed_rad
    if scenario.kind == "hover":
        return Setpoint(scenario.hover_pos, np.zeros(3), yaw)
    if scenario.kind == "circle":
        theta = scenario.circle_rate * t
        r = scenario.circle_radius
        c, s = math.cos(theta), math.sin(theta)
        p = scenario.circle_center + np.array([r * c, r * s, 0.0])
        speed = scenario.circle_rate * r
        v = np.array([-speed * s, speed * c, 0.0])
        if scenario.yaw_mode == "tangent":
            yaw = wrap_angle(theta + math.pi / 2.0)
        return Setpoint(p, v, yaw)

    # waypoint / star: locate the active leg
    legs = scenario.legs
    starts = [leg.t0 for leg in legs]
    i = bisect_right(starts, t) - 1
    i = max(i, 0)
    leg = legs[i]
    if t >= leg.t0 + leg.duration and i == len(legs) - 1:
        p = leg.p0 + leg.length * leg.u
        v = np.zeros(3)
    else:
        dist, speed = leg.sample(t - leg.t0)
        p = leg.p0 + dist * leg.u
        v = speed * leg.u
    if scenario.yaw_mode == "tangent":
        yaw = _leg_yaw(leg, scenario.yaw_fixed_rad)
    return Setpoint(p, v, yaw)


# ---------------------------------------------------------------------------
# logging


class ScenarioLog:
    """Fixed-rate log of one scenario run (one row per logging tick)."""

    def __init__(self, n_rows: int):
        self.data = np.zeros((n_rows, len(LOG_COLUMNS)))
        self._row = 0

    def append(self, row: list[float]) -> None:
        self.data[self._row] = row
        self._row += 1

    def __len__(self) -> int:
        return self._row

    def column(self, name: str) -> np.ndarray:
        """One column by name, trimmed to the rows actually written."""
        return self.data[: self._row, LOG_COLUMNS.index(name)]

    def columns(self, *names: str) -> np.ndarray:
        """Several columns stacked as (n_rows, len(names))."""
        idx = [LOG_COLUMNS.index(n) for n in names]
        return self.data[: self._row, idx]

    def to_csv(self) -> str:
        flag_idx = {LOG_COLUMNS.index(n) for n in _FLAG_COLUMNS}
        lines = [",".join(LOG_COLUMNS)]
        for row in self.data[: self._row]:
            lines.append(
                ",".join(
                    str(int(v)) if j in flag_idx else f"{v:.17g}"
                    for j, v in enumerate(row)
                )
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    """Tracking-quality summary of one run.

    RMS errors are taken after the transient window; peaks over the full
    log.  ``peak_pitch_rad`` is the largest tilt of the thrust axis away
    from vertical.  ``latency_s`` is the mean cross-correlation delay
    between reference and response over the axes the reference actually
    excites (0 when none are).
    """

    rms_m: np.ndarray            # per-axis RMS position error, m
    peak_m: np.ndarray           # per-axis peak position error, m
    peak_pitch_rad: float
    peak_speed_mps: float
    latency_s: float

    def __post_init__(self) -> None:
        self.rms_m = np.asarray(self.rms_m, dtype=float)
        self.peak_m = np.asarray(self.peak_m, dtype=float)
        if np.any(self.rms_m < 0.0) or np.any(self.peak_m + 1e-15 < self.rms_m):
            raise DomainError("metrics must satisfy 0 <= rms <= peak per axis")

    def to_dict(self) -> dict[str, float]:
        return {
            "rms_x_m": float(self.rms_m[0]),
            "rms_y_m": float(self.rms_m[1]),
            "rms_z_m": float(self.rms_m[2]),
            "peak_x_m": float(self.peak_m[0]),
            "peak_y_m": float(self.peak_m[1]),
            "peak_z_m": float(self.peak_m[2]),
            "peak_pitch_rad": float(self.peak_pitch_rad),
            "peak_speed_mps": float(self.peak_speed_mps),
            "latency_s": float(self.latency_s),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write_json(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_json())


def _correlation_lag(ref: np.ndarray, resp: np.ndarray, dt: float, max_lag_s: float = 2.0) -> float:
    """Delay (s, positive = response late) maximizing the cross-correlation.

    Uses the raw (unnormalised) cross-correlation: per-lag overlap
    normalisation amplifies truncation artefacts and can displace the
    peak badly when the record is only a few signal periods long, while
    the raw estimate's taper bias stays under a couple of samples for
    records much longer than the lag.  A parabolic fit through the peak
    refines the estimate below the sample period.
    """
    r = ref - ref.mean()
    y = resp - resp.mean()
    n = len(r)
    c = np.correlate(y, r, mode="full")
    lags = np.arange(-(n - 1), n)
    max_lag = min(n - 1, int(round(max_lag_s / dt)))
    window = (lags >= -max_lag) & (lags <= max_lag)
    cw = c[window]
    k = int(np.argmax(cw))
    best = float(lags[window][k])
    if 0 < k < len(cw) - 1:
        curvature = cw[k - 1] - 2.0 * cw[k] + cw[k + 1]
        if curvature < 0.0:
            best += 0.5 * float(cw[k - 1] - cw[k + 1]) / float(curvature)
    return best * dt


def metrics(log: ScenarioLog, transient_window_s: float = 5.0) -> Metrics:
    """Compute tracking metrics from a run log.

    Raises:
        MetricsWindowError: empty log, or nothing left after the
            transient window.
    """
    if len(log) < 2:
        raise MetricsWindowError("log needs at least two rows")
    t = log.column("t")
    ref_p = log.columns("ref_px", "ref_py", "ref_pz")
    p = log.columns("px", "py", "pz")
    i0 = int(np.searchsorted(t, transient_window_s - 1e-12))
    if i0 >= len(t) - 1:
        raise MetricsWindowError(
            f"log ends at {t[-1]:.3f} s, inside the {transient_window_s:.3f} s "
            "transient window"
        )

    err = ref_p - p
    rms = np.sqrt(np.mean(err[i0:] ** 2, axis=0))
    peak = np.max(np.abs(err), axis=0)

    qx = log.column("qx")
    qy = log.column("qy")
    cos_tilt = np.clip(2.0 * (qx**2 + qy**2) - 1.0, -1.0, 1.0)
    peak_pitch = float(np.max(np.arccos(cos_tilt)))

    v = log.columns("vx", "vy", "vz")
    peak_speed = float(np.max(np.linalg.norm(v, axis=1)))

    dt = float(t[1] - t[0])
    lags = [
        _correlation_lag(ref_p[i0:, axis], p[i0:, axis], dt)
        for axis in range(3)
        if np.std(ref_p[i0:, axis]) > 1e-9
    ]
    latency = float(np.mean(lags)) if lags else 0.0

    return Metrics(rms, peak, peak_pitch, peak_speed, latency)


# ---------------------------------------------------------------------------
# closed-loop execution


def hover_attitude(yaw: float) -> np.ndarray:
    """Body-to-world quaternion of the level hover attitude at heading ``yaw``."""
    c, s = math.cos(yaw), math.sin(yaw)
    rot_z = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    flip = np.diag([1.0, -1.0, -1.0])
    return matrix_to_quat(rot_z @ flip)


def initial_state(config: Config, scenario: Scenario) -> VehicleState:
    """Start on the reference (plus configured offset) with trimmed actuators."""
    sp = reference(0.0, scenario)
    omega_h = config.params.hover_rotor_speed()
    return VehicleState(
        p=sp.p_des + config.harness.start_offset,
        v=sp.v_des.copy(),
        q=hover_attitude(sp.psi_des),
        omega=np.zeros(3),
        act=ActuatorState(omega_h, omega_h, 0.0, 0.0),
    )


def run_scenario(config: Config) -> tuple[ScenarioLog, Metrics]:
    """Execute one closed-loop scenario.

    Physics advances at the configured rate; the controller cascade is
    polled at the rate-loop frequency (each stage fires on its own
    schedule); with the complementary estimator, IMU samples (and pose
    fixes at the pose rate) are fused as they arrive.  The log captures
    the state at each logging tick before it is stepped.

    Raises:
        SimulationDivergedError: with the failure timestamp attached.
        ConfigError: via configuration validation at entry.
    """
    problems = config.scenario_problems()
    if problems:
        from .errors import ConfigError

        raise ConfigError(problems)

    params = config.params
    h = config.harness
    scenario = make_scenario(config)
    disturbance = config.disturbance

    physics_rate = h.physics_rate_hz
    dt = 1.0 / physics_rate
    n_steps = int(round(scenario.duration_s * physics_rate))
    ctrl_every = physics_rate // int(round(config.rates.rate_rate))
    imu_every = physics_rate // h.imu_rate_hz
    pose_every = physics_rate // h.pose_rate_hz
    log_every = physics_rate // h.logging_rate_hz
    n_rows = int(round(scenario.duration_s * h.logging_rate_hz))

    state = initial_state(config, scenario)
    controller = CascadeController(params, config.gains, config.rates)
    rng = np.random.default_rng(disturbance.seed)

    complementary = h.estimator == "complementary"
    if complementary:
        estimator = ComplementaryEstimator(
            state.estimate_view(),
            pose_rate=float(h.pose_rate_hz),
            cutoff_hz=h.imu_cutoff_hz,
        )
        imu_dt = 1.0 / h.imu_rate_hz
        estimate = estimator.estimate()
    else:
        estimate = state.estimate_view()

    log = ScenarioLog(n_rows)
    command = controller.command
    setpoint = reference(0.0, scenario)
    static_reference = scenario.kind == "hover"   # setpoint is time-invariant

    for k in range(n_steps):
        t = k * dt

        if complementary and k % imu_every == 0:
            R_wb = quat_to_matrix(state.q).T
            wrench = total_wrench(state.act, R_wb, params) + Wrench(
                R_wb @ disturbance.force_offset_world,
                disturbance.torque_offset_body.copy(),
            )
            sample = sense(
                state, wrench, params, disturbance, rng,
                t=t, with_pose=(k % pose_every == 0),
            )
            estimator.update(sample, imu_dt)
            estimate = estimator.estimate()

        if k % ctrl_every == 0:
            if not complementary:
                estimate = state.estimate_view()
            if not static_reference:
                setpoint = reference(t, scenario)
            command = controller.update(t, estimate, setpoint)

        if k % log_every == 0 and len(log) < n_rows:
            log.append([
                t,
                *setpoint.p_des, *setpoint.v_des, setpoint.psi_des,
                *state.p, *state.v, *state.q, *state.omega,
                *estimate.p, *estimate.v, *estimate.q, *estimate.omega,
                *controller.f_des, *controller.omega_des, *controller.m_des,
                command.omega_left, command.omega_right,
                command.delta_left, command.delta_right,
                state.act.omega_left, state.act.omega_right,
                state.act.delta_left, state.act.delta_right,
                float(controller.saturated), float(controller.roll_clamped),
            ])

        try:
            state = step(state, command, dt, params, disturbance)
        except SimulationDivergedError as exc:
            raise SimulationDivergedError(f"{exc} at t = {t + dt:.6f} s") from None

    return log, metrics(log, h.transient_window_s)
