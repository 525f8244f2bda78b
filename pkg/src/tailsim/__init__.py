"""Deterministic 6-DOF simulator and flight controller for a dual-rotor tail-sitter MAV."""

from .config import Config, HarnessSettings, load_config, validate_file
from .control import (
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
from .errors import (
    ConfigError,
    DegenerateThrustError,
    DomainError,
    InfeasibleRollError,
    InsufficientExcitationError,
    MetricsWindowError,
    SimulationDivergedError,
    TailsimError,
)
from .model import (
    ActuatorState,
    VehicleParams,
    Wrench,
    aero_wrench,
    prop_wrench,
    total_wrench,
)
from .scenarios import (
    Metrics,
    Scenario,
    ScenarioLog,
    make_scenario,
    metrics,
    reference,
    run_scenario,
)
from .sim import (
    ComplementaryEstimator,
    DisturbanceSpec,
    LowPass,
    PerfectEstimator,
    SensorSample,
    VehicleState,
    actuator_step,
    derivative,
    sense,
    step,
)
from .sysid import (
    FitResult,
    StaticTestRecord,
    fit_params,
    generate_synthetic,
    read_records_csv,
    write_fit_params,
    write_records_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ActuatorCommand",
    "ActuatorState",
    "CascadeController",
    "ComplementaryEstimator",
    "Config",
    "ConfigError",
    "ControllerGains",
    "DegenerateThrustError",
    "DisturbanceSpec",
    "DomainError",
    "FitResult",
    "HarnessSettings",
    "InfeasibleRollError",
    "InsufficientExcitationError",
    "LoopRates",
    "LowPass",
    "Metrics",
    "MetricsWindowError",
    "PerfectEstimator",
    "Scenario",
    "ScenarioLog",
    "SensorSample",
    "Setpoint",
    "SimulationDivergedError",
    "StateEstimate",
    "StaticTestRecord",
    "TailsimError",
    "VehicleParams",
    "VehicleState",
    "Wrench",
    "aero_wrench",
    "attitude_control",
    "attitude_setpoint",
    "clamp_command",
    "derivative",
    "fit_params",
    "generate_synthetic",
    "load_config",
    "make_scenario",
    "metrics",
    "model_inverse",
    "position_control",
    "prop_wrench",
    "rate_control",
    "read_records_csv",
    "reference",
    "run_scenario",
    "sense",
    "actuator_step",
    "step",
    "total_wrench",
    "validate_file",
    "write_fit_params",
    "write_records_csv",
    "__version__",
]
