"""Static-bench system identification of the force/moment coefficients.

A bench record holds one steady operating point of a single
propeller/elevon unit (left-side reaction-torque convention): rotor
speed, elevon deflection, and the measured force/torque vector.  The
five model coefficients enter the measurements linearly through known
regressors, so each measurement channel is fit by least squares through
the origin:

==========  =========================  ==================
channel     basis                      coefficients
==========  =========================  ==================
``fz``      ``omega^2, omega^2 d^2``   ``-k_t, +k_d``
``fx``      ``omega^2 d``              ``-k_l``
``my``      ``omega^2 d``              ``-k_p``
``mz``      ``omega^2``                ``+k_m``
==========  =========================  ==================

Noiseless synthetic data is recovered exactly (the thrust/drag channel
is a joint two-column fit, so drag never biases thrust).  The normal
equations are solved by singular value decomposition via
``numpy.linalg.lstsq``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientExcitationError
from .model import VehicleParams, aero_wrench, prop_wrench

ALL_CONSTANTS = ("k_t", "k_m", "k_l", "k_d", "k_p")

CSV_HEADER = "omega_rad_s, delta_rad, fx, fy, fz, mx, my, mz"

# measurement channel supplying each coefficient's residual diagnostics
_CHANNEL_OF = {"k_t": "fz", "k_d": "fz", "k_l": "fx", "k_p": "my", "k_m": "mz"}


@dataclass
class StaticTestRecord:
    """One steady bench measurement of a single propeller/elevon unit."""

    omega: float                      # rotor speed, rad/s
    delta: float                      # elevon deflection, rad
    force: np.ndarray                 # measured force, body axes, N
    torque: np.ndarray                # measured torque, body axes, N m

    def __post_init__(self) -> None:
        self.force = np.asarray(self.force, dtype=float)
        self.torque = np.asarray(self.torque, dtype=float)
        if self.force.shape != (3,) or self.torque.shape != (3,):
            raise DomainError("record force/torque must be 3-vectors")
        values = (self.omega, self.delta, *self.force, *self.torque)
        if not all(math.isfinite(v) for v in values):
            raise DomainError("record values must be finite")
        if self.omega < 0.0:
            raise DomainError(f"rotor speed must be >= 0, got {self.omega!r}")


@dataclass
class FitResult:
    """Identified coefficients with per-coefficient diagnostics.

    ``residual_rms`` is the RMS residual of the measurement channel a
    coefficient was fit on; ``std_error`` the usual least-squares
    standard error (zero for a perfect fit).  ``intercepts`` is only
    populated when the fit was run in intercept mode.
    """

    values: dict[str, float]
    residual_rms: dict[str, float]
    std_error: dict[str, float]
    n_records: int
    intercepts: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in self.values.items():
            if not math.isfinite(value):
                raise DomainError(f"fitted constant {name} must be finite, got {value!r}")


def _lstsq_channel(X: np.ndarray, y: np.ndarray, names: tuple[str, ...], intercept: bool):
    """Least squares on one channel; returns (coefs, rms, std_errs, intercept)."""
    n = X.shape[0]
    if intercept:
        X = np.hstack([X, np.ones((n, 1))])
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        raise InsufficientExcitationError(names)
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    residual = y - X @ coef
    rms = float(np.sqrt(np.mean(residual**2)))
    dof = n - X.shape[1]
    if dof > 0:
        sigma2 = float(residual @ residual) / dof
        cov = sigma2 * np.linalg.inv(X.T @ X)
        std = np.sqrt(np.diag(cov))
    else:
        std = np.zeros(X.shape[1])
    icept = float(coef[-1]) if intercept else 0.0
    k = len(names)
    return coef[:k], rms, std[:k], icept


def fit_params(
    records: list[StaticTestRecord],
    constants: tuple[str, ...] = ALL_CONSTANTS,
    intercept: bool = False,
) -> FitResult:
    """Identify model coefficients from bench records by least squares.

    Args:
        records: at least two bench measurements.
        constants: subset of ``("k_t", "k_m", "k_l", "k_d", "k_p")`` to
            identify; channels not needed for the subset are ignored.
        intercept: additionally estimate a constant bias per channel
            (diagnostic; the physical model has none).

    Returns:
        FitResult covering exactly ``constants``.

    Raises:
        DomainError: on an empty/underspecified dataset or unknown names.
        InsufficientExcitationError: if a requested coefficient's
            regressor carries no information (e.g. every record has
            ``delta == 0`` so ``k_l``, ``k_d``, ``k_p`` are invisible).
    """
    unknown = [c for c in constants if c not in ALL_CONSTANTS]
    if unknown:
        raise DomainError(f"unknown constants requested: {unknown}")
    if len(records) < 2:
        raise DomainError("need at least two records to fit")

    omega = np.array([r.omega for r in records])
    delta = np.array([r.delta for r in records])
    w2 = omega**2
    w2d = w2 * delta
    w2d2 = w2 * delta**2

    values: dict[str, float] = {}
    rms: dict[str, float] = {}
    std: dict[str, float] = {}
    icepts: dict[str, float] = {}
    bad: list[str] = []

    def channel(names, X, y, signs):
        try:
            coef, r, s, b = _lstsq_channel(X, y, names, intercept)
        except InsufficientExcitationError:
            bad.extend(names)
            return
        for name, c, sd, sign in zip(names, coef, s, signs):
            values[name] = sign * float(c)
            rms[name] = r
            std[name] = float(sd)
        icepts[_CHANNEL_OF[names[0]]] = b

    want = set(constants)
    if {"k_t", "k_d"} & want:
        fz = np.array([r.force[2] for r in records])
        if "k_d" in want:
            channel(("k_t", "k_d"), np.column_stack([w2, w2d2]), fz, (-1.0, 1.0))
        else:
            channel(("k_t",), w2.reshape(-1, 1), fz, (-1.0,))
    if "k_l" in want:
        fx = np.array([r.force[0] for r in records])
        channel(("k_l",), w2d.reshape(-1, 1), fx, (-1.0,))
    if "k_p" in want:
        my = np.array([r.torque[1] for r in records])
        channel(("k_p",), w2d.reshape(-1, 1), my, (-1.0,))
    if "k_m" in want:
        mz = np.array([r.torque[2] for r in records])
        channel(("k_m",), w2.reshape(-1, 1), mz, (1.0,))

    bad = [c for c in bad if c in want]
    if bad:
        raise InsufficientExcitationError(tuple(sorted(bad)))

    return FitResult(
        values={c: values[c] for c in constants},
        residual_rms={c: rms[c] for c in constants},
        std_error={c: std[c] for c in constants},
        n_records=len(records),
        intercepts=icepts if intercept else {},
    )


def generate_synthetic(
    params: VehicleParams,
    omega_values: np.ndarray,
    delta_values: np.ndarray,
    relative_noise: float = 0.0,
    seed: int = 0,
) -> list[StaticTestRecord]:
    """Bench records for every (omega, delta) grid combination.

    Wrenches come from the single-side force/moment model (left-side
    reaction-torque sign).  ``relative_noise`` applies multiplicative
    Gaussian perturbations ``x * (1 + sigma * n)`` to every measured
    component, seeded for reproducibility.
    """
    if relative_noise < 0.0:
        raise DomainError("relative_noise must be >= 0")
    rng = np.random.default_rng(seed)
    records = []
    for w in np.asarray(omega_values, dtype=float):
        for d in np.asarray(delta_values, dtype=float):
            wrench = prop_wrench(w, "left", params) + aero_wrench(w, d, params)
            force, torque = wrench.force, wrench.torque
            if relative_noise > 0.0:
                force = force * (1.0 + relative_noise * rng.standard_normal(3))
                torque = torque * (1.0 + relative_noise * rng.standard_normal(3))
            records.append(StaticTestRecord(float(w), float(d), force, torque))
    return records


def write_records_csv(path, records: list[StaticTestRecord]) -> None:
    """Write bench records with the canonical header."""
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            row = (r.omega, r.delta, *r.force, *r.torque)
            fh.write(", ".join(f"{v:.17g}" for v in row) + "\n")


def read_records_csv(path) -> list[StaticTestRecord]:
    """Read bench records; the header must match the canonical schema."""
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip()
        if [c.strip() for c in header.split(",")] != [
            c.strip() for c in CSV_HEADER.split(",")
        ]:
            raise DomainError(
                f"unexpected CSV header {header!r}; expected {CSV_HEADER!r}"
            )
        records = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise DomainError(f"line {line_no}: expected 8 columns, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise DomainError(f"line {line_no}: {exc}") from exc
            records.append(
                StaticTestRecord(vals[0], vals[1], np.array(vals[2:5]), np.array(vals[5:8]))
            )
    return records


def write_fit_params(path, fit: FitResult) -> None:
    """Write fitted coefficients as a flat key-value parameter file.

    The output is loadable as configuration overrides; diagnostics ride
    along as comments.
    """
    lines = ["# fitted model coefficients", f"# records: {fit.n_records}"]
    for name in fit.values:
        lines.append(f"{name} = {fit.values[name]:.17g}")
        lines.append(
            f"#   residual_rms = {fit.residual_rms[name]:.6g}, "
            f"std_error = {fit.std_error[name]:.6g}"
        )
    for channel, bias in fit.intercepts.items():
        lines.append(f"# intercept[{channel}] = {bias:.6g}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
