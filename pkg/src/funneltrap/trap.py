"""Physical model of the funnel trap.

A single particle sits in a trap whose radial confinement stiffens linearly
along the trap axis, omega_x(z) = omega_x (1 + z / funnel_length).  Pulling the
radial mode to large amplitude therefore pushes the axial equilibrium toward
the open end of the funnel, and the axial position in turn detunes the radial
mode.  This module holds the parameter containers, the closed-form quantities
derived from them (cubic nonlinearity coefficient, reduced drive, axial
zero-point scale, equilibrium displacement, detuning modulation), the unit
conversions used at the I/O boundary, and the flat key-value parameter file.

Internally everything is SI with angular frequencies in rad/s.  The parameter
file speaks Hz, zeptonewtons and atomic mass units; conversion happens at load.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy import constants

ATOMIC_MASS = constants.atomic_mass   # kg
HBAR = constants.hbar

# Endcap voltage calibration: a 500 uV drive amplitude exerts 1.2 zN on the
# particle (2.4 zN peak-to-peak per mV peak-to-peak).  Assumed linear.
FORCE_PER_VOLT = 2.4e-18              # N/V

# The radial drive comes from the cooling laser and saturates near 30 zN;
# configurations beyond the cap are rejected.
RADIAL_FORCE_CAP = 30e-21             # N

ZEPTONEWTON = 1e-21


class ParameterError(ValueError):
    """A physical parameter or argument is outside its allowed domain."""


class ConfigError(ParameterError):
    """A parameter file is missing, malformed, or contains bad keys."""


@dataclass(frozen=True)
class TrapParams:
    """Static properties of trap plus particle.

    mass           particle mass, kg
    omega_x/y      radial secular frequencies at z = 0, rad/s
    omega_z        axial secular frequency, rad/s
    funnel_length  length scale of the radial-frequency gradient, m
                   (math.inf gives a straight trap with no coupling)
    damping        velocity damping rate applied to both modes, rad/s
    """

    mass: float
    omega_x: float
    omega_y: float
    omega_z: float
    funnel_length: float
    damping: float

    def __post_init__(self):
        for name in ("mass", "omega_x", "omega_y", "omega_z",
                     "funnel_length", "damping"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ParameterError(f"TrapParams.{name} must be > 0, got {v!r}")
        if not self.omega_z < self.omega_x:
            raise ParameterError(
                "slow axial mode required: omega_z < omega_x "
                f"(got {self.omega_z:g} >= {self.omega_x:g})")
        if not self.damping < self.omega_z:
            raise ParameterError(
                "axial mode must be underdamped: damping < omega_z "
                f"(got {self.damping:g} >= {self.omega_z:g})")


@dataclass(frozen=True)
class DriveConfig:
    """The three force channels acting on the particle.

    The radial channel F0 cos(omega_0 t + phase_0) drives the x mode near its
    resonance; detuning = omega_0 - omega_x.  The two axial channels, a slow
    signal (fs, omega_s) and an intermediate enhancement tone (fe, omega_e),
    add directly along z.  Amplitudes in newtons, frequencies in rad/s.
    """

    f0_force: float = 0.0
    omega_0: float = 0.0
    fs_force: float = 0.0
    omega_s: float = 0.0
    fe_force: float = 0.0
    omega_e: float = 0.0
    phase_0: float = 0.0

    def __post_init__(self):
        for name in ("f0_force", "fs_force", "fe_force"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"DriveConfig.{name} must be >= 0")
        if self.f0_force > RADIAL_FORCE_CAP * (1.0 + 1e-12):
            raise ParameterError(
                f"radial drive {self.f0_force:g} N exceeds the "
                f"{RADIAL_FORCE_CAP:g} N saturation cap")
        if min(self.f0_force, self.fs_force, self.fe_force) > 0.0:
            # all three channels active: timescale ordering is required
            if not (self.omega_s < self.omega_e < self.omega_0):
                raise ParameterError(
                    "active channels must satisfy omega_s < omega_e < omega_0")

    def detuning(self, p: TrapParams) -> float:
        """Radial drive detuning omega_0 - omega_x, rad/s."""
        return self.omega_0 - p.omega_x


@dataclass(frozen=True)
class DerivedParams:
    """Closed-form quantities derived from trap and drive parameters.

    xi          cubic (Duffing) coefficient from the radial-axial coupling,
                rad/s per m^2 of squared envelope amplitude
    f0_reduced  drive amplitude of the envelope equation, m/s
    zpf_axial   axial zero-point length, m (reference scale only)
    """

    xi: float
    f0_reduced: float
    zpf_axial: float


def derive_params(p: TrapParams, d: DriveConfig) -> DerivedParams:
    """Evaluate the derived constants for a trap/drive combination.

    xi = 2 omega_x^3 / (omega_z^2 funnel_length^2), the coefficient of the
    amplitude-dependent frequency shift; f0 = F0 / (4 m omega_x), the reduced
    radial drive; zpf = sqrt(hbar / (2 m omega_z)).
    """
    xi = 2.0 * p.omega_x**3 / (p.omega_z**2 * p.funnel_length**2)
    f0 = d.f0_force / (4.0 * p.mass * p.omega_x)
    zpf = math.sqrt(HBAR / (2.0 * p.mass * p.omega_z))
    return DerivedParams(xi=xi, f0_reduced=f0, zpf_axial=zpf)


def reduced_drive(p: TrapParams, force: float) -> float:
    """Map a radial force amplitude (N) to the envelope drive f0 (m/s)."""
    return force / (4.0 * p.mass * p.omega_x)


def local_radial_frequency(p: TrapParams, z: float, axis: str = "x") -> float:
    """Radial secular frequency at axial position z, rad/s.

    The linearized funnel geometry gives omega_axis (1 + z/funnel_length).
    Valid for |z| well below the funnel length; a warning is emitted beyond
    |z/funnel_length| = 0.5 but the linear form is still returned.
    """
    if axis == "x":
        w = p.omega_x
    elif axis == "y":
        w = p.omega_y
    else:
        raise ParameterError(f"axis must be 'x' or 'y', got {axis!r}")
    rel = z / p.funnel_length
    if abs(rel) >= 0.5:
        warnings.warn(
            f"|z/funnel_length| = {abs(rel):.2f} is outside the linear "
            "regime of the frequency gradient", stacklevel=2)
    return w * (1.0 + rel)


def axial_force(d: DriveConfig, t):
    """Instantaneous axial force fe cos(omega_e t) + fs cos(omega_s t), N.

    Accepts a scalar time or an ndarray of times.
    """
    return (d.fe_force * np.cos(d.omega_e * t)
            + d.fs_force * np.cos(d.omega_s * t))


def detuning_per_force(p: TrapParams) -> float:
    """Detuning modulation per unit axial force, rad/s per N.

    An axial force displaces the equilibrium by F/(m omega_z^2), which shifts
    the local radial frequency by omega_x/funnel_length times that.
    """
    return p.omega_x / (p.mass * p.funnel_length * p.omega_z**2)


def detuning_modulation(p: TrapParams, d: DriveConfig, t):
    """Instantaneous radial detuning shift caused by the axial channels, rad/s."""
    return detuning_per_force(p) * axial_force(d, t)


def equilibrium_displacement(p: TrapParams, alpha_sq, fz=0.0):
    """Quasi-static axial equilibrium position, m.

    Parameters
    ----------
    alpha_sq : squared radial envelope amplitude |alpha|^2, m^2 (scalar or array)
    fz : instantaneous axial force, N

    Returns
    -------
    z0 = -2 (omega_x/omega_z)^2 alpha_sq / funnel_length + fz / (m omega_z^2).
    The radial contribution is negative, toward the funnel's open end.
    """
    if np.any(np.asarray(alpha_sq) < 0.0):
        raise ParameterError("alpha_sq must be >= 0")
    ratio = (p.omega_x / p.omega_z)**2
    return -2.0 * ratio * alpha_sq / p.funnel_length + fz / (p.mass * p.omega_z**2)


def volt_to_force(v: float) -> float:
    """Convert an endcap voltage amplitude (V) to axial force amplitude (N)."""
    if v < 0.0:
        raise ParameterError("voltage amplitude must be >= 0")
    return FORCE_PER_VOLT * v


# ---------------------------------------------------------------------------
# parameter file

# Required flat keys.  Frequencies are plain Hz in the file and become rad/s
# at load; detuning_hz is the radial drive detuning (omega_0 - omega_x)/2pi.
REQUIRED_KEYS = (
    "mass_u", "omega_x_hz", "omega_z_hz", "funnel_length_m", "gamma_hz",
    "f0_zn", "detuning_hz", "fs_zn", "fs_hz", "fe_zn", "fe_hz", "seed",
)

# Accepted optional keys with their defaults.
OPTIONAL_KEYS = {
    "omega_y_hz": 1.15e6,
    "frame_rate_hz": 8.0,
    "exposure_s": 0.1,
    "photons_per_frame": 240.0,
    "psf_sigma_um": 1.64,
    "duration_s": 120.0,
}


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved parameter file: trap, drive, seed, camera overrides."""

    trap: TrapParams
    drive: DriveConfig
    seed: int
    camera: dict = field(default_factory=dict)   # CameraConfig keyword overrides
    duration: float = 120.0
    raw: dict = field(default_factory=dict)      # flat key-value snapshot


def default_config() -> dict:
    """Flat key-value defaults.

    All values are the headline operating point: Ca-40 mass, the measured
    trap frequencies and funnel length, 250 Hz damping, the 30 zN radial
    drive at the center of its bistable window, 1.2 zN signal at 0.5 Hz, and
    the tuned 50 Hz enhancement tone.  detuning_hz and fe_zn were computed
    with this package's own solvers for the other defaults.
    """
    return {
        "mass_u": 40.0,
        "omega_x_hz": 1.14e6,
        "omega_y_hz": 1.15e6,
        "omega_z_hz": 100e3,
        "funnel_length_m": 1.81e-3,
        "gamma_hz": 250.0,
        "f0_zn": 30.0,
        "detuning_hz": -18998.0,
        "fs_zn": 1.2,
        "fs_hz": 0.5,
        "fe_zn": 726.0,
        "fe_hz": 50.0,
        "seed": 12345,
    }


def config_from_dict(raw: dict) -> RunConfig:
    """Validate a flat mapping and build the parameter containers."""
    if not isinstance(raw, dict):
        raise ConfigError("parameter file must be a flat key-value mapping")
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required config key '{key}'")
    unknown = set(raw) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key '{sorted(unknown)[0]}'")
    vals = dict(raw)
    for key, default in OPTIONAL_KEYS.items():
        vals.setdefault(key, default)
    for key, v in vals.items():
        if isinstance(v, str):
            # YAML 1.1 reads exponents without a sign ("1.14e6") as strings
            try:
                vals[key] = v = float(v)
            except ValueError:
                pass
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"config key '{key}' must be numeric, got {v!r}")

    two_pi = 2.0 * math.pi
    trap = TrapParams(
        mass=vals["mass_u"] * ATOMIC_MASS,
        omega_x=two_pi * vals["omega_x_hz"],
        omega_y=two_pi * vals["omega_y_hz"],
        omega_z=two_pi * vals["omega_z_hz"],
        funnel_length=vals["funnel_length_m"],
        damping=two_pi * vals["gamma_hz"],
    )
    drive = DriveConfig(
        f0_force=vals["f0_zn"] * ZEPTONEWTON,
        omega_0=trap.omega_x + two_pi * vals["detuning_hz"],
        fs_force=vals["fs_zn"] * ZEPTONEWTON,
        omega_s=two_pi * vals["fs_hz"],
        fe_force=vals["fe_zn"] * ZEPTONEWTON,
        omega_e=two_pi * vals["fe_hz"],
    )
    seed = vals["seed"]
    if seed != int(seed) or seed < 0:
        raise ConfigError("config key 'seed' must be a non-negative integer")
    camera = {
        "frame_rate": vals["frame_rate_hz"],
        "exposure": vals["exposure_s"],
        "photons_per_frame": vals["photons_per_frame"],
        "psf_sigma": vals["psf_sigma_um"] * 1e-6,
    }
    snapshot = {k: vals[k] for k in sorted(vals)}
    return RunConfig(trap=trap, drive=drive, seed=int(seed), camera=camera,
                     duration=vals["duration_s"], raw=snapshot)


def load_config(path) -> RunConfig:
    """Load a flat YAML parameter file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    return config_from_dict(raw if raw is not None else {})


def save_config(raw: dict, path):
    """Write a flat key-value mapping as YAML, keys sorted, full precision."""
    with open(path, "w") as fh:
        yaml.safe_dump(dict(raw), fh, sort_keys=True, default_flow_style=False)
