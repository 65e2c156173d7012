"""Time-domain integration of the trap dynamics.

Two levels of description share one fixed-step fourth-order integrator.  The
full model resolves the radial oscillation itself,

    m x'' = -m omega_x^2 (1 + 2 z / l0) x + Fx(t) - m gamma x'
    m z'' = -m Omega^2 z - m omega_x^2 x^2 / l0 + Fz(t) - m gamma z'

which at MHz rates is affordable only over short validation windows.  The
envelope model follows the complex amplitude alpha of the radial motion at
the drive frequency,

    alpha' = i (Delta - omega_x z / l0) alpha + i f0 e^{-i phase_0} - (gamma/2) alpha
    z''    = -Omega^2 z - (2 omega_x^2 / l0) |alpha|^2 + Fz(t)/m - gamma z'

and runs for seconds of simulated time.  envelope_accuracy_check runs both
from the same initial condition and reports how far they drift apart.

Integration happens in scaled units (time in 1/Omega, length in micrometres)
so state components stay near unity; conversion to SI is done at the call
boundary.  The inner loops are compiled; the first call in a fresh process
pays the compilation cost once.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .serialize import write_csv
from .trap import DriveConfig, ParameterError, TrapParams, reduced_drive

LENGTH_UNIT = 1e-6   # m, internal length scale


class DivergenceError(RuntimeError):
    """The integrated state left its validity domain (non-finite, or the
    axial excursion reached half the funnel length where the radial
    confinement inverts).  t_last is the last simulated time with a valid
    state."""

    def __init__(self, message, t_last):
        super().__init__(f"{message} (last valid state at t = {t_last:.6g} s)")
        self.t_last = t_last


@dataclass(frozen=True)
class FullState:
    """Phase-space point of the full two-mode model (SI, momenta in kg m/s)."""

    x: float
    px: float
    z: float
    pz: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "px", "z", "pz", "t"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"FullState.{name} must be finite")

    @classmethod
    def at_rest(cls, t=0.0):
        return cls(0.0, 0.0, 0.0, 0.0, t)


@dataclass(frozen=True)
class EnvelopeState:
    """State of the envelope model: complex radial amplitude plus axial
    position and velocity (SI)."""

    alpha_re: float
    alpha_im: float
    z: float
    vz: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("alpha_re", "alpha_im", "z", "vz", "t"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"EnvelopeState.{name} must be finite")

    @property
    def alpha(self) -> complex:
        return complex(self.alpha_re, self.alpha_im)

    @property
    def alpha_abs(self) -> float:
        return math.hypot(self.alpha_re, self.alpha_im)

    @classmethod
    def at_rest(cls, t=0.0):
        return cls(0.0, 0.0, 0.0, 0.0, t)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled integration record.

    The time grid is strictly increasing.  Full-model records carry x/vx,
    envelope records carry the complex alpha; z/vz are present in both.
    meta holds the integrator settings and whatever the producer adds.
    """

    t: np.ndarray
    z: np.ndarray
    vz: np.ndarray
    model: str
    x: np.ndarray = None
    vx: np.ndarray = None
    alpha: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) < 1:
            raise ParameterError("empty trajectory")
        if np.any(np.diff(self.t) <= 0.0):
            raise ParameterError("trajectory time grid must be strictly increasing")

    @property
    def radial_abs(self) -> np.ndarray:
        """|x| for the full model, |alpha| for the envelope model."""
        return np.abs(self.x if self.model == "full" else self.alpha)

    def final_state(self):
        i = -1
        if self.model == "full":
            m = self.meta["mass_kg"]
            return FullState(x=float(self.x[i]), px=float(m * self.vx[i]),
                             z=float(self.z[i]), pz=float(m * self.vz[i]),
                             t=float(self.t[i]))
        return EnvelopeState(alpha_re=float(self.alpha[i].real),
                             alpha_im=float(self.alpha[i].imag),
                             z=float(self.z[i]), vz=float(self.vz[i]),
                             t=float(self.t[i]))

    def write_csv(self, path, metadata=None):
        if self.model == "full":
            cols = ("t_s", "x_um", "z_um")
            radial = self.x * 1e6
        else:
            cols = ("t_s", "alpha_abs_um", "z_um")
            radial = np.abs(self.alpha) * 1e6
        meta = {"model": self.model}
        meta.update(self.meta)
        if metadata:
            meta.update(metadata)
        rows = ((self.t[i], radial[i], self.z[i] * 1e6)
                for i in range(len(self.t)))
        write_csv(path, cols, rows, metadata=meta)


# ---------------------------------------------------------------------------
# compiled kernels, scaled units: tau = Omega t, lengths in LENGTH_UNIT

@njit(cache=True)
def _run_full(x, vx, z, vz, n_steps, stride, h, t0, wx2, inv_l, gam,
              fx, w0, ph0, fs, ws, fe, we, zmax, out):
    out[0, 0] = x
    out[0, 1] = vx
    out[0, 2] = z
    out[0, 3] = vz
    rec = 0
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * h
        th = t + 0.5 * h
        t1 = t + h

        ax1 = -wx2 * (1.0 + 2.0 * z * inv_l) * x \
            + fx * math.cos(w0 * t + ph0) - gam * vx
        az1 = -z - wx2 * inv_l * x * x \
            + fs * math.cos(ws * t) + fe * math.cos(we * t) - gam * vz

        x2 = x + 0.5 * h * vx
        vx2 = vx + 0.5 * h * ax1
        z2 = z + 0.5 * h * vz
        vz2 = vz + 0.5 * h * az1
        ax2 = -wx2 * (1.0 + 2.0 * z2 * inv_l) * x2 \
            + fx * math.cos(w0 * th + ph0) - gam * vx2
        az2 = -z2 - wx2 * inv_l * x2 * x2 \
            + fs * math.cos(ws * th) + fe * math.cos(we * th) - gam * vz2

        x3 = x + 0.5 * h * vx2
        vx3 = vx + 0.5 * h * ax2
        z3 = z + 0.5 * h * vz2
        vz3 = vz + 0.5 * h * az2
        ax3 = -wx2 * (1.0 + 2.0 * z3 * inv_l) * x3 \
            + fx * math.cos(w0 * th + ph0) - gam * vx3
        az3 = -z3 - wx2 * inv_l * x3 * x3 \
            + fs * math.cos(ws * th) + fe * math.cos(we * th) - gam * vz3

        x4 = x + h * vx3
        vx4 = vx + h * ax3
        z4 = z + h * vz3
        vz4 = vz + h * az3
        ax4 = -wx2 * (1.0 + 2.0 * z4 * inv_l) * x4 \
            + fx * math.cos(w0 * t1 + ph0) - gam * vx4
        az4 = -z4 - wx2 * inv_l * x4 * x4 \
            + fs * math.cos(ws * t1) + fe * math.cos(we * t1) - gam * vz4

        sixth = h / 6.0
        x += sixth * (vx + 2.0 * (vx2 + vx3) + vx4)
        vx += sixth * (ax1 + 2.0 * (ax2 + ax3) + ax4)
        z += sixth * (vz + 2.0 * (vz2 + vz3) + vz4)
        vz += sixth * (az1 + 2.0 * (az2 + az3) + az4)

        if step % stride == 0:
            rec += 1
            out[rec, 0] = x
            out[rec, 1] = vx
            out[rec, 2] = z
            out[rec, 3] = vz
            ok = (math.isfinite(x) and math.isfinite(vx)
                  and math.isfinite(z) and math.isfinite(vz))
            if not ok or abs(z) > zmax:
                return rec
    return -1


@njit(cache=True)
def _run_env(ar, ai, z, vz, n_steps, stride, h, t0, delta, wxl, c2, gam,
             ghalf, dr, di, fs, ws, fe, we, cap_sq, out):
    out[0, 0] = ar
    out[0, 1] = ai
    out[0, 2] = z
    out[0, 3] = vz
    rec = 0
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * h
        th = t + 0.5 * h
        t1 = t + h

        w = delta - wxl * z
        dar1 = -w * ai - ghalf * ar + dr
        dai1 = w * ar - ghalf * ai + di
        dvz1 = -z - c2 * (ar * ar + ai * ai) \
            + fs * math.cos(ws * t) + fe * math.cos(we * t) - gam * vz

        ar2 = ar + 0.5 * h * dar1
        ai2 = ai + 0.5 * h * dai1
        z2 = z + 0.5 * h * vz
        vz2 = vz + 0.5 * h * dvz1
        w = delta - wxl * z2
        dar2 = -w * ai2 - ghalf * ar2 + dr
        dai2 = w * ar2 - ghalf * ai2 + di
        dvz2 = -z2 - c2 * (ar2 * ar2 + ai2 * ai2) \
            + fs * math.cos(ws * th) + fe * math.cos(we * th) - gam * vz2

        ar3 = ar + 0.5 * h * dar2
        ai3 = ai + 0.5 * h * dai2
        z3 = z + 0.5 * h * vz2
        vz3 = vz + 0.5 * h * dvz2
        w = delta - wxl * z3
        dar3 = -w * ai3 - ghalf * ar3 + dr
        dai3 = w * ar3 - ghalf * ai3 + di
        dvz3 = -z3 - c2 * (ar3 * ar3 + ai3 * ai3) \
            + fs * math.cos(ws * th) + fe * math.cos(we * th) - gam * vz3

        ar4 = ar + h * dar3
        ai4 = ai + h * dai3
        z4 = z + h * vz3
        vz4 = vz + h * dvz3
        w = delta - wxl * z4
        dar4 = -w * ai4 - ghalf * ar4 + dr
        dai4 = w * ar4 - ghalf * ai4 + di
        dvz4 = -z4 - c2 * (ar4 * ar4 + ai4 * ai4) \
            + fs * math.cos(ws * t1) + fe * math.cos(we * t1) - gam * vz4

        sixth = h / 6.0
        ar += sixth * (dar1 + 2.0 * (dar2 + dar3) + dar4)
        ai += sixth * (dai1 + 2.0 * (dai2 + dai3) + dai4)
        z += sixth * (vz + 2.0 * (vz2 + vz3) + vz4)
        vz += sixth * (dvz1 + 2.0 * (dvz2 + dvz3) + dvz4)

        if step % stride == 0:
            rec += 1
            out[rec, 0] = ar
            out[rec, 1] = ai
            out[rec, 2] = z
            out[rec, 3] = vz
            ok = (math.isfinite(ar) and math.isfinite(ai)
                  and math.isfinite(z) and math.isfinite(vz))
            if not ok or ar * ar + ai * ai > cap_sq:
                return rec
    return -1


# ---------------------------------------------------------------------------

FULL_T_END_CAP = 0.05   # s; the full model is for validation windows only


def _step_counts(t_end, dt, stride):
    n = int(math.ceil(t_end / dt - 1e-9))
    n = ((n + stride - 1) // stride) * stride
    return n, n // stride + 1


def integrate_full(s0: FullState, p: TrapParams, d: DriveConfig,
                   t_end, dt, stride=1) -> Trajectory:
    """Integrate the full two-mode equations of motion.

    Parameters
    ----------
    s0 : initial FullState (momenta, SI)
    t_end : simulated duration, s; capped at 50 ms
    dt : time step, s; must resolve the radial period (dt <= 2 pi/(200 omega_x))
    stride : output decimation, one record every `stride` steps

    Raises DivergenceError if the state leaves its validity domain; the
    exception carries the last valid time.
    """
    bound = 2.0 * math.pi / (200.0 * p.omega_x)
    if not 0.0 < dt <= bound * (1.0 + 1e-12):
        raise ParameterError(
            f"dt = {dt:g} s must lie in (0, {bound:g}] s to resolve the "
            "radial period")
    if not 0.0 < t_end <= FULL_T_END_CAP:
        raise ParameterError(
            f"t_end = {t_end:g} s outside (0, {FULL_T_END_CAP:g}] s; use the "
            "envelope model for longer windows")
    stride = int(stride)
    if stride < 1:
        raise ParameterError("stride must be >= 1")

    W = p.omega_z
    L = LENGTH_UNIT
    n_steps, n_rec = _step_counts(t_end, dt, stride)
    inv_l = 0.0 if math.isinf(p.funnel_length) else L / p.funnel_length
    zmax = 1e300 if inv_l == 0.0 else 0.5 / inv_l
    if abs(s0.z) / L > zmax:
        raise ParameterError("initial z is beyond half the funnel length")

    out = np.empty((n_rec, 4))
    bad = _run_full(
        s0.x / L, s0.px / (p.mass * W * L), s0.z / L, s0.pz / (p.mass * W * L),
        n_steps, stride, dt * W, s0.t * W,
        (p.omega_x / W)**2, inv_l, p.damping / W,
        d.f0_force / (p.mass * W * W * L), d.omega_0 / W, d.phase_0,
        d.fs_force / (p.mass * W * W * L), d.omega_s / W,
        d.fe_force / (p.mass * W * W * L), d.omega_e / W,
        zmax, out)
    if bad >= 0:
        t_last = s0.t + (bad - 1) * stride * dt
        raise DivergenceError("full model diverged", t_last)

    t = s0.t + dt * stride * np.arange(n_rec)
    meta = {"model": "full", "dt_s": dt, "stride": stride, "mass_kg": p.mass,
            "omega_0_rad_s": d.omega_0, "phase_0_rad": d.phase_0}
    return Trajectory(t=t, z=out[:, 2] * L, vz=out[:, 3] * W * L, model="full",
                      x=out[:, 0] * L, vx=out[:, 1] * W * L, meta=meta)


def integrate_envelope(s0: EnvelopeState, p: TrapParams, d: DriveConfig,
                       t_end, dt=None, stride=1) -> Trajectory:
    """Integrate the coupled envelope/axial system.

    dt defaults to 2 pi/(200 Omega) and may not exceed 2 pi/(50 Omega); the
    axial period is the fastest scale left after the reduction.  No cap on
    t_end: seconds of simulated time are the point of this model.
    """
    bound = 2.0 * math.pi / (50.0 * p.omega_z)
    if dt is None:
        dt = bound / 4.0
    if not 0.0 < dt <= bound * (1.0 + 1e-12):
        raise ParameterError(
            f"dt = {dt:g} s must lie in (0, {bound:g}] s to resolve the "
            "axial period")
    if t_end <= 0.0:
        raise ParameterError("t_end must be > 0")
    stride = int(stride)
    if stride < 1:
        raise ParameterError("stride must be >= 1")

    W = p.omega_z
    L = LENGTH_UNIT
    n_steps, n_rec = _step_counts(t_end, dt, stride)
    inv_l = 0.0 if math.isinf(p.funnel_length) else L / p.funnel_length
    gam = p.damping / W
    f0_s = reduced_drive(p, d.f0_force) / (W * L)
    # |alpha| can never exceed max(|alpha(0)|, 2 f0/gamma); treat a crossing
    # (with margin for discretization) as numerical divergence
    cap = max(2.0 * f0_s / gam, math.hypot(s0.alpha_re, s0.alpha_im) / L)
    cap_sq = (cap * (1.0 + 1e-6))**2 + 1e-30

    out = np.empty((n_rec, 4))
    bad = _run_env(
        s0.alpha_re / L, s0.alpha_im / L, s0.z / L, s0.vz / (W * L),
        n_steps, stride, dt * W, s0.t * W,
        d.detuning(p) / W, (p.omega_x / W) * inv_l,
        2.0 * (p.omega_x / W)**2 * inv_l, gam, 0.5 * gam,
        f0_s * math.sin(d.phase_0), f0_s * math.cos(d.phase_0),
        d.fs_force / (p.mass * W * W * L), d.omega_s / W,
        d.fe_force / (p.mass * W * W * L), d.omega_e / W,
        cap_sq, out)
    if bad >= 0:
        t_last = s0.t + (bad - 1) * stride * dt
        raise DivergenceError("envelope model diverged", t_last)

    t = s0.t + dt * stride * np.arange(n_rec)
    meta = {"model": "envelope", "dt_s": dt, "stride": stride,
            "mass_kg": p.mass, "omega_0_rad_s": d.omega_0,
            "phase_0_rad": d.phase_0}
    return Trajectory(t=t, z=out[:, 2] * L, vz=out[:, 3] * W * L,
                      model="envelope",
                      alpha=(out[:, 0] + 1j * out[:, 1]) * L, meta=meta)


def total_energy(p: TrapParams, x, vx, z, vz):
    """Mechanical energy of the full model (kinetic plus trap potential), J.

    Conserved when damping and drive are off; with a static drive the
    conserved quantity is this minus force times coordinate.
    """
    kin = 0.5 * p.mass * (np.asarray(vx)**2 + np.asarray(vz)**2)
    zz = np.asarray(z)
    pot = 0.5 * p.mass * (p.omega_x**2 * (1.0 + 2.0 * zz / p.funnel_length)
                          * np.asarray(x)**2 + p.omega_z**2 * zz**2)
    return kin + pot


# ---------------------------------------------------------------------------
# reduction accuracy

def demodulate(t, x, omega_0, phase_0=0.0):
    """Quadrature amplitude of x(t) at omega_0.

    Multiplies by cos/sin of the drive phase and averages over exactly one
    drive period (moving window), recovering |alpha| for a signal of the form
    x = alpha e^{-i omega_0 t} + c.c.  Returns (window-center times, |alpha|).
    Requires uniform sampling with at least 4 samples per drive period.
    """
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    if t.size < 8:
        raise ParameterError("record too short to demodulate")
    steps = np.diff(t)
    dt0 = steps[0]
    if not np.allclose(steps, dt0, rtol=1e-6, atol=0.0):
        raise ParameterError("demodulation requires uniform sampling")
    if omega_0 <= 0.0:
        raise ParameterError("omega_0 must be > 0")
    navg = max(1, int(round(2.0 * math.pi / omega_0 / dt0)))
    if navg < 4:
        raise ParameterError("fewer than 4 samples per drive period")
    if t.size < 2 * navg:
        raise ParameterError("record shorter than two drive periods")
    ph = omega_0 * t + phase_0
    kernel = np.full(navg, 1.0 / navg)
    iavg = np.convolve(x * np.cos(ph), kernel, mode="valid")
    qavg = np.convolve(x * np.sin(ph), kernel, mode="valid")
    t_mid = t[: iavg.size] + 0.5 * (navg - 1) * dt0
    return t_mid, np.hypot(iavg, qavg)


@dataclass(frozen=True)
class AccuracyReport:
    """Worst-case relative deviation between the two models on one window."""

    max_dev_alpha: float
    max_dev_z: float
    window: float
    dt_full: float
    dt_envelope: float


def envelope_accuracy_check(p: TrapParams, d: DriveConfig, window=0.01,
                            dt_full=None, dt_envelope=None) -> AccuracyReport:
    """Run both models from the origin at rest and compare.

    The full-model x(t) is demodulated at the drive frequency and held
    against the envelope |alpha(t)|; the two z(t) traces are compared
    directly.  Deviations are normalized by the envelope trace maxima; one
    drive period is trimmed at each end of the demodulated record where the
    moving average is edge-biased.
    """
    if not 0.0 < window <= FULL_T_END_CAP:
        raise ParameterError(f"window must lie in (0, {FULL_T_END_CAP:g}] s")
    if abs(d.detuning(p)) >= 0.5 * p.omega_z:
        raise ParameterError("detuning magnitude must stay well below the "
                             "axial frequency for the envelope reduction")
    if dt_full is None:
        dt_full = 2.0 * math.pi / (200.0 * p.omega_x)
    if dt_envelope is None:
        dt_envelope = 2.0 * math.pi / (200.0 * p.omega_z)

    # ~10 full-model samples per drive period is plenty for the quadrature,
    # and keeps the record small
    stride_f = max(1, int(round(2.0 * math.pi / (10.0 * p.omega_x) / dt_full)))
    traj_f = integrate_full(FullState.at_rest(), p, d, window, dt_full,
                            stride=stride_f)
    traj_e = integrate_envelope(EnvelopeState.at_rest(), p, d, window,
                                dt_envelope, stride=4)

    td, amp = demodulate(traj_f.t, traj_f.x, d.omega_0, d.phase_0)
    n_per = max(1, int(round(2.0 * math.pi / d.omega_0
                             / (traj_f.t[1] - traj_f.t[0]))))
    sl = slice(n_per, max(n_per + 1, td.size - n_per))
    alpha_env = np.interp(td, traj_e.t, np.abs(traj_e.alpha))
    scale_a = float(np.max(alpha_env[sl]))
    dev_a = float(np.max(np.abs(amp[sl] - alpha_env[sl]))) / scale_a \
        if scale_a > 0.0 else 0.0

    z_env = np.interp(traj_f.t, traj_e.t, traj_e.z)
    scale_z = float(np.max(np.abs(traj_e.z)))
    dev_z = float(np.max(np.abs(traj_f.z - z_env))) / scale_z \
        if scale_z > 0.0 else 0.0

    return AccuracyReport(max_dev_alpha=dev_a, max_dev_z=dev_z, window=window,
                          dt_full=dt_full, dt_envelope=dt_envelope)
