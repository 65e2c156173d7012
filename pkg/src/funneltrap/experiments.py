"""End-to-end experiment protocols.

Two protocols are orchestrated here.  The sweep experiment steps the radial
drive frequency across the response curve in both directions for a list of
drive strengths, recording amplitude, axial shift and hysteresis jumps.  The
weak-force amplification experiment runs the three-stage measurement: the
signal alone (a), signal plus radial drive (c), and signal plus radial drive
plus the enhancement tone tuned so the detuning excursion reaches the edges
of the bistable window (e), where the signal toggles the oscillator between
branches and its spectral peak grows by orders of magnitude.

Both protocols ride on the quasi-static branch tracker: every drive timescale
involved (0.5 Hz signal, 50 Hz tone) is far below the relaxation rate gamma,
and multi-minute records would be unaffordable otherwise.  The envelope
integrator is available in run_sweep as a cross-check of that reduction.
"""

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import EnvelopeState, Trajectory, integrate_envelope
from .measurement import (CameraConfig, EnhancementFactor, SampledTrace,
                          SpectrumRecord, amplitude_spectrum,
                          enhancement_factor, peak_amplitude, sample_camera)
from .serialize import write_summary
from .steady import (LOWER, UPPER, SweepRecord, _branch_side,
                     _real_roots_batch, bistable_region, critical_drive,
                     hysteresis_sweep, track_series)
from .trap import (DriveConfig, ParameterError, TrapParams, axial_force,
                   derive_params, detuning_per_force, equilibrium_displacement,
                   save_config)

QUASI_STATIC = "quasi-static"
ENVELOPE = "envelope"


# ---------------------------------------------------------------------------
# frequency sweeps

@dataclass(frozen=True)
class SweepExperimentConfig:
    """Settings of a stepped-detuning response measurement.

    drives lists reduced drive amplitudes f0 (m/s); each is swept separately.
    dwell is the wait per step and must be >= 10/gamma so the oscillator
    relaxes onto a steady branch before the next step (quasi-static
    validity); step must resolve the window boundaries (< gamma/4).
    """

    trap: TrapParams
    delta_min: float
    delta_max: float
    step: float
    dwell: float
    drives: tuple
    direction: str = "both"
    model: str = QUASI_STATIC

    def __post_init__(self):
        object.__setattr__(self, "drives",
                           tuple(float(f) for f in self.drives))
        if not self.delta_min < self.delta_max:
            raise ParameterError("delta_min must be < delta_max")
        if not 0.0 < self.step < self.trap.damping / 4.0:
            raise ParameterError("step must lie in (0, damping/4)")
        if not self.dwell >= 10.0 / self.trap.damping:
            raise ParameterError("dwell must be >= 10/damping for "
                                 "quasi-static validity")
        if not self.drives:
            raise ParameterError("drives must be non-empty")
        if any(f < 0.0 for f in self.drives):
            raise ParameterError("drives must be >= 0")
        if self.direction not in ("ascending", "descending", "both"):
            raise ParameterError("direction must be ascending, descending "
                                 "or both")
        if self.model not in (QUASI_STATIC, ENVELOPE):
            raise ParameterError(f"model must be '{QUASI_STATIC}' or "
                                 f"'{ENVELOPE}'")

    @property
    def directions(self) -> tuple:
        if self.direction == "both":
            return ("ascending", "descending")
        return (self.direction,)


@dataclass(frozen=True)
class SweepEntry:
    """One (drive, direction) trace plus its threshold-extracted jumps."""

    f0_reduced: float
    direction: str
    record: SweepRecord
    jump_detunings: np.ndarray


@dataclass(frozen=True)
class SweepResult:
    entries: tuple
    model: str
    f0_ref: float        # reduced drive of the smooth reference trace
    base_step: float     # largest continuous |du| on the reference trace

    def for_drive(self, f0_reduced, direction):
        for e in self.entries:
            if e.f0_reduced == f0_reduced and e.direction == direction:
                return e
        raise KeyError((f0_reduced, direction))


def _force_drive(p: TrapParams, f0_reduced, delta) -> DriveConfig:
    return DriveConfig(f0_force=f0_reduced * 4.0 * p.mass * p.omega_x,
                       omega_0=p.omega_x + delta)


def _envelope_branch_trace(p, f0_reduced, detunings, dwell):
    # stepped dwell integrations; the final state of each dwell seeds the
    # next one, so the occupied branch is continued physically
    dt = 2.0 * math.pi / (50.0 * p.omega_z)
    n_steps = int(math.ceil(dwell / dt - 1e-9))
    state = EnvelopeState.at_rest()
    u = np.empty(detunings.size)
    for i, delta in enumerate(detunings):
        d = _force_drive(p, f0_reduced, delta)
        traj = integrate_envelope(state, p, d, dwell, dt=dt, stride=n_steps)
        u[i] = abs(traj.alpha[-1])**2
        fin = traj.final_state()
        state = EnvelopeState(fin.alpha_re, fin.alpha_im, fin.z, fin.vz, 0.0)
    return u


def _threshold_jumps(detunings, u, threshold):
    du = np.abs(np.diff(u))
    idx = np.nonzero(du > threshold)[0] + 1
    jumped = np.zeros(u.size, bool)
    jumped[idx] = True
    return detunings[idx], jumped


def _max_branch_step(detunings, f0, gamma, xi):
    # largest |du| between neighboring grid points while staying on one
    # stable branch; a genuine jump must beat this, a smooth trace cannot
    if f0 <= 0.0:
        return 0.0
    d = np.sort(np.asarray(detunings, float))
    if xi <= 0.0:
        u = f0**2 / (d**2 + 0.25 * gamma**2)
        return float(np.max(np.abs(np.diff(u))))
    window = bistable_region(f0, gamma, xi)
    roots, count = _real_roots_batch(d, f0, gamma, xi)
    lower = np.where(count == 3, roots[:, 0], np.nan)
    upper = np.where(count == 3, roots[:, 2], np.nan)
    single = count == 1
    if window.exists:
        # outside the window only one branch survives; fold points with
        # two roots stay NaN, which just drops the adjacent diffs
        low_side = single & (d <= window.center)
        lower[low_side] = roots[low_side, 0]
        up_side = single & (d > window.center)
        upper[up_side] = roots[up_side, 0]
    else:
        lower[single] = roots[single, 0]
    best = 0.0
    for series in (lower, upper):
        du = np.abs(np.diff(series))
        du = du[np.isfinite(du)]
        if du.size:
            best = max(best, float(du.max()))
    return best


def run_sweep(cfg: SweepExperimentConfig) -> SweepResult:
    """Run the stepped-frequency response measurement.

    Jumps are extracted by thresholding |du| between consecutive steps at 3x
    the largest continuous step change the steady-state branches allow for
    that drive on this grid.  Smooth steps cannot reach the threshold by
    construction; saddle-node jumps clear it by the branch separation.
    """
    p = cfg.trap
    derived = derive_params(p, _force_drive(p, 0.0, 0.0))
    gamma, xi = p.damping, derived.xi

    n = int(math.floor((cfg.delta_max - cfg.delta_min) / cfg.step + 1e-9)) + 1
    grid_up = cfg.delta_min + cfg.step * np.arange(n)

    fc = critical_drive(gamma, xi) if xi > 0.0 else math.inf
    positive = [f for f in cfg.drives if f > 0.0]
    if positive and min(positive) < fc:
        f_ref = min(positive)
    else:
        f_ref = 0.5 * fc if math.isfinite(fc) else (min(positive) if positive
                                                    else 0.0)
    # smooth-scale reference, kept for reporting
    base = _max_branch_step(grid_up, f_ref, gamma, xi)

    entries = []
    for f0 in cfg.drives:
        step_cap = _max_branch_step(grid_up, f0, gamma, xi)
        thr = 3.0 * step_cap if step_cap > 0.0 else math.inf
        for direction in cfg.directions:
            detunings = grid_up if direction == "ascending" else grid_up[::-1]
            if cfg.model == QUASI_STATIC:
                rec = hysteresis_sweep(p, _force_drive(p, f0, detunings[0]),
                                       detunings[0], detunings[-1],
                                       cfg.step if direction == "ascending"
                                       else -cfg.step)
            else:
                u = _envelope_branch_trace(p, f0, detunings, cfg.dwell)
                rec = _record_from_u(p, f0, gamma, xi, detunings, u,
                                     direction)
            jd, jumped = _threshold_jumps(rec.detunings, rec.u, thr)
            if cfg.model == ENVELOPE:
                rec = replace(rec, jumped=jumped)
            entries.append(SweepEntry(f0_reduced=f0, direction=direction,
                                      record=rec, jump_detunings=jd))
    return SweepResult(entries=tuple(entries), model=cfg.model, f0_ref=f_ref,
                       base_step=base)


def _record_from_u(p, f0, gamma, xi, detunings, u, direction):
    # label each point by the nearest steady branch (for integrated traces
    # that carry no label of their own)
    window = (bistable_region(f0, gamma, xi) if xi > 0.0 and f0 > 0.0
              else None)
    if window is not None and window.exists:
        roots, count = _real_roots_batch(detunings, f0, gamma, xi)
        labels = []
        for i in range(detunings.size):
            if count[i] == 3:
                labels.append(LOWER if abs(u[i] - roots[i, 0])
                              <= abs(u[i] - roots[i, 2]) else UPPER)
            else:
                labels.append(_branch_side(window, detunings[i], LOWER))
    else:
        labels = [LOWER] * detunings.size
    return SweepRecord(detunings=np.asarray(detunings, float), u=u,
                       amplitude=np.sqrt(np.maximum(u, 0.0)), branch=labels,
                       jumped=np.zeros(u.size, bool),
                       z0=equilibrium_displacement(p, u, 0.0),
                       direction=direction, f0_reduced=f0)


# ---------------------------------------------------------------------------
# three-stage weak-force amplification

@dataclass(frozen=True)
class VibresStageConfig:
    """One stage of the amplification protocol.

    stage 'a': signal only (no radial drive, no tone) - the bare axial
    response.  Stage 'c': radial drive on, branch tracker pinned to one
    branch.  Stage 'e': enhancement tone on as well; the detuning excursion
    now reaches the bistable boundaries and the signal steers saddle-node
    jumps.  grid_rate is the internal true-trace sampling rate;
    radial_noise_frac optionally adds fractional radial-amplitude noise
    (default off - its physical origin in the measured records is unclear).
    """

    stage: str
    trap: TrapParams
    drive: DriveConfig
    camera: CameraConfig
    duration: float
    branch_prep: str = LOWER
    grid_rate: float = 2000.0
    radial_noise_frac: float = 0.0

    def __post_init__(self):
        if self.stage not in ("a", "c", "e"):
            raise ParameterError("stage must be 'a', 'c' or 'e'")
        if self.duration <= 0.0:
            raise ParameterError("duration must be > 0")
        if self.grid_rate < 10.0 * self.camera.frame_rate:
            raise ParameterError("grid_rate must be >= 10x the camera "
                                 "frame rate")
        if self.branch_prep not in (LOWER, UPPER):
            raise ParameterError(f"branch_prep must be '{LOWER}' or '{UPPER}'")
        if self.radial_noise_frac < 0.0:
            raise ParameterError("radial_noise_frac must be >= 0")
        d = self.drive
        if self.stage == "a" and (d.f0_force > 0.0 or d.fe_force > 0.0):
            raise ParameterError("stage 'a' takes the signal only: "
                                 "f0_force = fe_force = 0")
        if self.stage == "c" and (d.f0_force == 0.0 or d.fe_force > 0.0):
            raise ParameterError("stage 'c' takes signal + radial drive: "
                                 "f0_force > 0, fe_force = 0")
        if self.stage == "e" and (d.f0_force == 0.0 or d.fe_force == 0.0):
            raise ParameterError("stage 'e' needs the radial drive and the "
                                 "enhancement tone on")


@dataclass(frozen=True)
class StageResult:
    """Outcome of one protocol stage.

    t/z_true/u are the noiseless internal trace; trace and spectrum are the
    camera-limited record.  jump_times lists branch transfers; untuned marks
    a stage-e run that produced no jumps (tone outside the operating window).
    """

    stage: str
    trace: SampledTrace
    spectrum: SpectrumRecord
    jump_times: np.ndarray
    untuned: bool
    t: np.ndarray
    z_true: np.ndarray
    u: np.ndarray


def trim_to_signal_periods(trace: SampledTrace, omega_s) -> SampledTrace:
    """Cut a trace to a whole number of signal periods.

    Keeps the signal tone centered on a spectral bin; applied only when the
    signal period is a near-integer number of frames. Never trims below the
    32-frame spectral minimum.
    """
    if omega_s <= 0.0 or len(trace) < 2:
        return trace
    frames_per_period = (2.0 * math.pi / omega_s) / trace.frame_dt
    r = int(round(frames_per_period))
    if r < 1 or abs(frames_per_period - r) > 1e-6 * r:
        return trace
    n_use = (len(trace) // r) * r
    if n_use < 32 or n_use == len(trace):
        return trace
    return SampledTrace(t=trace.t[:n_use], z=trace.z[:n_use],
                        noise_sigma=trace.noise_sigma[:n_use])


def run_vibres_stage(cfg: VibresStageConfig) -> StageResult:
    """Simulate one stage and push it through the camera and the spectrum.

    The axial coordinate is the instantaneous equilibrium for the tracked
    radial amplitude plus the direct axial response; at camera rates the
    axial ring-down is unresolvable, so no transient is added.
    """
    p, d = cfg.trap, cfg.drive
    n = int(round(cfg.duration * cfg.grid_rate)) + 1
    t = np.arange(n) / cfg.grid_rate
    fz = axial_force(d, t)

    if cfg.stage == "a" or d.f0_force == 0.0:
        u = np.zeros(n)
        jump_times = np.empty(0)
    else:
        derived = derive_params(p, d)
        f0 = derived.f0_reduced
        delta_series = d.detuning(p) - detuning_per_force(p) * fz
        u, _, jump_idx = track_series(delta_series, f0, p.damping, derived.xi,
                                      prefer=cfg.branch_prep)
        if cfg.radial_noise_frac > 0.0:
            rng = np.random.default_rng((cfg.camera.seed, 77))
            u = np.maximum(
                u * (1.0 + cfg.radial_noise_frac * rng.standard_normal(n)),
                0.0)
        jump_times = t[jump_idx]

    z = equilibrium_displacement(p, u, fz)
    untuned = cfg.stage == "e" and jump_times.size == 0
    traj = Trajectory(t=t, z=z, vz=np.gradient(z, t), model="quasi-static",
                      alpha=np.sqrt(u).astype(complex),
                      meta={"stage": cfg.stage, "grid_rate_hz": cfg.grid_rate})
    trace = trim_to_signal_periods(sample_camera(traj, cfg.camera), d.omega_s)
    return StageResult(stage=cfg.stage, trace=trace,
                       spectrum=amplitude_spectrum(trace),
                       jump_times=jump_times, untuned=untuned,
                       t=t, z_true=z, u=u)


@dataclass(frozen=True)
class VibresReport:
    """Collected three-stage outcome.

    peaks maps stage name to the spectral amplitude at the signal frequency;
    the enhancement factors compare stage e against a and c (None when a
    stage was not run).
    """

    stages: dict
    peaks: dict
    f_signal: float
    factor_e_vs_a: EnhancementFactor = None
    factor_e_vs_c: EnhancementFactor = None
    jump_count: int = 0


_STAGE_SEED_OFFSET = {"a": 0, "c": 1, "e": 2}


def stage_drive(d: DriveConfig, stage: str) -> DriveConfig:
    """Silence the channels a protocol stage leaves off."""
    if stage == "a":
        return replace(d, f0_force=0.0, fe_force=0.0)
    if stage == "c":
        return replace(d, fe_force=0.0)
    if stage == "e":
        return d
    raise ParameterError("stage must be 'a', 'c' or 'e'")


def run_vibres_protocol(p: TrapParams, d: DriveConfig, camera: CameraConfig,
                        duration, stages="ace", branch_prep=LOWER,
                        grid_rate=2000.0, radial_noise_frac=0.0) -> VibresReport:
    """Run the requested stages with a shared camera and compare spectra.

    Each stage gets its own noise seed (base seed plus a per-stage offset) so
    records are independent draws; all stages share duration and camera
    settings so their spectra are directly comparable.
    """
    for s in stages:
        if s not in _STAGE_SEED_OFFSET:
            raise ParameterError(f"unknown stage {s!r}")
    results = {}
    for s in ("a", "c", "e"):
        if s not in stages:
            continue
        cam = replace(camera, seed=camera.seed + _STAGE_SEED_OFFSET[s])
        results[s] = run_vibres_stage(VibresStageConfig(
            stage=s, trap=p, drive=stage_drive(d, s), camera=cam,
            duration=duration, branch_prep=branch_prep, grid_rate=grid_rate,
            radial_noise_frac=radial_noise_frac))

    f_sig = d.omega_s / (2.0 * math.pi)
    peaks = {s: peak_amplitude(r.spectrum, f_sig) for s, r in results.items()}
    fa = (enhancement_factor(results["e"].spectrum, results["a"].spectrum,
                             f_sig) if "e" in results and "a" in results
          else None)
    fc = (enhancement_factor(results["e"].spectrum, results["c"].spectrum,
                             f_sig) if "e" in results and "c" in results
          else None)
    jumps = len(results["e"].jump_times) if "e" in results else 0
    return VibresReport(stages=results, peaks=peaks, f_signal=f_sig,
                        factor_e_vs_a=fa, factor_e_vs_c=fc, jump_count=jumps)


# ---------------------------------------------------------------------------
# tuning the enhancement tone

def centered_detuning(p: TrapParams, d: DriveConfig) -> float:
    """Detuning at the center of the bistable window for this drive, rad/s."""
    derived = derive_params(p, d)
    window = bistable_region(derived.f0_reduced, p.damping, derived.xi)
    if not window.exists:
        raise ParameterError("radial drive is below the bistable threshold")
    return window.center


@dataclass(frozen=True)
class OperatingWindow:
    """Allowed enhancement-tone amplitude interval (N).

    The tone's detuning excursion must bring the system within one signal
    swing of BOTH bistable boundaries without crossing either on its own;
    that leaves a force window of width two signal swings, shrunk by any
    off-center detuning offset.
    """

    fe_low: float
    fe_high: float
    delta_signal: float   # detuning swing of the signal alone, rad/s
    reach_lower: float    # excursion needed to reach the lower boundary
    reach_upper: float

    @property
    def exists(self) -> bool:
        return 0.0 < self.fe_low <= self.fe_high

    @property
    def center(self) -> float:
        return 0.5 * (self.fe_low + self.fe_high)

    def __contains__(self, fe_force) -> bool:
        return self.exists and self.fe_low <= fe_force <= self.fe_high


def enhancement_window(p: TrapParams, d: DriveConfig) -> OperatingWindow:
    """Compute the tone-amplitude operating window from the window geometry."""
    derived = derive_params(p, d)
    window = bistable_region(derived.f0_reduced, p.damping, derived.xi)
    if not window.exists:
        raise ParameterError("radial drive is below the bistable threshold")
    delta0 = d.detuning(p)
    r_lo = delta0 - window.delta_lower
    r_up = window.delta_upper - delta0
    k = detuning_per_force(p)
    ds = k * d.fs_force
    return OperatingWindow(fe_low=(max(r_lo, r_up) - ds) / k,
                           fe_high=(min(r_lo, r_up) + ds) / k,
                           delta_signal=ds, reach_lower=r_lo, reach_upper=r_up)


@dataclass(frozen=True)
class TuneResult:
    best_fe: float        # N
    fe_grid: np.ndarray   # N
    factors: np.ndarray   # enhancement vs the signal-only stage, per grid point
    jump_counts: np.ndarray
    window: OperatingWindow


def tune_enhancement(p: TrapParams, d: DriveConfig, fe_grid=None,
                     duration=20.0, grid_rate=2000.0) -> TuneResult:
    """Scan the enhancement-tone amplitude and measure the factor curve.

    Noiseless short records (default 20 s, ten signal periods) keep the scan
    cheap; the returned best_fe maximizes the stage-e/stage-a peak ratio at
    the signal frequency.  The default grid spans from well below to well
    beyond the geometric operating window.
    """
    window = enhancement_window(p, d)
    if fe_grid is None:
        if not window.exists:
            raise ParameterError("operating window is empty at this detuning; "
                                 "pass fe_grid explicitly")
        width = window.fe_high - window.fe_low
        fe_grid = np.linspace(max(window.fe_low - 3.0 * width, 0.0),
                              window.fe_high + 3.0 * width, 15)
    fe_grid = np.asarray(fe_grid, float)
    if fe_grid.size == 0 or np.any(fe_grid < 0.0):
        raise ParameterError("fe_grid must be non-empty and non-negative")

    cam = CameraConfig(photons_per_frame=math.inf, seed=0)
    ref = run_vibres_stage(VibresStageConfig(
        stage="a", trap=p, drive=stage_drive(d, "a"), camera=cam,
        duration=duration, grid_rate=grid_rate))
    f_sig = d.omega_s / (2.0 * math.pi)

    factors = np.empty(fe_grid.size)
    jumps = np.empty(fe_grid.size, int)
    for i, fe in enumerate(fe_grid):
        if fe == 0.0:
            # reduces to stage c
            de = replace(d, fe_force=0.0)
            res = run_vibres_stage(VibresStageConfig(
                stage="c", trap=p, drive=de, camera=cam, duration=duration,
                grid_rate=grid_rate))
        else:
            de = replace(d, fe_force=float(fe))
            res = run_vibres_stage(VibresStageConfig(
                stage="e", trap=p, drive=de, camera=cam, duration=duration,
                grid_rate=grid_rate))
        factors[i] = float(enhancement_factor(res.spectrum, ref.spectrum,
                                              f_sig))
        jumps[i] = res.jump_times.size
    best = float(fe_grid[int(np.argmax(factors))])
    return TuneResult(best_fe=best, fe_grid=fe_grid, factors=factors,
                      jump_counts=jumps, window=window)


# ---------------------------------------------------------------------------
# experiment bundle

def write_bundle(out_dir, report: VibresReport, config_raw: dict,
                 extra=None) -> list:
    """Write the protocol outcome as a directory of artifacts.

    config.yaml (flat snapshot), per-stage trace and spectrum CSVs, and
    summary.json with peaks, enhancement factors and jump statistics.
    Returns the list of paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    cfg_path = os.path.join(out_dir, "config.yaml")
    save_config(config_raw, cfg_path)
    paths.append(cfg_path)

    for s in sorted(report.stages):
        r = report.stages[s]
        tp = os.path.join(out_dir, f"stage_{s}_trace.csv")
        r.trace.write_csv(tp, metadata={"stage": s})
        paths.append(tp)
        sp = os.path.join(out_dir, f"stage_{s}_spectrum.csv")
        r.spectrum.write_csv(sp, metadata={"stage": s})
        paths.append(sp)

    payload = {
        "f_signal_hz": float(report.f_signal),
        "peaks_um": {s: float(v) * 1e6 for s, v in report.peaks.items()},
        "jump_count": int(report.jump_count),
    }
    if report.factor_e_vs_a is not None:
        payload["enhancement_e_vs_a"] = float(report.factor_e_vs_a)
        payload["e_vs_a_floor_limited"] = bool(
            report.factor_e_vs_a.floor_limited)
    if report.factor_e_vs_c is not None:
        payload["enhancement_e_vs_c"] = float(report.factor_e_vs_c)
    if "e" in report.stages:
        payload["untuned"] = bool(report.stages["e"].untuned)
    if extra:
        payload.update(extra)
    sm_path = os.path.join(out_dir, "summary.json")
    write_summary(sm_path, payload)
    paths.append(sm_path)
    return paths
