"""Simulation and analysis of a single particle in a funnel-shaped trap.

The radial confinement stiffens along the trap axis, which couples the two
secular modes: radial amplitude pushes the axial equilibrium, and the axial
position detunes the radial mode.  A near-resonant radial drive therefore
behaves as a softening Duffing oscillator with bistability and hysteresis,
and a weak slow axial force can be amplified by letting it steer jumps
between the two branches.

Layers: `trap` holds parameters and closed forms, `steady` the response
cubic with stability and branch tracking, `dynamics` the time-domain
integrators, `measurement` the camera model and spectral analysis,
`experiments` the sweep and amplification protocols, `cli` the command-line
front end.
"""

__version__ = "0.1.0"

from .dynamics import (AccuracyReport, DivergenceError, EnvelopeState,
                       FullState, Trajectory, demodulate,
                       envelope_accuracy_check, integrate_envelope,
                       integrate_full, total_energy)
from .experiments import (OperatingWindow, StageResult, SweepEntry,
                          SweepExperimentConfig, SweepResult, TuneResult,
                          VibresReport, VibresStageConfig, centered_detuning,
                          enhancement_window, run_sweep, run_vibres_protocol,
                          run_vibres_stage, stage_drive,
                          trim_to_signal_periods, tune_enhancement,
                          write_bundle)
from .measurement import (CameraConfig, EnhancementFactor, SampledTrace,
                          SpectrumRecord, amplitude_spectrum,
                          enhancement_factor, peak_amplitude, sample_camera)
from .steady import (BistableRegion, BranchTracker, SteadyStateSolution,
                     SweepRecord, bistable_region, classify_stability,
                     critical_drive, cubic_coefficients, hysteresis_sweep,
                     response_residual, start_tracker, steady_state_roots,
                     track_branch, track_series)
from .trap import (ConfigError, DerivedParams, DriveConfig, ParameterError,
                   RunConfig, TrapParams, axial_force, config_from_dict,
                   default_config, derive_params, detuning_modulation,
                   detuning_per_force, equilibrium_displacement, load_config,
                   local_radial_frequency, reduced_drive, save_config,
                   volt_to_force)

__all__ = [name for name in dir() if not name.startswith("_")]
