"""Camera-limited measurement of the axial motion and its spectral analysis.

The axial position is read out by imaging: frames at a fixed rate, each
integrating the true motion over its exposure window, with a localization
error set by the photon budget (sigma_0/sqrt(N) per frame).  Spectral
estimates use a Hann-windowed single-sided transform normalized so a pure
on-bin sinusoid of amplitude A reports A; signal strength is read off as a
local peak and enhancement is a ratio of peaks between two records.

Noise generation always goes through an explicitly seeded generator carried
by CameraConfig; nothing here touches global random state.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .dynamics import Trajectory
from .serialize import write_csv
from .trap import ParameterError


@dataclass(frozen=True)
class CameraConfig:
    """Imaging parameters.

    frame_rate          frames per second
    exposure            integration window per frame, s (<= frame period)
    photons_per_frame   detected photons N per frame; math.inf turns the
                        localization noise off
    psf_sigma           point-spread-function width sigma_0, m
    seed                generator seed for the localization noise
    """

    frame_rate: float = 8.0
    exposure: float = 0.1
    photons_per_frame: float = 240.0
    psf_sigma: float = 1.64e-6
    seed: int = 0

    def __post_init__(self):
        if self.frame_rate <= 0.0:
            raise ParameterError("frame_rate must be > 0")
        if not 0.0 < self.exposure <= 1.0 / self.frame_rate:
            raise ParameterError("exposure must lie in (0, 1/frame_rate]")
        if not self.photons_per_frame >= 1.0:
            raise ParameterError("photons_per_frame must be >= 1")
        if self.psf_sigma < 0.0:
            raise ParameterError("psf_sigma must be >= 0")

    @property
    def noise_sigma(self) -> float:
        """Per-frame localization error sigma_0/sqrt(N), m."""
        if math.isinf(self.photons_per_frame):
            return 0.0
        return self.psf_sigma / math.sqrt(self.photons_per_frame)


@dataclass(frozen=True)
class SampledTrace:
    """Camera record: frame-center times, measured z, per-frame noise sigma."""

    t: np.ndarray
    z: np.ndarray
    noise_sigma: np.ndarray

    def __post_init__(self):
        if not (len(self.t) == len(self.z) == len(self.noise_sigma)):
            raise ParameterError("trace arrays must have equal length")

    @property
    def frame_dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self):
        return len(self.t)

    def write_csv(self, path, metadata=None):
        rows = ((self.t[i], self.z[i] * 1e6) for i in range(len(self.t)))
        meta = {"noise_sigma_um": float(self.noise_sigma[0]) * 1e6}
        if metadata:
            meta.update(metadata)
        write_csv(path, ("t_s", "z_um_measured"), rows, metadata=meta)


@dataclass(frozen=True)
class SpectrumRecord:
    """Single-sided amplitude spectrum of a SampledTrace.

    amplitude[k] estimates the amplitude (m) of a sinusoid at freq[k];
    n_samples and window identify the analysis so records can be compared.
    """

    freq: np.ndarray
    amplitude: np.ndarray
    n_samples: int
    window: str = "hann"
    enbw_bins: float = 1.5    # equivalent noise bandwidth of the window, bins

    @property
    def bin_width(self) -> float:
        return float(self.freq[1] - self.freq[0])

    def write_csv(self, path, metadata=None):
        rows = ((self.freq[i], self.amplitude[i] * 1e6)
                for i in range(len(self.freq)))
        meta = {"n_samples": self.n_samples, "window": self.window}
        if metadata:
            meta.update(metadata)
        write_csv(path, ("freq_hz", "amplitude_um"), rows, metadata=meta)


def sample_camera(traj: Trajectory, c: CameraConfig) -> SampledTrace:
    """Image the axial coordinate of a trajectory.

    Each frame reports the mean of the true z over its exposure window plus
    one draw of the localization noise.  Frames start at the trajectory's
    first timestamp and repeat at the frame period; the trace must be sampled
    at >= 10x the frame rate and must cover the last exposure window.
    """
    t = traj.t
    dt = float(t[1] - t[0]) if len(t) > 1 else math.inf
    if dt > 1.0 / (10.0 * c.frame_rate):
        raise ParameterError(
            "trajectory must be sampled at >= 10x the camera frame rate")
    if dt > c.exposure:
        raise ParameterError("exposure window is narrower than the "
                             "trajectory sampling interval")
    period = 1.0 / c.frame_rate
    span = float(t[-1] - t[0])
    n_frames = int(math.floor((span - c.exposure) / period + 1e-9)) + 1
    if n_frames < 1:
        raise ParameterError("trajectory shorter than one exposure window")

    starts = t[0] + period * np.arange(n_frames)
    csum = np.concatenate(([0.0], np.cumsum(traj.z)))
    ia = np.searchsorted(t, starts - 1e-12)
    ib = np.searchsorted(t, starts + c.exposure + 1e-12)
    counts = ib - ia
    means = (csum[ib] - csum[ia]) / counts

    sigma = c.noise_sigma
    if sigma > 0.0:
        rng = np.random.default_rng(c.seed)
        means = means + rng.normal(0.0, sigma, n_frames)
    return SampledTrace(t=starts + 0.5 * c.exposure, z=means,
                        noise_sigma=np.full(n_frames, sigma))


def amplitude_spectrum(trace: SampledTrace) -> SpectrumRecord:
    """Hann-windowed single-sided amplitude spectrum.

    The mean is removed, the record is windowed, and amplitudes are
    normalized by the window's coherent gain so an on-bin sinusoid of
    amplitude A reports A.  DC and Nyquist bins carry no single-sided
    doubling.  Needs >= 32 uniformly spaced frames.
    """
    n = len(trace)
    if n < 32:
        raise ParameterError("spectrum needs at least 32 frames")
    steps = np.diff(trace.t)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ParameterError("spectrum needs uniform frame spacing")
    dt = float(steps[0])

    w = get_window("hann", n, fftbins=True)
    data = (trace.z - np.mean(trace.z)) * w
    amp = np.abs(np.fft.rfft(data)) * (2.0 / (n * np.mean(w)))
    amp[0] *= 0.5
    if n % 2 == 0:
        amp[-1] *= 0.5
    freq = np.fft.rfftfreq(n, d=dt)
    enbw = float(n * np.sum(w * w) / np.sum(w)**2)
    return SpectrumRecord(freq=freq, amplitude=amp, n_samples=n,
                          window="hann", enbw_bins=enbw)


def peak_amplitude(spec: SpectrumRecord, f: float) -> float:
    """Amplitude at the bin nearest f, max over +-1 bin to absorb leakage."""
    if not spec.freq[0] <= f <= spec.freq[-1]:
        raise ParameterError(
            f"frequency {f:g} Hz outside the spectral range "
            f"[{spec.freq[0]:g}, {spec.freq[-1]:g}] Hz")
    i = int(round((f - spec.freq[0]) / spec.bin_width))
    lo = max(0, i - 1)
    return float(np.max(spec.amplitude[lo:i + 2]))


@dataclass(frozen=True)
class EnhancementFactor:
    """Peak ratio between two spectra at one frequency.

    When the reference peak is indistinguishable from its noise floor the
    ratio is only a lower bound; floor_limited marks that case.
    """

    value: float
    floor_limited: bool
    ref_peak: float
    ref_floor: float

    def __float__(self):
        return self.value


def enhancement_factor(spec_on: SpectrumRecord, spec_ref: SpectrumRecord,
                       f: float) -> EnhancementFactor:
    """Ratio of peak amplitudes at f between two comparable spectra.

    Both records must share length and window, otherwise normalization and
    leakage differ and the ratio is meaningless.
    """
    if spec_on.n_samples != spec_ref.n_samples or \
            spec_on.window != spec_ref.window:
        raise ParameterError("spectra must share record length and window")
    on = peak_amplitude(spec_on, f)
    ref = peak_amplitude(spec_ref, f)
    floor = float(np.median(spec_ref.amplitude[1:]))
    limited = ref < 3.0 * floor
    return EnhancementFactor(value=on / ref if ref > 0.0 else math.inf,
                             floor_limited=limited, ref_peak=ref,
                             ref_floor=floor)
