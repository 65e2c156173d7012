"""Steady states of the driven radial mode.

With the axial coordinate slaved to the radial amplitude, the envelope
equation closes on itself and its stationary squared amplitude u = |alpha|^2
solves a cubic,

    xi^2 u^3 + 2 xi D u^2 + (D^2 + gamma^2/4) u - f0^2 = 0,

where D = delta_eff is the effective detuning (drive detuning minus the shift
from any static axial force) and xi the geometry-induced Duffing coefficient.
Depending on D the cubic has one or three positive roots; with three, the
middle one is unstable and the response is bistable.  This module solves the
cubic, classifies stability from the linearized envelope flow, locates the
saddle-node boundaries of the bistable window, and follows the occupied
branch through quasi-static detuning changes, recording hysteresis jumps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .serialize import write_csv
from .trap import (DriveConfig, ParameterError, TrapParams, derive_params,
                   equilibrium_displacement)

STABLE = "stable"
UNSTABLE = "unstable"

# Roots closer than this (relative) are a saddle-node pair and collapse to one.
MERGE_TOL = 1e-6

# Residual bound |cubic(u)| / f0^2 guaranteed for returned roots.
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SteadyStateSolution:
    """One real root of the steady-state cubic.

    u              squared envelope amplitude, m^2
    amplitude      sqrt(u), m
    stability      'stable' or 'unstable'
    jacobian_eigs  eigenvalue pair of the linearized envelope flow, rad/s
    """

    u: float
    amplitude: float
    stability: str
    jacobian_eigs: tuple

    @property
    def stable(self) -> bool:
        return self.stability == STABLE


@dataclass(frozen=True)
class BistableRegion:
    """Detuning interval with three coexisting steady states."""

    delta_lower: float
    delta_upper: float
    exists: bool

    @property
    def center(self) -> float:
        return 0.5 * (self.delta_lower + self.delta_upper)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.delta_upper - self.delta_lower)

    def __contains__(self, delta_eff) -> bool:
        return self.exists and self.delta_lower < delta_eff < self.delta_upper


def cubic_coefficients(delta_eff, f0_reduced, gamma, xi):
    """Coefficients (a, b, c, d) of the steady-state cubic in u."""
    return (xi * xi,
            2.0 * xi * delta_eff,
            delta_eff * delta_eff + 0.25 * gamma * gamma,
            -(f0_reduced * f0_reduced))


def response_residual(u, delta_eff, f0_reduced, gamma, xi):
    """Residual of the steady-state condition at u (0 at an exact root)."""
    br = delta_eff + xi * u
    return u * (br * br + 0.25 * gamma * gamma) - f0_reduced * f0_reduced


def _curvature(u, delta_eff, gamma, xi):
    # derivative of the cubic at u; doubles as the Jacobian determinant
    return (3.0 * xi * xi * u + 4.0 * xi * delta_eff) * u \
        + delta_eff * delta_eff + 0.25 * gamma * gamma


def classify_stability(u, delta_eff, f0_reduced, gamma, xi):
    """Stability of a fixed point of the envelope flow.

    Linearizing the complex envelope equation around the root gives a real
    2x2 system with trace -gamma, so both eigenvalue real parts equal
    -gamma/2 unless the determinant goes negative, which splits them along
    the real axis and pushes one positive.  The determinant equals the slope
    of the steady-state cubic at the root, so the middle root of a three-root
    configuration is the unstable one.

    Returns ('stable'|'unstable', (eig1, eig2)).
    """
    if abs(response_residual(u, delta_eff, f0_reduced, gamma, xi)) > \
            1e-6 * max(f0_reduced * f0_reduced, 1e-300):
        raise ParameterError("u is not a steady-state root for these parameters")
    det = _curvature(u, delta_eff, gamma, xi)
    half = 0.5 * gamma
    radicand = half * half - det
    if radicand >= 0.0:
        s = math.sqrt(radicand)
        eigs = (-half + s, -half - s)
    else:
        s = math.sqrt(-radicand)
        eigs = (complex(-half, s), complex(-half, -s))
    label = STABLE if det > 0.0 else UNSTABLE
    return label, eigs


def _solution(u, delta_eff, f0_reduced, gamma, xi) -> SteadyStateSolution:
    label, eigs = classify_stability(u, delta_eff, f0_reduced, gamma, xi)
    return SteadyStateSolution(u=u, amplitude=math.sqrt(max(u, 0.0)),
                               stability=label, jacobian_eigs=eigs)


def _polish(u, coeffs):
    # Newton iterations on the cubic; converges in a few steps from
    # companion-matrix seeds
    a, b, c, d = coeffs
    for _ in range(8):
        p = ((a * u + b) * u + c) * u + d
        dp = (3.0 * a * u + 2.0 * b) * u + c
        if dp == 0.0:
            break
        step = p / dp
        u -= step
        if abs(step) <= 1e-16 * max(abs(u), 1e-300):
            break
    return u


def steady_state_roots(delta_eff, f0_reduced, gamma, xi):
    """All real non-negative steady-state amplitudes at one detuning.

    Parameters
    ----------
    delta_eff : effective detuning D, rad/s
    f0_reduced : reduced drive, m/s
    gamma : damping, rad/s
    xi : Duffing coefficient, rad/s/m^2

    Returns
    -------
    list of SteadyStateSolution, ascending in u.  Length 1 or 3; length 2
    occurs only at a saddle-node degeneracy, where the merging pair counts
    once.  Every root satisfies the cubic to better than 1e-9 relative to
    f0^2.
    """
    if gamma <= 0.0:
        raise ParameterError("gamma must be > 0")
    if xi < 0.0:
        raise ParameterError("xi must be >= 0")
    if f0_reduced < 0.0:
        raise ParameterError("f0_reduced must be >= 0")

    if f0_reduced == 0.0:
        return [_solution(0.0, delta_eff, f0_reduced, gamma, xi)]
    if xi == 0.0:
        u = f0_reduced**2 / (delta_eff**2 + 0.25 * gamma**2)
        return [_solution(u, delta_eff, f0_reduced, gamma, xi)]

    coeffs = cubic_coefficients(delta_eff, f0_reduced, gamma, xi)
    raw = np.roots(coeffs)
    scale = max(abs(r) for r in raw)
    reals = [float(r.real) for r in raw if abs(r.imag) <= 1e-7 * scale]
    reals = [_polish(u, coeffs) for u in reals]
    reals = sorted(u for u in reals if u > -1e-12 * scale)

    # collapse saddle-node pairs
    merged = []
    for u in reals:
        if merged and abs(u - merged[-1]) <= MERGE_TOL * max(abs(u), abs(merged[-1])):
            merged[-1] = 0.5 * (merged[-1] + u)
        else:
            merged.append(u)

    f0sq = f0_reduced * f0_reduced
    out = []
    for u in merged:
        u = max(u, 0.0)
        if abs(response_residual(u, delta_eff, f0_reduced, gamma, xi)) > \
                RESIDUAL_TOL * f0sq:
            # merged midpoint of a degenerate pair may sit off the curve;
            # re-polish from it
            u = max(_polish(u, coeffs), 0.0)
        out.append(_solution(u, delta_eff, f0_reduced, gamma, xi))
    if not out:
        raise ParameterError("no non-negative real root found (cannot happen "
                             "for gamma > 0)")
    return out


def _real_roots_batch(delta_eff, f0_reduced, gamma, xi):
    """Vectorized real roots of the cubic at many detunings.

    Returns (roots, count): roots is (n, 3) with unused slots NaN, ascending;
    count is the number of real roots per point (1 or 3; degenerate pairs are
    reported as distinct here and resolved by the callers' tolerances).
    Closed-form trigonometric/Cardano solutions polished by Newton steps.
    """
    D = np.asarray(delta_eff, float)
    a = xi * xi
    b = 2.0 * xi * D
    c = D * D + 0.25 * gamma * gamma
    d = -(f0_reduced * f0_reduced)

    # depressed cubic t^3 + p t + q with u = t - b/(3a)
    p = (3.0 * a * c - b * b) / (3.0 * a * a)
    q = (2.0 * b**3 - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a**3)
    disc = -4.0 * p**3 - 27.0 * q * q

    roots = np.full(D.shape + (3,), np.nan)
    three = disc > 0.0
    if np.any(three):
        pp, qq = p[three], q[three]
        r = np.sqrt(-pp / 3.0)
        arg = np.clip(1.5 * qq / (pp * r), -1.0, 1.0)
        theta = np.arccos(arg)
        for k in range(3):
            roots[three, k] = 2.0 * r * np.cos((theta - 2.0 * np.pi * k) / 3.0)
    one = ~three
    if np.any(one):
        pp, qq = p[one], q[one]
        s = np.sqrt(np.maximum(0.25 * qq * qq + pp**3 / 27.0, 0.0))
        roots[one, 0] = np.cbrt(-0.5 * qq + s) + np.cbrt(-0.5 * qq - s)
    roots -= (b / (3.0 * a))[..., None]

    bb = b[..., None]
    cc = c[..., None]
    for _ in range(3):
        val = ((a * roots + bb) * roots + cc) * roots + d
        der = (3.0 * a * roots + 2.0 * bb) * roots + cc
        der = np.where(der == 0.0, 1.0, der)
        roots = roots - np.where(np.isnan(roots), 0.0, val / der)
    roots = np.sort(roots, axis=-1)   # NaNs sort last, single roots sit in slot 0
    count = np.where(three, 3, 1)
    return roots, count


def critical_drive(gamma, xi) -> float:
    """Smallest reduced drive with a bistable window, gamma^1.5/(3^0.75 sqrt(xi))."""
    if xi <= 0.0:
        raise ParameterError("xi must be > 0")
    return gamma**1.5 / (3.0**0.75 * math.sqrt(xi))


def bistable_region(f0_reduced, gamma, xi) -> BistableRegion:
    """Locate the detuning window where three steady states coexist.

    The cubic has three real roots exactly where its discriminant is
    positive.  In the scaled detuning s = delta_eff/gamma the discriminant
    is (up to a positive factor) the quartic

        -s^4 - 4 q s^3 - s^2/2 - 9 q s - (27 q^2 + 1/16),   q = xi f0^2/gamma^3,

    whose two real roots below the fold point -sqrt(3)/2 are the saddle-node
    boundaries.  Those seeds are refined by bisection on the sign of the
    cubic's extremal values to a detuning resolution of 1e-3 gamma; the
    quartic keeps arbitrarily thin near-critical windows from being missed.
    """
    if xi <= 0.0:
        raise ParameterError("xi must be > 0")
    if gamma <= 0.0:
        raise ParameterError("gamma must be > 0")
    if f0_reduced <= critical_drive(gamma, xi):
        return BistableRegion(0.0, 0.0, False)

    a = xi * xi
    f0sq = f0_reduced * f0_reduced

    def extremal_values(D):
        # values of the cubic at its two stationary points (local max, local min);
        # defined for D <= -sqrt(3)/2 gamma where the stationary points are real
        b = 2.0 * xi * D
        c = D * D + 0.25 * gamma * gamma
        rad = math.sqrt(max(b * b - 3.0 * a * c, 0.0))
        u_hi = (-b + rad) / (3.0 * a)   # local minimum of the cubic
        u_lo = (-b - rad) / (3.0 * a)   # local maximum
        val = lambda u: ((a * u + b) * u + c) * u - f0sq
        return val(u_lo), val(u_hi)

    delta_c = -0.5 * math.sqrt(3.0) * gamma
    q = xi * f0sq / gamma**3
    cand = np.roots([-1.0, -4.0 * q, -0.5, -9.0 * q, -(27.0 * q * q + 1.0 / 16.0)])
    seeds = sorted(s.real * gamma for s in cand
                   if abs(s.imag) <= 1e-8 * max(1.0, abs(s.real))
                   and s.real * gamma < delta_c)
    if len(seeds) < 2 or seeds[0] == seeds[-1]:
        # above critical the root pair exists analytically; it collapses to
        # rounding only essentially at the critical point, where the window
        # is far below the returned resolution
        return BistableRegion(0.0, 0.0, False)
    tol = 1e-3 * gamma

    def refine(seed, pick):
        w = tol
        lo, hi = seed - w, seed + w
        while (pick(extremal_values(lo)) > 0.0) == (pick(extremal_values(hi)) > 0.0):
            w *= 4.0
            if w > gamma:
                return seed      # no bracket; the seed itself is the best answer
            lo, hi = seed - w, seed + w
        flo = pick(extremal_values(lo))
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if (pick(extremal_values(mid)) > 0.0) == (flo > 0.0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # lower boundary: local minimum crosses zero (upper pair annihilates);
    # upper boundary: local maximum crosses zero (lower pair annihilates)
    lower = refine(seeds[0], lambda v: v[1])
    upper = refine(seeds[-1], lambda v: v[0])
    if not lower < upper:
        # window thinner than the bisection resolution; keep the exact seeds
        lower, upper = seeds[0], seeds[-1]
    return BistableRegion(delta_lower=lower, delta_upper=upper, exists=True)


# ---------------------------------------------------------------------------
# branch tracking

LOWER = "lower"
UPPER = "upper"


@dataclass
class BranchTracker:
    """Occupied-branch state for quasi-static detuning changes.

    current_u is always a stable root at the last seen detuning.  jump_log
    collects (delta_eff, from_u, to_u) whenever the occupied branch vanished
    at a saddle-node and the state transferred to the surviving branch.
    """

    current_u: float
    branch_label: str
    f0_reduced: float
    gamma: float
    xi: float
    window: BistableRegion
    delta_eff: float
    jump_log: list = field(default_factory=list)


def _branch_side(window: BistableRegion, delta_eff, fallback):
    # which branch survives outside the window
    if not window.exists:
        return LOWER
    if delta_eff <= window.delta_lower:
        return LOWER
    if delta_eff >= window.delta_upper:
        return UPPER
    return fallback


def start_tracker(delta_eff, f0_reduced, gamma, xi, prefer=LOWER) -> BranchTracker:
    """Create a tracker on a stable branch at the given detuning.

    Inside the bistable window `prefer` picks the branch; outside there is
    only one choice.
    """
    if prefer not in (LOWER, UPPER):
        raise ParameterError(f"prefer must be '{LOWER}' or '{UPPER}'")
    window = (bistable_region(f0_reduced, gamma, xi) if xi > 0.0 and f0_reduced > 0.0
              else BistableRegion(0.0, 0.0, False))
    sols = steady_state_roots(delta_eff, f0_reduced, gamma, xi)
    stable = [s.u for s in sols if s.stable]
    if not stable:
        raise ParameterError("no stable root at the starting detuning")
    if len(stable) == 1:
        label = _branch_side(window, delta_eff, prefer)
        u = stable[0]
    else:
        label = prefer
        u = stable[0] if prefer == LOWER else stable[-1]
    return BranchTracker(current_u=u, branch_label=label, f0_reduced=f0_reduced,
                         gamma=gamma, xi=xi, window=window, delta_eff=delta_eff)


def _advance(u_prev, label, stable_sorted, delta_eff, window):
    """One quasi-static step of branch selection.

    Returns (u, label, jumped).  With two stable roots the occupied branch
    continues by label; with one, the survivor is taken and a jump is
    recorded when it belongs to the other branch (the occupied one ended at
    a saddle-node).
    """
    if len(stable_sorted) >= 2:
        u = stable_sorted[0] if label == LOWER else stable_sorted[-1]
        return u, label, False
    u = stable_sorted[0]
    side = _branch_side(window, delta_eff, label)
    return u, side, side != label


def track_branch(tracker: BranchTracker, delta_eff) -> BranchTracker:
    """Continue the occupied branch to a new detuning (mutates the tracker)."""
    sols = steady_state_roots(delta_eff, tracker.f0_reduced, tracker.gamma,
                              tracker.xi)
    stable = [s.u for s in sols if s.stable]
    if not stable:
        raise ParameterError(f"no stable root at delta_eff = {delta_eff:g}")
    u, label, jumped = _advance(tracker.current_u, tracker.branch_label,
                                stable, delta_eff, tracker.window)
    if jumped:
        tracker.jump_log.append((delta_eff, tracker.current_u, u))
    tracker.current_u = u
    tracker.branch_label = label
    tracker.delta_eff = delta_eff
    return tracker


def track_series(delta_eff, f0_reduced, gamma, xi, prefer=LOWER):
    """Quasi-static branch trace over an array of effective detunings.

    Vectorized equivalent of repeated track_branch calls, for long records
    (the selection rule is identical; the cubic is solved in closed form for
    the whole series at once).  Returns (u, labels, jump_indices): labels is
    an int array (0 lower, 1 upper) and jump_indices marks the points at
    which a saddle-node transfer landed.
    """
    D = np.asarray(delta_eff, float)
    if D.size == 0:
        return np.empty(0), np.empty(0, int), np.empty(0, int)
    roots, count = _real_roots_batch(D, f0_reduced, gamma, xi)
    tracker = start_tracker(D[0], f0_reduced, gamma, xi, prefer=prefer)
    window = tracker.window
    u_out = np.empty(D.size)
    labels = np.empty(D.size, int)
    jumps = []
    label = tracker.branch_label
    u_out[0] = tracker.current_u
    labels[0] = 0 if label == LOWER else 1
    for i in range(1, D.size):
        if count[i] == 3:
            # stable roots are the outer pair; the middle root is unstable
            stable = (roots[i, 0], roots[i, 2])
        else:
            stable = (roots[i, 0],)
        u, label, jumped = _advance(u_out[i - 1], label, stable, D[i], window)
        if jumped:
            jumps.append(i)
        u_out[i] = u
        labels[i] = 0 if label == LOWER else 1
    return u_out, labels, np.asarray(jumps, int)


# ---------------------------------------------------------------------------
# hysteresis sweeps

@dataclass(frozen=True)
class SweepRecord:
    """Quasi-static response trace of one directional detuning sweep."""

    detunings: np.ndarray      # rad/s
    u: np.ndarray              # m^2
    amplitude: np.ndarray      # m
    branch: list               # 'lower'/'upper' per step
    jumped: np.ndarray         # bool per step (jump landed on this step)
    z0: np.ndarray             # m, axial equilibrium with no axial force
    direction: str
    f0_reduced: float

    @property
    def jump_detunings(self) -> np.ndarray:
        return self.detunings[self.jumped]

    def write_csv(self, path, metadata=None):
        cols = ("detuning_hz", "u_m2", "amplitude_um", "branch", "jumped", "z0_um")
        two_pi = 2.0 * math.pi
        rows = ((self.detunings[i] / two_pi, self.u[i], self.amplitude[i] * 1e6,
                 self.branch[i], bool(self.jumped[i]), self.z0[i] * 1e6)
                for i in range(len(self.detunings)))
        meta = {"direction": self.direction, "f0_reduced_mps": self.f0_reduced}
        if metadata:
            meta.update(metadata)
        write_csv(path, cols, rows, metadata=meta)


def hysteresis_sweep(p: TrapParams, d: DriveConfig, delta_start, delta_end,
                     step) -> SweepRecord:
    """Sweep the drive detuning quasi-statically and record the branch trace.

    The detuning moves from delta_start to delta_end in increments of `step`
    (sign must match the direction, magnitude below gamma/4 so saddle-nodes
    are resolved).  Static axial forces are not applied here; the emitted z0
    trace is the radial contribution alone.
    """
    if step == 0.0:
        raise ParameterError("step must be nonzero")
    if (delta_end - delta_start) * step <= 0.0:
        raise ParameterError("step sign must match the sweep direction")
    if abs(step) >= p.damping / 4.0:
        raise ParameterError("|step| must stay below damping/4 to resolve "
                             "the saddle-node boundaries")
    derived = derive_params(p, d)
    f0 = derived.f0_reduced
    gamma = p.damping
    xi = derived.xi

    n = int(math.floor((delta_end - delta_start) / step + 1e-9)) + 1
    detunings = delta_start + step * np.arange(n)
    tracker = start_tracker(detunings[0], f0, gamma, xi, prefer=LOWER)
    u = np.empty(n)
    jumped = np.zeros(n, bool)
    branch = []
    u[0] = tracker.current_u
    branch.append(tracker.branch_label)
    for i in range(1, n):
        jumps_before = len(tracker.jump_log)
        track_branch(tracker, detunings[i])
        u[i] = tracker.current_u
        branch.append(tracker.branch_label)
        jumped[i] = len(tracker.jump_log) > jumps_before
    z0 = equilibrium_displacement(p, u, 0.0)
    direction = "ascending" if step > 0 else "descending"
    return SweepRecord(detunings=detunings, u=u, amplitude=np.sqrt(u),
                       branch=branch, jumped=jumped, z0=z0,
                       direction=direction, f0_reduced=f0)
