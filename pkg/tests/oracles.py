"""Independent reference implementations that pin test expectations.

Everything here is deliberately brute force or closed form, written without
looking at the package internals: dense sign scans instead of companion
matrices, direct DFT sums instead of FFTs, perturbation integration instead
of Jacobian algebra, symbolic arithmetic for the handful of headline
constants.  Slow is fine; these run only under pytest.
"""

import numpy as np
from scipy import constants

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# steady-state response, brute force

def response_value(u, delta_eff, f0, gamma, xi):
    # resonance condition in factored form, zero at a steady state
    return ((xi * u + delta_eff) ** 2 + gamma * gamma / 4.0) * u - f0 * f0


def scan_roots(delta_eff, f0, gamma, xi, n=200001):
    """All non-negative steady-state roots by dense sign scan + bisection.

    u never exceeds (2 f0 / gamma)^2: the damping term alone saturates the
    response there, so the scan interval is closed.
    """
    if f0 == 0.0:
        return [0.0]
    if xi == 0.0:
        return [f0 * f0 / (delta_eff * delta_eff + gamma * gamma / 4.0)]
    hi = 4.0 * f0 * f0 / (gamma * gamma) * (1.0 + 1e-9)
    grid = np.linspace(0.0, hi, n)
    vals = response_value(grid, delta_eff, f0, gamma, xi)
    sign = np.sign(vals)
    roots = []
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        a, b = grid[i], grid[i + 1]
        fa = vals[i]
        for _ in range(120):
            m = 0.5 * (a + b)
            if m == a or m == b:
                break
            fm = response_value(m, delta_eff, f0, gamma, xi)
            if fa * fm <= 0.0:
                b = m
            else:
                a, fa = m, fm
        roots.append(0.5 * (a + b))
    return roots


def min_pair_separation(delta_eff, f0, gamma, xi):
    """Relative separation a nearly merged root pair would have, estimated
    from the cubic's value and curvature at its extrema.  Large (inf) when
    the response is nowhere near a fold; a sign scan is unreliable below
    ~1e-3 and such parameter draws get redrawn.
    """
    D = delta_eff
    disc = D * D - 0.75 * gamma * gamma
    if xi == 0.0 or disc <= 0.0 or D >= 0.0:
        return np.inf
    best = np.inf
    for s in (-1.0, 1.0):
        ue = (-2.0 * D + s * np.sqrt(disc)) / (3.0 * xi)
        if ue <= 0.0:
            continue
        pe = response_value(ue, D, f0, gamma, xi)
        curv = 6.0 * xi * xi * ue + 4.0 * xi * D
        if curv == 0.0:
            return 0.0
        sep = 2.0 * np.sqrt(2.0 * abs(pe) / abs(curv)) / ue
        best = min(best, sep)
    return best


def perturbation_stable(draws, eps=1e-3, horizon=40.0, rtol=1e-4):
    """Stability of steady states by direct perturbation integration.

    draws: sequence of (u, delta_eff, f0, gamma, xi).  For each draw the
    envelope flow is integrated from the fixed point displaced by eps
    radially (both signs) and tangentially (both signs); the draw counts as
    stable only if all four runs return to u.  Vectorized complex RK4 in
    damping-time units, so one shared step size covers every draw.
    """
    draws = [tuple(map(float, d)) for d in draws]
    n = len(draws)
    u = np.array([d[0] for d in draws])
    D = np.array([d[1] for d in draws])
    f0 = np.array([d[2] for d in draws])
    gam = np.array([d[3] for d in draws])
    xi = np.array([d[4] for d in draws])

    # fixed point of the rotating-frame flow at the given u
    denom = gam / 2.0 - 1j * (D + xi * u)
    alpha0 = 1j * f0 / denom
    # alpha0 reproduces u only if u really is a root; caller guarantees it

    offs = np.array([1.0 + eps, 1.0 - eps, 1.0 + 1j * eps, 1.0 - 1j * eps])
    alpha = (alpha0[None, :] * offs[:, None]).reshape(-1)
    Db = np.tile(D / gam, 4)
    xib = np.tile(xi / gam, 4)
    fb = np.tile(f0 / gam, 4)

    rate = np.max(np.abs(D + 3.0 * xi * u) / gam) + 1.0
    dt = min(0.02, 0.5 / rate)
    steps = int(np.ceil(horizon / dt))

    def rhs(a):
        return (1j * (Db + xib * np.abs(a) ** 2) - 0.5) * a + 1j * fb

    for _ in range(steps):
        k1 = rhs(alpha)
        k2 = rhs(alpha + 0.5 * dt * k1)
        k3 = rhs(alpha + 0.5 * dt * k2)
        k4 = rhs(alpha + dt * k3)
        alpha = alpha + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    uf = (np.abs(alpha) ** 2).reshape(4, n)
    ok = np.abs(uf - u[None, :]) <= rtol * np.maximum(u[None, :], 1e-300)
    return ok.all(axis=0)


def window_by_scan(f0, gamma, xi, lo, hi, n_grid=4001, tol_rel=1e-4,
                   n_scan=100001):
    """Three-root detuning window located purely with scan_roots: grid the
    detuning, find the count transitions, bisect them.  The bisection scans
    finely (a nearly merged pair closer than the u grid spacing reads as one
    root, biasing the boundary inward).  Returns None when no grid point has
    three roots.
    """
    grid = np.linspace(lo, hi, n_grid)
    counts = np.array([len(scan_roots(d, f0, gamma, xi, n=20001))
                       for d in grid])
    inside = np.nonzero(counts == 3)[0]
    if inside.size == 0:
        return None
    tol = tol_rel * gamma

    def bisect(a, b):
        # invariant: count(a) != count(b)
        ca = len(scan_roots(a, f0, gamma, xi, n=n_scan))
        while b - a > tol:
            m = 0.5 * (a + b)
            if len(scan_roots(m, f0, gamma, xi, n=n_scan)) == ca:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    lo_edge = bisect(grid[inside[0] - 1], grid[inside[0]])
    hi_edge = bisect(grid[inside[-1]], grid[inside[-1] + 1])
    return lo_edge, hi_edge


def draw_parameters(rng, degeneracy_tol=1e-3):
    """One random parameter draw for oracle comparisons, spread over decades
    of damping, nonlinearity, drive (relative to critical) and detuning
    (relative to damping) so monostable and bistable cases both appear.

    Draws landing within degeneracy_tol relative of a saddle-node double
    root are redrawn; the sign scan cannot resolve nearly merged pairs and
    the solver's own merge tolerance treats them as one root.  Returns
    ((delta_eff, f0, gamma, xi), redraws).
    """
    redraws = 0
    while True:
        gamma = TWO_PI * 10.0 ** rng.uniform(1.5, 3.2)
        xi = 10.0 ** rng.uniform(12.5, 15.5)
        f0 = critical_drive_closed(gamma, xi) * 10.0 ** rng.uniform(-0.7, 0.7)
        sign = -1.0 if rng.random() < 0.8 else 1.0
        delta = sign * gamma * 10.0 ** rng.uniform(-0.7, 1.5)
        if min_pair_separation(delta, f0, gamma, xi) >= degeneracy_tol:
            return (delta, f0, gamma, xi), redraws
        redraws += 1


# ---------------------------------------------------------------------------
# closed forms

def lorentzian_u(delta, f0, gamma):
    return f0 * f0 / (delta * delta + gamma * gamma / 4.0)


def resonant_amplitude(F0, mass, omega_x, gamma):
    # steady drive response of the linear damped oscillator at resonance
    return F0 / (mass * omega_x * gamma)


def step_rise(t, f0, gamma):
    return 2.0 * f0 / gamma * (1.0 - np.exp(-gamma * t / 2.0))


def sinc_factor(f_hz, exposure_s):
    # attenuation of a tone averaged over a rectangular exposure window
    return float(np.sinc(f_hz * exposure_s))


def critical_drive_closed(gamma, xi):
    return gamma ** 1.5 / (3.0 ** 0.75 * np.sqrt(xi))


def collapse_detuning(gamma):
    return -np.sqrt(3.0) / 2.0 * gamma


# ---------------------------------------------------------------------------
# spectral estimation, direct sums

def hann(n):
    return 0.5 - 0.5 * np.cos(TWO_PI * np.arange(n) / n)


def dft_amplitude(values, dt, f_hz):
    """Hann-windowed amplitude of one frequency component, direct DFT sum,
    normalized so an on-bin sinusoid of amplitude A reports A."""
    values = np.asarray(values, dtype=float)
    n = values.size
    w = hann(n)
    x = (values - values.mean()) * w
    ph = np.exp(-2j * np.pi * f_hz * dt * np.arange(n))
    return 2.0 * abs(np.sum(x * ph)) / np.sum(w)


def hann_noise_floor(sigma, n):
    """Expected per-bin amplitude of white noise of std sigma under the
    same normalization: E|X| of a complex Gaussian bin."""
    w = hann(n)
    return sigma * np.sqrt(np.pi * np.sum(w * w)) / np.sum(w)


# ---------------------------------------------------------------------------
# headline constants, symbolic arithmetic

def exact_constants(digits=40):
    """The handful of numbers quoted in tests, evaluated with sympy at high
    precision from the same CODATA values the package imports."""
    import sympy as sp

    pi = sp.pi
    m = 40 * sp.Float(repr(constants.atomic_mass), digits)
    hbar = sp.Float(repr(constants.hbar), digits)
    wx = 2 * pi * sp.Float("1.14e6", digits)
    Om = 2 * pi * sp.Float("1.0e5", digits)
    l0 = sp.Float("1.81e-3", digits)
    F12 = sp.Float("1.2e-21", digits)
    F30 = sp.Float("3.0e-20", digits)

    xi = 2 * wx ** 3 / (Om ** 2 * l0 ** 2)
    return {
        "xi": float(xi),
        "xi_over_2pi": float(xi / (2 * pi)),
        "f0_30zn": float(F30 / (4 * m * wx)),
        "delta_1p2zn": float(wx * F12 / (m * l0 * Om ** 2)),
        "z_1p2zn": float(F12 / (m * Om ** 2)),
        "zpf": float(sp.sqrt(hbar / (2 * m * Om))),
    }
