"""The response cubic and its bistable window.

Driving the radial mode near resonance while it is coupled to the axial
coordinate turns the Lorentzian response into a cubic: above a critical
drive strength there is a detuning interval with two stable amplitudes.
This script charts the branch amplitudes across detuning for a few drive
strengths and prints the window boundaries against drive, the quantity the
downstream hysteresis and amplification demos rely on.

Run:  python3 demos/02_steady_state.py   (writes demo_out/steady/)
"""

import math
import os

import numpy as np

from funneltrap import (bistable_region, config_from_dict, critical_drive,
                        default_config, derive_params, reduced_drive,
                        steady_state_roots)
from funneltrap.serialize import write_csv

TWO_PI = 2.0 * math.pi
OUT = os.path.join("demo_out", "steady")
os.makedirs(OUT, exist_ok=True)

rc = config_from_dict(default_config())
p = rc.trap
der = derive_params(p, rc.drive)
gamma, xi = p.damping, der.xi

fc = critical_drive(gamma, xi)
fc_zn = fc * 4.0 * p.mass * p.omega_x / 1e-21
print(f"critical radial force: {fc_zn:.2f} zN "
      f"(f0 = {fc:.3e} m/s); below this the response is single-valued")
print()

# branch amplitudes across the window for three drives
detunings = TWO_PI * np.linspace(-40e3, 2e3, 841)
rows = []
for force_zn in (1.0, 10.0, 30.0):
    f0 = reduced_drive(p, force_zn * 1e-21)
    for delta in detunings:
        sols = steady_state_roots(delta, f0, gamma, xi)
        for s in sols:
            rows.append((force_zn, delta / TWO_PI, s.u,
                         s.amplitude * 1e6, s.stability))
write_csv(os.path.join(OUT, "response_curves.csv"),
          ("force_zn", "detuning_hz", "u_m2", "amplitude_um", "stability"),
          rows, metadata={"gamma_rad_s": gamma, "xi_rad_s_m2": xi})
print(f"wrote {OUT}/response_curves.csv ({len(rows)} rows)")
print()

print("bistable window vs drive strength")
print(f"  {'force':>8} {'lower Hz':>12} {'upper Hz':>12} {'width Hz':>10}")
for force_zn in (1.0, 2.5, 5.0, 10.0, 20.0, 30.0):
    f0 = reduced_drive(p, force_zn * 1e-21)
    w = bistable_region(f0, gamma, xi)
    if not w.exists:
        print(f"  {force_zn:6.1f} zN   single-valued everywhere")
        continue
    print(f"  {force_zn:6.1f} zN {w.delta_lower / TWO_PI:12.1f} "
          f"{w.delta_upper / TWO_PI:12.1f} "
          f"{(w.delta_upper - w.delta_lower) / TWO_PI:10.1f}")
print()

# the three coexisting states at the default operating point
delta0 = rc.drive.detuning(p)
print(f"roots at the default detuning ({delta0 / TWO_PI:.0f} Hz), 30 zN:")
for s in steady_state_roots(delta0, der.f0_reduced, gamma, xi):
    eigs = ", ".join(f"{e:.1f}" for e in s.jacobian_eigs)
    print(f"  |alpha| = {s.amplitude * 1e6:9.4f} um  {s.stability:>8}  "
          f"eigenvalues [{eigs}]")
