"""How good is the envelope reduction?

The envelope model drops the fast radial oscillation and keeps only its
slowly varying amplitude, which makes millisecond protocols cheap to
integrate.  This script runs both models from rest at the strong-drive
operating point, demodulates the full-model radial track at the drive
frequency, and reports the worst-case deviation of amplitude and axial
position.  It also writes an overlay trace so the two transients can be
plotted on top of each other.

Run:  python3 demos/04_envelope_accuracy.py   (writes demo_out/envelope/)
"""

import math
import os

import numpy as np

from funneltrap import (DriveConfig, EnvelopeState, FullState, TrapParams,
                        demodulate, envelope_accuracy_check, integrate_envelope,
                        integrate_full)
from funneltrap.serialize import write_csv
from funneltrap.trap import ATOMIC_MASS

TWO_PI = 2.0 * math.pi
OUT = os.path.join("demo_out", "envelope")
os.makedirs(OUT, exist_ok=True)

p = TrapParams(
    mass=40.0 * ATOMIC_MASS,
    omega_x=TWO_PI * 1.14e6,
    omega_y=TWO_PI * 1.15e6,
    omega_z=TWO_PI * 100e3,
    funnel_length=1.81e-3,
    damping=TWO_PI * 250.0,
)
# 30 zN at the center of its bistable window
d = DriveConfig(f0_force=30e-21, omega_0=p.omega_x - TWO_PI * 18998.0)

rep = envelope_accuracy_check(p, d, window=0.01)
print(f"10 ms from rest at 30 zN, detuning {d.detuning(p) / TWO_PI:.0f} Hz")
print(f"  max |alpha| deviation  {rep.max_dev_alpha * 100:5.2f} %")
print(f"  max z deviation        {rep.max_dev_z * 100:5.2f} %")
print(f"  (full-model dt {rep.dt_full * 1e9:.2f} ns, "
      f"envelope dt {rep.dt_envelope * 1e9:.0f} ns)")
print()

# a shorter window for the overlay file; the transient rings at the
# effective detuning and settles on the 2/gamma scale
t_end = 0.003
dt_f = TWO_PI / (200.0 * p.omega_x)
stride_f = max(1, int(round(TWO_PI / (10.0 * p.omega_x) / dt_f)))
traj_f = integrate_full(FullState.at_rest(), p, d, t_end, dt_f,
                        stride=stride_f)
traj_e = integrate_envelope(EnvelopeState.at_rest(), p, d, t_end, stride=4)

td, amp = demodulate(traj_f.t, traj_f.x, d.omega_0, d.phase_0)
alpha_env = np.interp(td, traj_e.t, np.abs(traj_e.alpha))
z_full = np.interp(td, traj_f.t, traj_f.z)
z_env = np.interp(td, traj_e.t, traj_e.z)

rows = zip(td, amp * 1e6, alpha_env * 1e6, z_full * 1e6, z_env * 1e6)
path = os.path.join(OUT, "transient_overlay.csv")
write_csv(path, ("t_s", "alpha_full_um", "alpha_env_um",
                 "z_full_um", "z_env_um"), rows,
          metadata={"f0_zn": 30.0, "detuning_hz": d.detuning(p) / TWO_PI})
print(f"wrote {path} ({td.size} rows)")
print(f"  settle scale 2/gamma = {2.0 / p.damping * 1e3:.2f} ms; "
      f"final |alpha| = {abs(traj_e.alpha[-1]) * 1e6:.3f} um, "
      f"z = {traj_e.z[-1] * 1e6:.3f} um")
