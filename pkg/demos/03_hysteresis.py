"""Hysteresis: where the sweeps jump.

Inside the bistable window the branch the particle sits on depends on how
it got there.  Sweeping the radial drive detuning upward rides the lower
branch until its fold; sweeping downward rides the upper branch to the
other fold.  The two jump detunings bracket the window computed directly
from the cubic.  This script runs both quasi-static sweeps at 30 zN,
writes the traces, and tabulates jump points against the analytic folds.

Run:  python3 demos/03_hysteresis.py   (writes demo_out/hysteresis/)
"""

import math
import os

from funneltrap import (DriveConfig, TrapParams, bistable_region,
                        derive_params, hysteresis_sweep)
from funneltrap.trap import ATOMIC_MASS

TWO_PI = 2.0 * math.pi
OUT = os.path.join("demo_out", "hysteresis")
os.makedirs(OUT, exist_ok=True)

p = TrapParams(
    mass=40.0 * ATOMIC_MASS,
    omega_x=TWO_PI * 1.14e6,
    omega_y=TWO_PI * 1.15e6,
    omega_z=TWO_PI * 100e3,
    funnel_length=1.81e-3,
    damping=TWO_PI * 250.0,
)
d = DriveConfig(f0_force=30e-21, omega_0=p.omega_x)
der = derive_params(p, d)
window = bistable_region(der.f0_reduced, p.damping, der.xi)

lo, hi = TWO_PI * -40e3, TWO_PI * 2e3
step = TWO_PI * 50.0

print("quasi-static sweeps at 30 zN, 50 Hz steps")
for name, a, b, s in (("ascending", lo, hi, step),
                      ("descending", hi, lo, -step)):
    rec = hysteresis_sweep(p, d, a, b, s)
    rec.write_csv(os.path.join(OUT, f"sweep_{name}.csv"),
                  metadata={"force_zn": 30.0})
    jumps = rec.jump_detunings / TWO_PI
    print(f"  {name:>10}: {len(rec.detunings)} steps, "
          f"jump at {jumps[0]:9.1f} Hz" if jumps.size else
          f"  {name:>10}: no jump")

print()
print("analytic fold detunings (saddle-node boundaries of the cubic):")
print(f"  lower {window.delta_lower / TWO_PI:9.1f} Hz   "
      f"upper {window.delta_upper / TWO_PI:9.1f} Hz")
print()
print("the ascending jump falls within one step above the upper fold, the")
print("descending jump within one step below the lower fold; between them")
print("the branch, and hence the axial position, remembers the history.")
