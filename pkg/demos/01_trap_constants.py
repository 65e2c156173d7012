"""Where the numbers come from.

A funnel-shaped trap confines the particle radially with a frequency that
grows along the axis.  That single geometric fact sets every scale used in
the rest of the demos: the cubic coefficient xi of the radial response, the
static axial displacement per zeptonewton, and the axial frequency pull per
micron of radial amplitude.  This script builds the default operating point
and prints those scales.

Run:  python3 demos/01_trap_constants.py
"""

import math

from funneltrap import (DriveConfig, TrapParams, derive_params,
                        detuning_per_force, equilibrium_displacement,
                        local_radial_frequency, volt_to_force)
from funneltrap.trap import ATOMIC_MASS

TWO_PI = 2.0 * math.pi

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

print("trap (single Ca-40 ion scale)")
print(f"  radial frequency   {p.omega_x / TWO_PI / 1e6:8.3f} MHz")
print(f"  axial frequency    {p.omega_z / TWO_PI / 1e3:8.1f} kHz")
print(f"  funnel length      {p.funnel_length * 1e3:8.2f} mm")
print(f"  damping            {p.damping / TWO_PI:8.1f} Hz")
print()
print("derived scales")
print(f"  xi / 2pi           {der.xi / TWO_PI:.4e} Hz/m^2")
print(f"  f0 (30 zN)         {der.f0_reduced:.4e} m/s")
print(f"  axial zpf          {der.zpf_axial * 1e9:8.2f} nm")
print()

# the frequency gradient along the funnel, felt as a shift per axial micron
for z_um in (0.0, -5.0, -14.4):
    w = local_radial_frequency(p, z_um * 1e-6)
    print(f"  omega_x at z = {z_um:6.1f} um : shift "
          f"{(w - p.omega_x) / TWO_PI / 1e3:8.2f} kHz")
print()

# static axial response: force in, displacement out
for fz_zn in (1.2, 10.0, 30.0):
    z0 = equilibrium_displacement(p, 0.0, fz=fz_zn * 1e-21)
    print(f"  z0({fz_zn:5.1f} zN)      {z0 * 1e9:8.2f} nm")
print(f"  500 uV electrode -> {volt_to_force(500e-6) * 1e21:.2f} zN")
print()

# an axial force detunes the radial drive; this is the lever the
# amplification protocol pulls on
dm = detuning_per_force(p) * 1.2e-21
print(f"  detuning shift per 1.2 zN axial force: {dm / TWO_PI:.1f} Hz")
