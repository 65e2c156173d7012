"""Reading a 1.2 zN signal off a branch counter.

A 0.5 Hz axial force of a zeptonewton moves the particle by tens of
nanometers, an order of magnitude below the camera's localization noise.
Parking the radial drive inside its bistable window and adding a 50 Hz
tone whose detuning excursion almost reaches both folds turns the signal
into the deciding vote for which branch the system occupies.  The branch
jump moves z by microns, so the camera sees the signal after all.

The script computes the tone operating window, scans the tone amplitude
for the best enhancement, runs the three-stage protocol with camera noise,
and writes the full artifact bundle.

Run:  python3 demos/05_weak_force_amplification.py  (writes demo_out/vibres/)
"""

import math
import os
from dataclasses import replace

from funneltrap import (CameraConfig, config_from_dict, default_config,
                        enhancement_window, run_vibres_protocol,
                        tune_enhancement, write_bundle)

TWO_PI = 2.0 * math.pi
OUT = os.path.join("demo_out", "vibres")

raw = default_config()
rc = config_from_dict(raw)
p, d = rc.trap, rc.drive

win = enhancement_window(p, d)
print(f"signal: {d.fs_force * 1e21:.1f} zN at {d.omega_s / TWO_PI:.1f} Hz "
      f"(static pull {d.fs_force / (p.mass * p.omega_z**2) * 1e9:.0f} nm)")
print(f"tone operating window: {win.fe_low * 1e21:.0f} to "
      f"{win.fe_high * 1e21:.0f} zN "
      f"(center {win.center * 1e21:.0f} zN)")
print()

tuned = tune_enhancement(p, d, duration=20.0)
i_best = int(tuned.factors.argmax())
print("noiseless tone scan (20 s records):")
for i, fe in enumerate(tuned.fe_grid):
    mark = "  <- best" if i == i_best else ""
    inside = "in " if fe in tuned.window else "out"
    print(f"  fe = {fe * 1e21:7.1f} zN [{inside}]  "
          f"factor {tuned.factors[i]:8.1f}  "
          f"jumps {tuned.jump_counts[i]:5d}{mark}")
print()

# full protocol with shot-noise-limited camera localization
camera = CameraConfig(seed=rc.seed, **rc.camera)
d = replace(d, fe_force=tuned.best_fe)
report = run_vibres_protocol(p, d, camera, duration=60.0)
print("three-stage protocol, 60 s records, noisy camera:")
for s in "ace":
    print(f"  stage {s}: peak at {report.f_signal:.1f} Hz = "
          f"{report.peaks[s] * 1e9:9.2f} nm")
print(f"  enhancement e/a = {float(report.factor_e_vs_a):.1f}, "
      f"e/c = {float(report.factor_e_vs_c):.1f}, "
      f"{report.jump_count} branch jumps")

paths = write_bundle(OUT, report, raw, extra={"note": "demo run"})
print(f"wrote {len(paths)} artifacts to {OUT}/")
