import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from funneltrap import (
    DriveConfig,
    TrapParams,
    bistable_region,
    derive_params,
)
from funneltrap.trap import ATOMIC_MASS

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="session")
def trap():
    # the trap actually measured: 40 u particle, 1.14/1.15 MHz radial,
    # 100 kHz axial, 1.81 mm funnel length, 250 Hz damping
    return TrapParams(
        mass=40 * ATOMIC_MASS,
        omega_x=TWO_PI * 1.14e6,
        omega_y=TWO_PI * 1.15e6,
        omega_z=TWO_PI * 1.0e5,
        funnel_length=1.81e-3,
        damping=TWO_PI * 250.0,
    )


@pytest.fixture(scope="session")
def strong_drive(trap):
    # 30 zN radial drive at the center of its own bistable window
    der = derive_params(trap, DriveConfig(f0_force=30e-21,
                                          omega_0=trap.omega_x))
    reg = bistable_region(der.f0_reduced, trap.damping, der.xi)
    return DriveConfig(f0_force=30e-21, omega_0=trap.omega_x + reg.center)


@pytest.fixture(scope="session")
def derived(trap, strong_drive):
    return derive_params(trap, strong_drive)
