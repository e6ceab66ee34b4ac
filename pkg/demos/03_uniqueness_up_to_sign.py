"""What phaseless boundary temperature data can and cannot distinguish.

Run with ``python demos/03_uniqueness_up_to_sign.py``.
"""

# %% Sources f and -f heat the body identically, so their data agree exactly
import numpy as np

from photothermal import HeatSetup, make_curve, make_grid, make_source
from photothermal.lab import (PolyField, SourcePair, compare_measurements, fourier_direction_test,
                              greens_identity_check, navier_vanishing_test, verify_moment_identity,
                              verify_trace_identity)

disk = make_curve("circle", {"radius": 2.0}, 128)
grid = make_grid(disk, 0.1)
setup = HeatSetup(disk, grid)
f = make_source(grid, {"kind": "gaussian", "center": (0.3, -0.2), "width": 0.4})
om = np.logspace(-4, -2, 4)

flip = SourcePair(f, -f, "sign-flip")
print("sign flip, max data difference:", compare_measurements(flip, setup, om).max_difference)
print("sign flip, moment identity residual:", verify_moment_identity(flip))
tr = verify_trace_identity(flip)
print(f"sign flip, trace identity holds with sign {tr.sign:+d} (residual {tr.residual:.1e})")

# %% A genuinely different source produces different data
g = make_source(grid, {"kind": "gaussian", "center": (-0.5, 0.6), "width": 0.4})
other = SourcePair(f, g, "generic")
print("different source, max data difference:", compare_measurements(other, setup, om).max_difference)

# %% The biharmonic Green identity: with w = (|x|^2 - R^2)^2 and v = 1 both sides equal 256 pi
rep = greens_identity_check(PolyField.radial([16.0, -8.0, 1.0]), PolyField.constant(1.0), disk)
print(f"volume side {rep.volume / np.pi:.10f} pi, boundary side {rep.boundary / np.pi:.10f} pi")

# %% A source f = Bilap(phi) with phi compactly supported has vanishing Navier data,
# so both sides of the identity vanish for every biharmonic test function
for name, curve in (("disk", disk), ("kite", make_curve("kite", {}, 256))):
    print(f"{name}: Navier vanishing residual {navier_vanishing_test(curve).residual:.2e}")

# %% Sources that do not vary along x2: the Fourier transform on the kite factorises
kite = make_curve("kite", {}, 256)
rep = fourier_direction_test(lambda x: np.exp(-np.atleast_2d(x)[:, 0] ** 2), kite)
print("planar vs factored relative differences:", rep.relative)
