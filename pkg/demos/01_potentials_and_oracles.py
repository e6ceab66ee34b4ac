"""Layer and volume potentials checked against closed forms on a disk.

Run with ``python demos/01_potentials_and_oracles.py``.
"""

# %% Setup: a disk of radius 2 discretised with 256 nodes
import numpy as np

from photothermal import assemble_operators, make_curve, make_grid
from photothermal.boundary import jump_relation_check
from photothermal.kernels import green_low_freq_expansion, helmholtz_green
from photothermal.volume import volume_potential

R = 2.0
disk = make_curve("circle", {"radius": R}, 256)
ops = assemble_operators(disk)
t = disk.t

# %% The single layer maps constants to R ln R and cos(m t) to -(R / 2m) cos(m t)
print("S[1] error      ", np.max(np.abs(ops.S @ np.ones_like(t) - R * np.log(R))))
for m in (1, 3, 7):
    print(f"S[cos {m}t] error", np.max(np.abs(ops.S @ np.cos(m * t) + R / (2 * m) * np.cos(m * t))))

# %% The Neumann-Poincare adjoint maps constants to 1/2 and the equilibrium density is uniform
print("K*[1] error     ", np.max(np.abs(ops.K @ np.ones_like(t) - 0.5)))
print("phi0 error      ", np.max(np.abs(ops.phi0.values - 1 / (2 * np.pi * R))))

# %% The same operators on a non-convex kite satisfy the jump relations of S_D
kite_ops = assemble_operators(make_curve("kite", {}, 256))
kt = kite_ops.curve.t
rep = jump_relation_check(kite_ops.curve, 1 + np.cos(3 * kt), step=1e-3, ops=kite_ops)
print("kite jump residuals (exterior, interior):", rep.exterior, rep.interior)

# %% Newtonian potential of the indicator at the centre: R^2/2 ln R - R^2/4
grid = make_grid(disk, 0.02)
val = volume_potential(grid, np.ones(grid.size), np.zeros((1, 2)))[0]
print(f"N[1](0) = {val:.8f}  exact {R * R / 2 * np.log(R) - R * R / 4:.8f}  cells {grid.size}")

# %% The low-frequency expansion of the Helmholtz Green function
rng = np.random.default_rng(0)
x = rng.uniform(-1, 1, (5, 2))
y = x + 1e-3 * rng.normal(size=(5, 2))
for k in (1e-2, 1.0, 50.0):
    rel = np.abs(green_low_freq_expansion(x, y, k, J=1) - helmholtz_green(x, y, k)) / np.abs(helmholtz_green(x, y, k))
    print(f"k = {k:g}: max relative expansion error {rel.max():.2e}")
