"""A recombining random-walk lattice and the martingale representation on it.

Every node has 2^d equally likely successors, B moves by +-sqrt(dt) per
coordinate, and a field one level up splits into a conditional mean and a
"z" slope per coordinate.
"""
import numpy as np

from bsdegame import build

lat = build(T=1.0, N=6, d=1)
print(f"dt = {lat.dt}, levels = {lat.N + 1}, nodes at the last level = {lat.n_nodes(lat.N)}")

xi = lat.brownian(lat.N)[..., 0] ** 2
print("B_T^2 on the terminal nodes:", np.round(xi, 4))

# one backward step: conditional mean and slope
mean = lat.cond_expect(xi)
z = lat.extract_z(xi)
print("E[B_T^2 | level N-1]:", np.round(mean, 4))
print("z = E[xi dB]/dt      :", np.round(z[..., 0], 4), "(equals 2 B_{N-1})")

# the conditional mean collapses to E[B_T^2] = T at the root
field = xi
while lat.level_of(field) > 0:
    field = lat.cond_expect(field)
print("E[B_T^2] =", field[0], "vs T =", lat.T)

# in d=1 one step is fully recovered from (mean, z)
recon = mean[None, :] + lat.signs[:, :1] * lat.sqrt_dt * z[..., 0][None, :]
print("max reconstruction error:", np.max(np.abs(recon - lat.successors(xi))))
