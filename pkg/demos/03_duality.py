"""Linear BSDEs driven by a control pair and their dual weighted expectation.

Fixing (alpha, beta) turns the driver into a linear one.  Its solution equals
E[Gamma xi + sum Gamma F dt], where Gamma is a positive density process built
from beta.  On the lattice the two agree to rounding.
"""
import numpy as np

from bsdegame import (BSDEProblem, ControlPolicy, build, catalog, dual_expectation,
                      dual_expectation_paths, gamma_path, solve_linear_bsde, terminal_field)

lat = build(1.0, 8, 1)
p = BSDEProblem(catalog("mu_norm", mu=1.0), terminal_field(lat, "bt_squared"))
rng = np.random.default_rng(1)

for i in range(3):
    ctrl = ControlPolicy.random(lat, rng)
    lin = solve_linear_bsde(ctrl, p, lat).root
    dual = dual_expectation(ctrl, p, lat)[0]
    paths = dual_expectation_paths(ctrl, p, lat)[0]
    print(f"policy {i}: linear {lin:.15f}  dual {dual:.15f}  paths {paths:.15f}")

# Gamma stays positive and has unit mean when beta_1 = 0
ctrl = ControlPolicy.constant(lat, beta=[0.0, 0.9])
gam = gamma_path(ctrl, lat, 0, p.generator.c_rep)
print("E[Gamma_T] =", gam.expectation(lat.N).ravel()[0])
