"""Concave drivers as an infimum over a dual domain.

For concave f, the conjugate F(b) = sup [f(x) - <b, x>] recovers
f(x) = min_b [F(b) + <b, x>].  The resulting control problem has one player
only and approaches the BSDE solution as the dual grid is refined.
"""
import numpy as np

from bsdegame import BSDEProblem, build, catalog, fenchel_dual, solve_bsde, terminal_field
from bsdegame.game import concave_inf_value

lat = build(1.0, 16, 1)
g = catalog("neg_mu_abs_z", mu=1.0)
p = BSDEProblem(g, terminal_field(lat, "bt"))
print("primal root (closed form -T):", solve_bsde(p, lat).root)

for step in (0.5, 0.3, 0.1):
    axis = np.round(-1.2 + step * np.arange(int(round(2.4 / step)) + 1), 12)
    cand = np.stack([np.zeros_like(axis), axis], axis=-1)
    dual = fenchel_dual(g, 0.0, cand)
    cv = concave_inf_value(p, lat, dual)
    print(f"dual step {step}: {len(dual.points)} finite points, root {cv.root:.6f}")
