"""Reflected BSDEs and the game with stopping.

Adding an obstacle S lets the maximizer also stop and collect S.  The
reflected solution stays above S, pushes only on contact, and equals the value
of the mixed control-and-stopping game.
"""
import numpy as np

from bsdegame import (BSDEProblem, ControlPolicy, GridConfig, build, catalog,
                      linear_optimal_stopping, mixed_game_dpp, obstacle_fields, skorokhod_sum,
                      solve_rbsde, stopped_payoff, terminal_field)

# American put on Brownian motion with discounting f = -r y, payoff (1 - B)^+
lat = build(1.0, 16, 1)
p = BSDEProblem(catalog("affine", a=0.0, b1=-0.2, b2=0.0), terminal_field(lat, "put", K=1.0),
                obstacle_fields(lat, "put_payoff", K=1.0))

sol = solve_rbsde(p, lat)
game = mixed_game_dpp(p, lat, GridConfig())
print(f"reflected root {sol.root:.12f}, mixed game root {game.root:.12f}")
print(f"gap {game.gap_to_primal:.1e}, Skorokhod sum {skorokhod_sum(sol, p)}, "
      f"total push E[a_T] {sol.expected_a_total(lat):.4f}")
print("stopping region size per level:", [int(s.sum()) for s in sol.stop])

# optimal stopping under a fixed random control, checked by path enumeration
lat = build(1.0, 8, 1)
p = BSDEProblem(catalog("mu_norm", mu=1.0), terminal_field(lat, "put", K=1.0),
                obstacle_fields(lat, "put_payoff", K=1.0))
ctrl = ControlPolicy.random(lat, np.random.default_rng(2))
v, stop = linear_optimal_stopping(ctrl, p, lat)
print(f"Snell value {v[0]:.12f}, stopped payoff by paths {stopped_payoff(ctrl, p, lat, stop)[0]:.12f}")
