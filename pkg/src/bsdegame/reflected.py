"""Reflected BSDE above an obstacle, optimal stopping of the linear problem, and the
mixed game with stopping."""
from __future__ import annotations

import numpy as np

from .affine_rep import GridConfig
from .bsde import (ControlPolicy, SolutionField, _warn_comparison, control_F,
                   dual_expectation_paths)
from .errors import ObstacleViolation
from .game import GameResult, game_sweep
from .generators import BSDEProblem
from .lattice import Lattice


def _require_obstacle(p: BSDEProblem, lat: Lattice) -> list:
    if p.obstacle is None:
        raise ObstacleViolation("problem has no obstacle")
    if len(p.obstacle) != lat.N + 1:
        raise ObstacleViolation(f"obstacle needs {lat.N + 1} levels, got {len(p.obstacle)}")
    bad = np.asarray(p.obstacle[-1]) > np.asarray(p.terminal)
    if bad.any():
        raise ObstacleViolation(f"S_T > xi at {int(bad.sum())} terminal node(s)")
    return [np.asarray(s, dtype=float) for s in p.obstacle]


def solve_rbsde(p: BSDEProblem, lat: Lattice) -> SolutionField:
    """``y_k = max(S_k, y~ + f(t_k, y~, z_k) dt)`` with reflection increments
    ``a_k = y_k - (y~ + f dt) >= 0``, positive only where ``y_k = S_k``."""
    S = _require_obstacle(p, lat)
    g = p.generator
    _warn_comparison(lat, g)
    y = np.asarray(p.terminal, dtype=float)
    ys, zs, da = [y], [], []
    stop = [None] * (lat.N + 1)
    stop[lat.N] = np.ones(lat.shape(lat.N), dtype=bool)
    for k in range(lat.N - 1, -1, -1):
        yt = lat.cond_expect(y)
        z = lat.extract_z(y)
        y_unc = yt + g(lat.time(k), yt, z) * lat.dt
        y = np.maximum(S[k], y_unc)
        # where the obstacle is inactive y is y_unc bit for bit, so the increment is exactly 0
        da.append(y - y_unc)
        stop[k] = S[k] >= y_unc
        ys.append(y)
        zs.append(z)
    for lst in (ys, zs, da):
        lst.reverse()
    return SolutionField(ys, zs, da, 0, stop)


def skorokhod_sum(sol: SolutionField, p: BSDEProblem) -> float:
    """``sum_k |sum_nodes (y_k - S_k) a_k|`` over levels; zero when reflection acts only on contact."""
    return float(sum(np.abs(np.sum((sol.y[k] - p.obstacle[k]) * sol.a[k]))
                     for k in range(len(sol.a))))


def linear_optimal_stopping(ctrl: ControlPolicy, p: BSDEProblem, lat: Lattice, t: int = 0,
                            c_rep: float | None = None):
    """Snell envelope of the Gamma-weighted linear problem.

    ``V_N = xi``, ``V_k = max(S_k, V~ + [c b1 V~ + c <b2, Z_k> + F_k] dt)``;
    the stop flag is set where the obstacle attains the max (ties stop).

    Returns
    -------
    value : ndarray
        Level-``t`` field.
    stop : list of ndarray
        Boolean stop flags on levels ``0..N`` (level ``N`` always stops,
        levels below ``t`` are all False).
    """
    S = _require_obstacle(p, lat)
    c = p.generator.c_rep if c_rep is None else c_rep
    lat.check_positivity(c)
    F = control_F(ctrl, p.generator, lat, c, t)
    v = np.asarray(p.terminal, dtype=float)
    stop = [np.zeros(lat.shape(k), dtype=bool) for k in range(lat.N + 1)]
    stop[lat.N][...] = True
    for k in range(lat.N - 1, t - 1, -1):
        vt = lat.cond_expect(v)
        z = lat.extract_z(v)
        b = ctrl.beta[k]
        cont = vt + (c * b[..., 0] * vt + c * np.sum(b[..., 1:] * z, axis=-1) + F[k]) * lat.dt
        stop[k] = S[k] >= cont
        v = np.where(stop[k], S[k], cont)
    return v, stop


def stopped_payoff(ctrl: ControlPolicy, p: BSDEProblem, lat: Lattice, stop: list, t: int = 0,
                   c_rep: float | None = None) -> np.ndarray:
    """Gamma-weighted stopped payoff under a stopping policy, by path enumeration."""
    _require_obstacle(p, lat)
    return dual_expectation_paths(ctrl, p, lat, t, c_rep, stop=stop)


def mixed_game_dpp(p: BSDEProblem, lat: Lattice, grids: GridConfig) -> GameResult:
    """Sup over (alpha, tau), inf over beta: ``y_k = max(S_k, y~ + dt max min [...])``."""
    S = _require_obstacle(p, lat)
    ys, zs, ctrl, stops = game_sweep(p, lat, grids, obstacle=S)
    primal = solve_rbsde(p, lat)
    gap = max(float(np.max(np.abs(a - b))) for a, b in zip(ys, primal.y))
    return GameResult(ys[0], ys, ctrl, grids, gap, primal, 0, zs, stop=stops)
