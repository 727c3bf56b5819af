"""Game value of the BSDE: grid dynamic programming, open-loop enumeration, concave dual."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .affine_rep import FenchelDual, GridConfig, _dot, maxmin_scan
from .bsde import ControlPolicy, SolutionField, _horizon, solve_bsde
from .errors import BudgetExceeded, GridError, LatticeError
from .generators import BSDEProblem
from .lattice import Lattice

BRUTE_FORCE_BUDGET = 10 ** 6


@dataclass
class GameResult:
    """Sup-inf value on the lattice together with the grid controls that realize it."""

    value: np.ndarray
    y: list
    alpha: ControlPolicy
    grids: GridConfig
    gap_to_primal: float
    primal: SolutionField
    start: int = 0
    z: list = field(default_factory=list)
    infsup_gap: float | None = None
    stop: list | None = None

    @property
    def beta(self) -> list:
        return self.alpha.beta

    @property
    def root(self) -> float:
        return float(np.ravel(self.value)[0])

    def y_at(self, k: int) -> np.ndarray:
        return self.y[k - self.start]


def _states(yt, z):
    return np.concatenate([yt[..., None], z], axis=-1)


def game_sweep(p: BSDEProblem, lat: Lattice, grids: GridConfig, start: int = 0,
               end: int | None = None, terminal=None, obstacle: list | None = None,
               upper: bool = False):
    """Backward sweep ``y_k = y~ + dt max_alpha min_beta [...]`` (optionally reflected).

    With ``upper`` the order of the players is swapped (inf-sup). Returns the
    value fields, z fields, control fields and stop flags.
    """
    end = _horizon(lat, start, end)
    g = p.generator
    lat.check_positivity(g.c_rep)
    m = lat.d + 1
    y = np.asarray(p.terminal if terminal is None else terminal, dtype=float)
    if lat.level_of(y) != end:
        raise LatticeError(f"terminal field lives on level {lat.level_of(y)}, not {end}")
    ys, zs = [y], []
    alpha = [np.zeros(lat.shape(k) + (m,)) for k in range(lat.N)]
    beta = [np.zeros(lat.shape(k) + (m,)) for k in range(lat.N)]
    stops = None if obstacle is None else [None] * (lat.N + 1)
    if stops is not None:
        stops[end] = np.ones(lat.shape(end), dtype=bool)
    for k in range(end - 1, start - 1, -1):
        yt = lat.cond_expect(y)
        z = lat.extract_z(y)
        X = _states(yt, z).reshape(-1, m)
        scan = maxmin_scan(g, lat.time(k), X, grids)
        h = scan.upper if upper else scan.value
        y = yt + h.reshape(yt.shape) * lat.dt
        alpha[k] = scan.alpha.reshape(lat.shape(k) + (m,))
        beta[k] = scan.beta.reshape(lat.shape(k) + (m,))
        if obstacle is not None:
            S = obstacle[k]
            stops[k] = S >= y
            y = np.maximum(S, y)
        ys.append(y)
        zs.append(z)
    ys.reverse()
    zs.reverse()
    return ys, zs, ControlPolicy(alpha, beta), stops


def game_dpp_value(p: BSDEProblem, lat: Lattice, grids: GridConfig, start: int = 0,
                   end: int | None = None, terminal=None, infsup: bool = False) -> GameResult:
    """Sup-inf game value by dynamic programming over the control grids.

    The gap to the explicit BSDE solution is reported as the largest nodewise
    difference over the horizon.  ``infsup`` additionally runs the sweep with
    the players' order swapped and reports the largest nodewise difference
    between the two values; it is a diagnostic, not asserted to vanish.
    """
    ys, zs, ctrl, _ = game_sweep(p, lat, grids, start, end, terminal)
    primal = solve_bsde(p, lat, start, end, terminal)
    gap = max(float(np.max(np.abs(a - b))) for a, b in zip(ys, primal.y))
    res = GameResult(ys[0], ys, ctrl, grids, gap, primal, start, zs)
    if infsup:
        up, *_ = game_sweep(p, lat, grids, start, end, terminal, upper=True)
        res.infsup_gap = max(float(np.max(u - l)) for u, l in zip(up, ys))
    return res


def saddle_violation(res: GameResult, p: BSDEProblem, lat: Lattice) -> float:
    """Largest amount by which some beta-grid point undercuts the reported beta.

    At every scanned node the bracket ``f(alpha) + C <beta, x - alpha>`` is
    evaluated at the reported alpha for all grid betas; a positive return
    means the reported beta was not an inner minimizer.
    """
    g = p.generator
    m = lat.d + 1
    Bg = res.grids.beta_grid(m)
    worst = 0.0
    for k in range(res.start, res.start + len(res.y) - 1):
        yt = lat.cond_expect(res.y_at(k + 1)) if res.stop is None else None
        if yt is None:
            yt = lat.cond_expect(res.y_at(k + 1))
        X = _states(yt, res.z[k - res.start]).reshape(-1, m)
        a = res.alpha.alpha[k].reshape(-1, m)
        b = res.alpha.beta[k].reshape(-1, m)
        diff = X - a
        fa = g.at_point(lat.time(k), a)
        chosen = fa + g.c_rep * _dot(diff, b)
        others = fa[:, None] + g.c_rep * _dot(diff[:, None, :], Bg[None, :, :])
        worst = max(worst, float(np.max(chosen - others.min(axis=1))))
    return worst


# -- open-loop enumeration -----------------------------------------------------

def _tree(lat: Lattice, L: int):
    """Outcome sequences of length ``L`` and the tree-node id visited at each depth."""
    n_out = lat.n_outcomes
    steps = np.array(list(itertools.product(range(n_out), repeat=L)), dtype=int).reshape(-1, L)
    offsets = np.cumsum([0] + [n_out ** j for j in range(L)])
    node = np.zeros(steps.shape, dtype=int)
    prefix = np.zeros(len(steps), dtype=int)
    for j in range(L):
        node[:, j] = offsets[j] + prefix
        prefix = prefix * n_out + steps[:, j]
    return steps, node, int(offsets[-1])


def brute_force_count(lat: Lattice, grids: GridConfig, t: int = 0) -> int:
    """Number of (alpha-policy, beta-policy) pairs enumerated from each level-``t`` node."""
    m = lat.d + 1
    n_tree = sum(lat.n_outcomes ** j for j in range(lat.N - t))
    return (len(grids.alpha_grid(m)) * len(grids.beta_grid(m))) ** n_tree


def open_loop_bruteforce(p: BSDEProblem, lat: Lattice, grids: GridConfig, t: int = 0,
                         budget: int = BRUTE_FORCE_BUDGET) -> np.ndarray:
    """Exact sup over alpha of inf over beta of the Gamma-weighted payoff, by enumeration.

    Controls are adapted to the full path history (one choice per node of the
    non-recombining tree below each level-``t`` node), not node feedback.
    Only the explicit grid points are used; no adaptive injection.
    """
    if lat.N > 3:
        raise BudgetExceeded(f"brute force needs N <= 3, got N={lat.N}")
    count = brute_force_count(lat, grids, t)
    total = count * lat.n_nodes(t)
    if total > budget:
        raise BudgetExceeded(
            f"open-loop enumeration needs {total} policy pairs "
            f"(|A|*|B|)^tree_nodes per start node x {lat.n_nodes(t)} nodes > budget {budget}")
    g, c, m = p.generator, p.generator.c_rep, lat.d + 1
    lat.check_positivity(c)
    A, B = grids.alpha_grid(m), grids.beta_grid(m)
    L = lat.N - t
    steps, tnode, n_tree = _tree(lat, L)
    a_pol = np.array(list(itertools.product(range(len(A)), repeat=n_tree)), dtype=int)
    b_pol = np.array(list(itertools.product(range(len(B)), repeat=n_tree)), dtype=int)
    dB = lat.signs * lat.sqrt_dt
    fac = 1.0 + c * B[:, :1] * lat.dt + c * (B[:, 1:] @ dB.T)      # (|B|, 2**d)
    out = np.zeros(lat.shape(t))
    for node in itertools.product(range(t + 1), repeat=lat.d):
        value = np.zeros((len(a_pol), len(b_pol)))
        for path in range(len(steps)):
            gam = np.ones(len(b_pol))
            ups = np.array(node)
            for j in range(L):
                k = t + j
                n = tnode[path, j]
                Fk = g.at_point(lat.time(k), A)[:, None] - c * (A @ B.T)    # (|A|, |B|)
                value += gam[None, :] * Fk[np.ix_(a_pol[:, n], b_pol[:, n])] * lat.dt
                e = steps[path, j]
                gam = gam * fac[b_pol[:, n], e]
                ups = ups + lat.offsets[e]
            value += gam[None, :] * p.terminal[tuple(ups)]
        value /= len(steps)
        out[node] = value.min(axis=1).max()
    return out


# -- concave drivers -----------------------------------------------------------

@dataclass
class ConcaveValue:
    """Inf-representation value with its minimizing dual controls and conjugate values."""

    solution: SolutionField
    beta: list
    F: list

    @property
    def root(self) -> float:
        return self.solution.root


def concave_inf_value(p: BSDEProblem, lat: Lattice, dual: FenchelDual, start: int = 0,
                      end: int | None = None) -> ConcaveValue:
    """Backward DPP ``y_k = y~ + dt min_{beta in D} [F(beta) + b1 y~ + <b2, z_k>]``.

    The dual coefficients are not scaled by any Lipschitz constant here.
    """
    if len(dual.points) == 0:
        raise GridError("empty dual domain grid")
    if not p.generator.concave:
        raise ValueError(f"driver {p.generator.name!r} is not flagged concave")
    end = _horizon(lat, start, end)
    m = lat.d + 1
    y = np.asarray(p.terminal, dtype=float)
    ys, zs = [y], []
    beta = [np.zeros(lat.shape(k) + (m,)) for k in range(lat.N)]
    F = [np.zeros(lat.shape(k)) for k in range(lat.N)]
    for k in range(end - 1, start - 1, -1):
        yt = lat.cond_expect(y)
        z = lat.extract_z(y)
        X = _states(yt, z)
        vals = dual.values + _dot(X[..., None, :], dual.points)
        j = np.argmin(vals, axis=-1)
        beta[k] = dual.points[j]
        F[k] = dual.values[j]
        y = yt + np.take_along_axis(vals, j[..., None], axis=-1)[..., 0] * lat.dt
        ys.append(y)
        zs.append(z)
    ys.reverse()
    zs.reverse()
    sol = SolutionField(ys, zs, [np.zeros(lat.shape(k)) for k in range(start, end)], start)
    return ConcaveValue(sol, beta, F)
