"""Lipschitz drivers as max-min of affine maps, and concave drivers as inf of affine maps.

For a driver ``f`` that is ``C``-Lipschitz (Euclidean) on ``x = (y, z)``,

    f(t, x) = max_alpha min_{|beta| <= 1} [ F(t, beta, alpha) + C <beta, x> ],
    F(t, beta, alpha) = f(t, alpha) - C <beta, alpha>.

The maximizing player picks ``alpha`` from a box grid and the minimizing
player picks ``beta`` from lattice points of the closed unit ball.  In
adaptive mode the current ``x`` is added to the alpha grid and, for every
alpha, the exact ball minimizer ``(alpha - x) / |alpha - x|`` is added to the
beta grid, which makes the grid value reproduce ``f(t, x)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .generators import GeneratorSpec

BALL_TOL = 1e-12
_CHUNK = 1 << 22  # elements of the (states, alphas, betas) block per pass


@dataclass(frozen=True)
class GridConfig:
    """Compact control grids for the two players.

    Parameters
    ----------
    alpha_box : (lo, hi) or sequence of (lo, hi)
        Bounds of the alpha box, shared by all coordinates or per coordinate.
    alpha_step : float
        Spacing of the alpha grid.  Grid points are rounded to 12 decimals so
        that grids with commensurate steps are nested exactly.
    beta_resolution : int
        ``r``: beta grid is ``{j / r : j integer, |j| <= r}``.
    adaptive : bool
        Inject ``alpha = x`` (and the minimizing beta directions, unless
        ``inject_beta`` says otherwise).
    inject_beta : bool, optional
        Inject, for every alpha, the exact ball minimizer of the inner
        problem.  Defaults to ``adaptive``.
    alpha_points, beta_points : array_like, optional
        Explicit point sets that replace the box grid / ball lattice.
    """

    alpha_box: tuple = (-3.0, 3.0)
    alpha_step: float = 0.5
    beta_resolution: int = 4
    adaptive: bool = True
    inject_beta: bool | None = None
    alpha_points: tuple | None = None
    beta_points: tuple | None = None

    def __post_init__(self):
        if self.inject_beta is None:
            object.__setattr__(self, "inject_beta", self.adaptive)
        for name in ("alpha_points", "beta_points"):
            pts = getattr(self, name)
            if pts is not None:
                object.__setattr__(self, name, tuple(map(tuple, np.atleast_2d(pts).tolist())))
        if self.alpha_points is None and not self.alpha_step > 0:
            raise GridError("alpha_step must be positive")
        if self.beta_points is None and self.beta_resolution < 0:
            raise GridError("beta_resolution must be nonnegative")

    def alpha_grid(self, m: int) -> np.ndarray:
        if self.alpha_points is not None:
            pts = np.asarray(self.alpha_points, dtype=float)
            if pts.size == 0:
                raise GridError("empty alpha grid")
            if pts.shape[1] != m:
                raise GridError(f"alpha points have dimension {pts.shape[1]}, need {m}")
            return pts
        box = np.asarray(self.alpha_box, dtype=float)
        if box.ndim == 1:
            box = np.tile(box, (m, 1))
        if box.shape != (m, 2):
            raise GridError(f"alpha_box must give bounds for {m} coordinates")
        axes = []
        for lo, hi in box:
            n = int(np.floor((hi - lo) / self.alpha_step + 1e-9)) + 1
            if n < 1:
                raise GridError("empty alpha grid")
            axes.append(np.round(lo + self.alpha_step * np.arange(n), 12))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in mesh], axis=-1)

    def beta_grid(self, m: int) -> np.ndarray:
        if self.beta_points is not None:
            pts = np.asarray(self.beta_points, dtype=float)
            if pts.size == 0:
                raise GridError("empty beta grid")
            if pts.shape[1] != m:
                raise GridError(f"beta points have dimension {pts.shape[1]}, need {m}")
            if np.any(np.linalg.norm(pts, axis=1) > 1 + BALL_TOL):
                raise GridError("beta points must lie in the closed unit ball")
            return pts
        return ball_lattice(m, self.beta_resolution)


def ball_lattice(m: int, r: int) -> np.ndarray:
    """Points ``j / r`` of the closed unit ball in R^m, ``j`` integer, lexicographic."""
    if r == 0:
        return np.zeros((1, m))
    j = np.array(list(itertools.product(range(-r, r + 1), repeat=m)), dtype=float)
    j = j[np.sum(j * j, axis=1) <= r * r]
    return j / r


def big_F(g: GeneratorSpec, t: float, beta, alpha) -> np.ndarray:
    """``F(t, beta, alpha) = f(t, alpha) - C_rep <beta, alpha>`` for ``|beta| <= 1``."""
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(np.linalg.norm(beta, axis=-1) > 1 + BALL_TOL):
        raise ValueError("beta must lie in the closed unit ball")
    return g.at_point(t, alpha) - g.c_rep * _dot(beta, alpha)


def _dot(a, b):
    # fixed-order coordinate sum keeps results independent of array layout
    out = a[..., 0] * b[..., 0]
    for j in range(1, a.shape[-1]):
        out = out + a[..., j] * b[..., j]
    return out


def _norm(v):
    return np.sqrt(_dot(v, v))


@dataclass
class MaxMinScan:
    """Outcome of the grid max-min at a batch of states ``x`` (shape ``(M, m)``)."""

    value: np.ndarray        # max over alpha of min over beta
    alpha: np.ndarray        # maximizing alpha, (M, m)
    beta: np.ndarray         # minimizing beta at that alpha, (M, m)
    alpha_index: np.ndarray  # index into the alpha grid; len(grid) means injected x
    beta_index: np.ndarray   # index into the beta grid; len(grid) means injected direction
    upper: np.ndarray        # min over beta of max over alpha (diagnostic)


def maxmin_scan(g: GeneratorSpec, t: float, X, grids: GridConfig) -> MaxMinScan:
    """Vectorized grid max-min of ``F(t, beta, alpha) + C <beta, x>`` for states ``X``.

    The bracket is evaluated as ``f(t, alpha) + C <beta, x - alpha>``, which is
    the same quantity and vanishes exactly in the coupling term at ``alpha = x``.
    Ties go to the smallest grid index; injected points come after the grid.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M, m = X.shape
    A = grids.alpha_grid(m)
    Bg = grids.beta_grid(m)
    nA, nB = len(A), len(Bg)
    c = g.c_rep
    fA = g.at_point(t, A)

    best = np.full(M, -np.inf)
    best_i = np.zeros(M, dtype=int)
    upper = np.full((M, nB), -np.inf)
    step = max(1, _CHUNK // max(1, M * nB))
    for s in range(0, nA, step):
        a = A[s:s + step]
        diff = X[:, None, :] - a[None, :, :]                      # (M, a, m)
        dots = _dot(diff[:, :, None, :], Bg[None, None, :, :])    # (M, a, B)
        br = fA[None, s:s + step, None] + c * dots
        inner = br.min(axis=2)
        if grids.inject_beta:
            inner = np.minimum(inner, fA[None, s:s + step] - c * _norm(diff))
        upper = np.maximum(upper, br.max(axis=1))
        j = np.argmax(inner, axis=1)
        v = inner[np.arange(M), j]
        better = v > best
        best = np.where(better, v, best)
        best_i = np.where(better, s + j, best_i)

    alpha = A[best_i].copy()
    if grids.adaptive:
        # alpha = x: the coupling term is exactly zero for every beta
        v = g.at_point(t, X)
        better = v > best
        best = np.where(better, v, best)
        best_i = np.where(better, nA, best_i)
        alpha[better] = X[better]
        upper = np.maximum(upper, v[:, None])

    # minimizing beta at the chosen alpha
    diff = X - alpha
    dots = _dot(diff[:, None, :], Bg[None, :, :])
    bj = np.argmin(dots, axis=1)
    beta = Bg[bj].copy()
    beta_i = bj.copy()
    if grids.inject_beta:
        nv = _norm(diff)
        use = (-nv < dots[np.arange(M), bj]) & (nv > 0)
        beta[use] = -diff[use] / nv[use, None]
        beta_i[use] = nB
    return MaxMinScan(best, alpha, beta, best_i, beta_i, upper.min(axis=1))


def minmax_eval(g: GeneratorSpec, t: float, x, grids: GridConfig) -> float:
    """Grid value of ``max_alpha min_beta [F(t, beta, alpha) + C <beta, x>]`` at one state."""
    return float(maxmin_scan(g, t, np.asarray(x, dtype=float)[None, :], grids).value[0])


# -- concave drivers --------------------------------------------------------

def fenchel_transform(g: GeneratorSpec, t: float, beta, box: float = 8.0,
                      step: float = 0.25) -> float:
    """``sup_{(y,z)} [f(t,y,z) - beta_1 y - <beta_2, z>]`` on a box grid.

    Returns ``inf`` when the grid supremum keeps growing: the sup is computed on
    ``[-box, box]`` and ``[-2 box, 2 box]`` and the excess over ``f(t, 0, 0)`` is
    compared; a ratio above 1.5 is read as divergence.
    """
    beta = np.asarray(beta, dtype=float)
    m = beta.shape[0]
    base = float(g.at_point(t, np.zeros(m)))

    def sup(L):
        n = int(round(L / step))
        ax = step * np.arange(-n, n + 1)
        pts = np.stack([a.ravel() for a in np.meshgrid(*([ax] * m), indexing="ij")], axis=-1)
        return float(np.max(g.at_point(t, pts) - pts @ beta))

    g1 = sup(box) - base
    g2 = sup(2 * box) - base
    if g2 - g1 > 0.5 * max(g1, 0.0) + 1e-9 * (1.0 + abs(base)):
        return float("inf")
    return g1 + base


@dataclass(frozen=True)
class FenchelDual:
    """Finite sample of the effective domain of the conjugate, with its values."""

    points: np.ndarray   # (K, 1 + d)
    values: np.ndarray   # (K,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if len(pts) != len(vals):
            raise ValueError("points and values disagree in length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("dual values must be finite on stored points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def F_of(self, beta) -> float:
        hit = np.all(self.points == np.asarray(beta, dtype=float), axis=1)
        return float(self.values[hit][0]) if hit.any() else float("inf")


def fenchel_dual(g: GeneratorSpec, t: float, candidates, **sup_kw) -> FenchelDual:
    """Conjugate of a concave driver on candidate points, keeping the finite ones."""
    if not g.concave:
        raise ValueError(f"driver {g.name!r} is not flagged concave")
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    vals = np.array([fenchel_transform(g, t, b, **sup_kw) for b in cand])
    keep = np.isfinite(vals)
    if not keep.any():
        raise GridError("no candidate lies in the conjugate's domain")
    return FenchelDual(cand[keep], vals[keep])


def inf_representation_eval(dual: FenchelDual, t: float, y, z) -> np.ndarray:
    """``min_{beta in D} [F(beta) + beta_1 y + <beta_2, z>]``, vectorized over states."""
    if len(dual.points) == 0:
        raise GridError("empty dual domain grid")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.ndim == y.ndim:
        z = z[..., None]
    x = np.concatenate([y[..., None], z], axis=-1)
    vals = dual.values + _dot(x[..., None, :], dual.points)
    return vals.min(axis=-1)


def inf_representation_argmin(dual: FenchelDual, x) -> np.ndarray:
    """Index of the minimizing dual point for states ``x`` of shape ``(..., 1 + d)``."""
    vals = dual.values + _dot(np.asarray(x)[..., None, :], dual.points)
    return np.argmin(vals, axis=-1)
