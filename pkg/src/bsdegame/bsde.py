"""Backward solvers on the lattice and the Gamma-weighted dual of the linear BSDE.

All schemes are predictor-explicit: with ``y~ = E[y_{k+1} | F_k]`` and
``z_k = E[y_{k+1} dB | F_k] / dt``,

    y_k = y~ + f(t_k, y~, z_k) dt.

For the controlled linear driver this one-step map is
``Y_k = E[Y_{k+1} (1 + C b1 dt + C <b2, dB>)] + F_k dt``, i.e. exactly the
adjoint of the Gamma recursion, so the dual formula holds without a
discretization gap.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .affine_rep import BALL_TOL, big_F
from .errors import ComparisonWarning, LatticeError, PositivityViolation
from .generators import BSDEProblem, GeneratorSpec
from .lattice import Lattice


@dataclass
class SolutionField:
    """``y`` on levels ``start..end``, ``z`` and ``a`` increments on ``start..end-1``.

    ``a[k]`` is the reflection increment pushed in at level ``k`` (zero for
    plain BSDEs); ``stop[k]`` flags nodes where the obstacle is active, when
    an obstacle was present.
    """

    y: list
    z: list
    a: list
    start: int = 0
    stop: list | None = None

    @property
    def end(self) -> int:
        return self.start + len(self.y) - 1

    def y_at(self, k: int) -> np.ndarray:
        return self.y[k - self.start]

    def z_at(self, k: int) -> np.ndarray:
        return self.z[k - self.start]

    @property
    def root(self) -> float:
        return float(np.ravel(self.y[0])[0])

    def expected_a_total(self, lat: Lattice) -> float:
        """``E[a_end - a_start]`` from the per-level increments."""
        return float(sum(np.sum(lat.node_probs(k) * ak)
                         for k, ak in enumerate(self.a, start=self.start)))


@dataclass
class ControlPolicy:
    """Node-feedback controls on levels ``0..N-1``; each entry has shape ``shape(k) + (d+1,)``."""

    alpha: list
    beta: list

    def __post_init__(self):
        for k, b in enumerate(self.beta):
            if np.any(np.sqrt(np.sum(np.asarray(b) ** 2, axis=-1)) > 1 + BALL_TOL):
                raise ValueError(f"beta leaves the closed unit ball at level {k}")

    @classmethod
    def constant(cls, lat: Lattice, alpha=None, beta=None) -> "ControlPolicy":
        m = lat.d + 1
        alpha = np.zeros(m) if alpha is None else np.asarray(alpha, dtype=float)
        beta = np.zeros(m) if beta is None else np.asarray(beta, dtype=float)
        return cls([np.broadcast_to(alpha, lat.shape(k) + (m,)).copy() for k in range(lat.N)],
                   [np.broadcast_to(beta, lat.shape(k) + (m,)).copy() for k in range(lat.N)])

    @classmethod
    def random(cls, lat: Lattice, rng, alpha_scale: float = 2.0) -> "ControlPolicy":
        """Uniform alpha in a box and beta uniform in the unit ball, node by node."""
        m = lat.d + 1
        alpha, beta = [], []
        for k in range(lat.N):
            shp = lat.shape(k) + (m,)
            alpha.append(rng.uniform(-alpha_scale, alpha_scale, size=shp))
            g = rng.normal(size=shp)
            g /= np.linalg.norm(g, axis=-1, keepdims=True)
            r = rng.uniform(size=lat.shape(k) + (1,)) ** (1.0 / m)
            beta.append(g * r)
        return cls(alpha, beta)


def _warn_comparison(lat: Lattice, g: GeneratorSpec):
    if lat.comparison_margin(g.c_l1) > 1.0:
        warnings.warn(
            f"C_l1*(dt+sqrt(d*dt)) = {lat.comparison_margin(g.c_l1):.4g} > 1: the explicit "
            f"scheme is not monotone for {g.name!r}; comparison may fail",
            ComparisonWarning, stacklevel=3)


def _horizon(lat: Lattice, start: int, end: int | None) -> int:
    end = lat.N if end is None else end
    if not 0 <= start <= end <= lat.N:
        raise LatticeError(f"need 0 <= start <= end <= N, got start={start}, end={end}")
    return end


def solve_bsde(p: BSDEProblem, lat: Lattice, start: int = 0, end: int | None = None,
               terminal: np.ndarray | None = None) -> SolutionField:
    """Explicit backward recursion for ``dy = -f(t, y, z) dt + <z, dB>``.

    ``terminal`` (defaulting to ``p.terminal``) lives on level ``end``; the
    obstacle of ``p`` is ignored here, see :func:`bsdegame.reflected.solve_rbsde`.
    """
    end = _horizon(lat, start, end)
    g = p.generator
    _warn_comparison(lat, g)
    y = np.asarray(p.terminal if terminal is None else terminal, dtype=float)
    if lat.level_of(y) != end:
        raise LatticeError(f"terminal field lives on level {lat.level_of(y)}, not {end}")
    ys, zs = [y], []
    for k in range(end - 1, start - 1, -1):
        yt = lat.cond_expect(y)
        z = lat.extract_z(y)
        y = yt + g(lat.time(k), yt, z) * lat.dt
        ys.append(y)
        zs.append(z)
    ys.reverse()
    zs.reverse()
    return SolutionField(ys, zs, [np.zeros(lat.shape(k)) for k in range(start, end)], start)


def linear_solve(lat: Lattice, beta: list, F: list, terminal, scale: float,
                 start: int = 0, end: int | None = None) -> SolutionField:
    """Backward recursion ``Y_k = Y~ + [c b1 Y~ + c <b2, Z_k> + F_k] dt``.

    ``beta[k]`` and ``F[k]`` are indexed by absolute level.
    """
    end = _horizon(lat, start, end)
    y = np.asarray(terminal, dtype=float)
    ys, zs = [y], []
    for k in range(end - 1, start - 1, -1):
        yt = lat.cond_expect(y)
        z = lat.extract_z(y)
        b = beta[k]
        drift = scale * b[..., 0] * yt + scale * np.sum(b[..., 1:] * z, axis=-1) + F[k]
        y = yt + drift * lat.dt
        ys.append(y)
        zs.append(z)
    ys.reverse()
    zs.reverse()
    return SolutionField(ys, zs, [np.zeros(lat.shape(k)) for k in range(start, end)], start)


def control_F(ctrl: ControlPolicy, g: GeneratorSpec, lat: Lattice, c_rep: float | None = None,
              start: int = 0, end: int | None = None) -> list:
    """``F(t_k, beta, alpha)`` node fields on levels ``0..N-1`` (None outside the horizon)."""
    end = lat.N if end is None else end
    gc = g if c_rep is None else g.with_c_rep(c_rep)
    return [big_F(gc, lat.time(k), ctrl.beta[k], ctrl.alpha[k]) if start <= k < end else None
            for k in range(lat.N)]


def solve_linear_bsde(ctrl: ControlPolicy, p: BSDEProblem, lat: Lattice,
                      c_rep: float | None = None, start: int = 0) -> SolutionField:
    """Controlled linear BSDE with driver ``C b1 Y + C <b2, Z> + F(t, beta, alpha)``."""
    c = p.generator.c_rep if c_rep is None else c_rep
    F = control_F(ctrl, p.generator, lat, c, start)
    return linear_solve(lat, ctrl.beta, F, p.terminal, c, start)


@dataclass
class GammaField:
    """Stochastic exponential ``Gamma_{t,s}`` started at level ``start``.

    Gamma is path dependent on the recombining lattice, so it is stored as
    one-step multipliers: ``factors[k]`` has shape ``shape(k) + (2**d,)`` and
    holds ``1 + c b1 dt + c <b2, dB_e>`` for every outcome ``e``.
    """

    lat: Lattice
    start: int
    factors: list = field(repr=False)

    def factor_at(self, k: int) -> np.ndarray:
        return self.factors[k - self.start]

    def measure(self, s: int) -> np.ndarray:
        """``E[Gamma_{start,s} 1{node at s} | node at start]``.

        Shape ``shape(start) + shape(s)``; the leading axes index the start node.
        """
        return list(self.measures(s))[-1]

    def measures(self, end: int | None = None):
        """Yield the Gamma-weighted forward measures for levels ``start..end``."""
        lat, d = self.lat, self.lat.d
        end = lat.N if end is None else end
        ns = lat.n_nodes(self.start)
        m = np.eye(ns).reshape(lat.shape(self.start) + lat.shape(self.start))
        yield m
        lead = (slice(None),) * d
        for k in range(self.start, end):
            fac = self.factor_at(k) / lat.n_outcomes
            new = np.zeros(lat.shape(self.start) + lat.shape(k + 1))
            for e, off in enumerate(lat.offsets):
                idx = lead + tuple(slice(o, o + k + 1) for o in off)
                new[idx] += m * fac[..., e]
            m = new
            yield m

    def expectation(self, s: int) -> np.ndarray:
        """``E[Gamma_{start,s} | node at start]``."""
        m = self.measure(s)
        return m.reshape(m.shape[:self.lat.d] + (-1,)).sum(axis=-1)


def gamma_path(beta: ControlPolicy | list, lat: Lattice, start: int = 0,
               c_rep: float = 1.0, guard: bool = True) -> GammaField:
    """One-step multipliers of ``dGamma = Gamma [c b1 ds + c <b2, dB>]``, ``Gamma_{t,t} = 1``.

    With ``guard`` the lattice-level condition ``c (sqrt(d dt) + dt) < 1`` is
    enforced, which keeps every factor positive for any beta in the unit ball.
    Without it (unconstrained beta) the factors themselves are checked.
    """
    if isinstance(beta, ControlPolicy):
        beta = beta.beta
    if guard:
        lat.check_positivity(c_rep)
    factors = []
    for k in range(start, lat.N):
        b = np.asarray(beta[k])
        fac = 1.0 + c_rep * b[..., 0:1] * lat.dt \
            + c_rep * lat.sqrt_dt * (b[..., 1:] @ lat.signs.T)
        if np.any(fac <= 0):
            raise PositivityViolation(f"non-positive Gamma factor at level {k}")
        factors.append(fac)
    return GammaField(lat, start, factors)


def weighted_expectation(gamma: GammaField, F: list, terminal) -> np.ndarray:
    """``E[sum_{k>=t} Gamma_{t,k} F_k dt + Gamma_{t,N} xi | F_t]`` by forward measures."""
    lat, t, d = gamma.lat, gamma.start, gamma.lat.d
    out = np.zeros(lat.shape(t))
    for k, m in enumerate(gamma.measures(), start=t):
        w = F[k] * lat.dt if k < lat.N else np.asarray(terminal, dtype=float)
        axes = tuple(range(d, 2 * d))
        out = out + np.tensordot(m, w, axes=(axes, tuple(range(d))))
    return out


def dual_expectation(ctrl: ControlPolicy, p: BSDEProblem, lat: Lattice, t: int = 0,
                     c_rep: float | None = None) -> np.ndarray:
    """Gamma-weighted dual value at level ``t``.

    Propagates the Gamma-weighted transition measure forward from every
    level-``t`` node, which is a different route from the backward linear
    solve it is compared with.
    """
    c = p.generator.c_rep if c_rep is None else c_rep
    gamma = gamma_path(ctrl, lat, t, c)
    F = control_F(ctrl, p.generator, lat, c, t)
    return weighted_expectation(gamma, F, p.terminal)


def phi_expectation(beta: list, F: list, terminal, lat: Lattice, t: int = 0,
                    scale: float = 1.0) -> np.ndarray:
    """Dual value with unconstrained beta and given ``F`` fields (concave-driver form,
    where the exponential is ``dDelta = Delta [b1 ds + <b2, dB>]``)."""
    gamma = gamma_path(beta, lat, t, scale, guard=False)
    return weighted_expectation(gamma, F, terminal)


# -- path enumeration oracles -------------------------------------------------

def path_steps(lat: Lattice, length: int) -> np.ndarray:
    """All outcome sequences of a given length, shape ``(2**(d*length), length)``."""
    return np.array(list(itertools.product(range(lat.n_outcomes), repeat=length)),
                    dtype=int).reshape(-1, length)


def _paths_from(lat: Lattice, t: int, node, steps):
    ups = lat.offsets[steps]                       # (P, L, d)
    pos = np.concatenate([np.zeros_like(ups[:, :1]), np.cumsum(ups, axis=1)], axis=1)
    return np.asarray(node)[None, None, :] + pos   # up-counts at levels t..N


def dual_expectation_paths(ctrl: ControlPolicy, p: BSDEProblem, lat: Lattice, t: int = 0,
                           c_rep: float | None = None, stop: list | None = None) -> np.ndarray:
    """Brute-force average of the Gamma-weighted payoff over every path from level ``t``.

    With ``stop`` (boolean fields on levels ``0..N``) the payoff is stopped at
    the first flagged node ``tau``: ``sum_{k<tau} Gamma F dt + Gamma_tau S_tau``
    (``xi`` when ``tau = N``).  Independent of both backward and forward sweeps.
    """
    c = p.generator.c_rep if c_rep is None else c_rep
    g, L = p.generator, lat.N - t
    if L > 12 // lat.d + 4:
        raise ValueError("path enumeration is limited to small lattices")
    steps = path_steps(lat, L)
    out = np.zeros(lat.shape(t))
    for node in itertools.product(range(t + 1), repeat=lat.d):
        ups = _paths_from(lat, t, node, steps)
        P = len(steps)
        gam = np.ones(P)
        acc = np.zeros(P)
        done = np.zeros(P, dtype=bool)
        for j in range(L + 1):
            k = t + j
            idx = tuple(ups[:, j, i] for i in range(lat.d))
            if stop is not None:
                here = np.asarray(stop[k])[idx] & ~done
                payoff = p.obstacle[k][idx] if k < lat.N else p.terminal[idx]
                acc = np.where(here, acc + gam * payoff, acc)
                done |= here
            if k == lat.N:
                acc = np.where(done, acc, acc + gam * p.terminal[idx])
                break
            a = ctrl.alpha[k][idx]
            b = ctrl.beta[k][idx]
            Fk = g.at_point(lat.time(k), a) - c * np.sum(b * a, axis=-1)
            acc = np.where(done, acc, acc + gam * Fk * lat.dt)
            dB = lat.signs[steps[:, j]] * lat.sqrt_dt
            gam = gam * (1.0 + c * b[:, 0] * lat.dt + c * np.sum(b[:, 1:] * dB, axis=-1))
        out[node] = acc.mean()
    return out
