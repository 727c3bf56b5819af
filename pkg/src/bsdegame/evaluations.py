"""Generator-induced dynamic evaluations ``E^f_{s,t}[X] = Y_s`` and checks of their
consistency axioms and of the ``g_mu`` domination hypotheses."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .affine_rep import GridConfig
from .bsde import solve_bsde
from .errors import LatticeError
from .game import game_dpp_value
from .generators import BSDEProblem, GeneratorSpec, catalog, estimate_lipschitz
from .lattice import Lattice


@dataclass(frozen=True)
class EvaluationOperator:
    generator: GeneratorSpec
    lattice: Lattice


def evaluate(op: EvaluationOperator, s: int, t: int, X) -> np.ndarray:
    """``E_{s,t}[X]`` for a level-``t`` field ``X``; returns the level-``s`` field."""
    lat = op.lattice
    if not 0 <= s <= t <= lat.N:
        raise LatticeError(f"need 0 <= s <= t <= N, got s={s}, t={t}")
    X = np.asarray(X, dtype=float)
    if lat.level_of(X) != t:
        raise LatticeError(f"X lives on level {lat.level_of(X)}, not {t}")
    sol = solve_bsde(BSDEProblem(op.generator, X), lat, start=s, end=t, terminal=X)
    return sol.y_at(s)


def _random_field(rng, lat, k, scale=2.0):
    return rng.normal(scale=scale, size=lat.shape(k))


def _levels(rng, N, n):
    return sorted(int(v) for v in rng.integers(0, N + 1, size=n))


def check_axioms(op: EvaluationOperator, samples: int = 50, seed: int = 0) -> dict:
    """Largest sampled violation of monotonicity (A1), identity (A2), recursivity
    (A3) and locality (A4).

    For A4 the events are unions of level-``s`` nodes.  Locality is tested by
    replacing ``X`` outside the cone of each level-``s`` node with unrelated
    values: the evaluation at a node in ``A`` must not move, and at a node
    outside ``A`` the indicator kills both sides.
    """
    lat = op.lattice
    rng = np.random.default_rng(seed)
    worst = {"A1": 0.0, "A2": 0.0, "A3": 0.0, "A4": 0.0}
    for _ in range(samples):
        r, s, t = _levels(rng, lat.N, 3)
        X1 = _random_field(rng, lat, t)
        X2 = X1 - np.abs(_random_field(rng, lat, t))
        e1 = evaluate(op, s, t, X1)
        worst["A1"] = max(worst["A1"], float(np.max(evaluate(op, s, t, X2) - e1)))
        worst["A2"] = max(worst["A2"], float(np.max(np.abs(evaluate(op, t, t, X1) - X1))))
        worst["A3"] = max(worst["A3"], float(np.max(np.abs(
            evaluate(op, r, s, e1) - evaluate(op, r, t, X1)))))
        in_A = rng.integers(0, 2, size=lat.shape(s)).astype(bool)
        for node in itertools.product(range(s + 1), repeat=lat.d):
            cone = lat.cone(s, node, t)
            Xn = _random_field(rng, lat, t, scale=10.0)
            Xn[cone] = X1[cone] if in_A[node] else 0.0
            lhs = in_A[node] * e1[node]
            rhs = in_A[node] * evaluate(op, s, t, Xn)[node]
            worst["A4"] = max(worst["A4"], float(abs(lhs - rhs)))
    return {"violations": worst, "samples": samples, "seed": seed,
            "comparison_margin": float(lat.comparison_margin(op.generator.c_l1))}


def check_domination(op: EvaluationOperator, mu: float, g0=None, samples: int = 50,
                     seed: int = 0, lipschitz_samples: int = 20000) -> dict:
    """Sampled check of ``E[X1] - E[X2] <= E^{g_mu}[X1 - X2]`` and of
    ``E^{-g_mu + g0}[0] <= E[0] <= E^{g_mu + g0}[0]``.

    ``g0`` defaults to ``t -> f(t, 0, 0)``.
    """
    lat, g = op.lattice, op.generator
    est = estimate_lipschitz(g, samples=lipschitz_samples, seed=seed)
    if mu < est - 1e-12:
        raise ValueError(f"mu={mu} is below the sampled Lipschitz constant {est}")
    if g0 is None:
        y0, z0 = np.zeros(()), np.zeros(g.d)
        g0 = lambda t: float(g(t, y0, z0))  # noqa: E731
    gmu = catalog("mu_norm", d=g.d, mu=mu)
    E_mu = EvaluationOperator(gmu, lat)
    E_up = EvaluationOperator(gmu.plus_drift(g0), lat)
    E_lo = EvaluationOperator((-gmu).plus_drift(g0), lat)
    rng = np.random.default_rng(seed)
    worst = {"difference": 0.0, "lower": 0.0, "upper": 0.0}
    for _ in range(samples):
        s, t = _levels(rng, lat.N, 2)
        X1 = _random_field(rng, lat, t)
        X2 = _random_field(rng, lat, t)
        lhs = evaluate(op, s, t, X1) - evaluate(op, s, t, X2)
        rhs = evaluate(E_mu, s, t, X1 - X2)
        worst["difference"] = max(worst["difference"], float(np.max(lhs - rhs)))
        zero = np.zeros(lat.shape(t))
        mid = evaluate(op, s, t, zero)
        worst["lower"] = max(worst["lower"], float(np.max(evaluate(E_lo, s, t, zero) - mid)))
        worst["upper"] = max(worst["upper"], float(np.max(mid - evaluate(E_up, s, t, zero))))
    return {"violations": worst, "samples": samples, "seed": seed, "mu": mu,
            "lipschitz_estimate": est}


def dual_representation(op: EvaluationOperator, s: int, t: int, xi,
                        grids: GridConfig | None = None) -> np.ndarray:
    """Sup-inf game value of ``Gamma_{s,t} xi + int_s^t Gamma F dr`` at level ``s``."""
    lat = op.lattice
    if not 0 <= s <= t <= lat.N:
        raise LatticeError(f"need 0 <= s <= t <= N, got s={s}, t={t}")
    xi = np.asarray(xi, dtype=float)
    res = game_dpp_value(BSDEProblem(op.generator, xi), lat, grids or GridConfig(),
                         start=s, end=t, terminal=xi)
    return res.value
