"""BSDE drivers ``f(t, y, z)`` with their Lipschitz constants, plus a small catalog.

Drivers are vectorized: ``y`` has any shape ``S`` and ``z`` has shape ``S + (d,)``.
``c_l1`` bounds ``|f(t,y1,z1) - f(t,y2,z2)| / (|y1-y2| + |z1-z2|)`` with the
Euclidean norm on ``z``; ``c_rep`` is the Euclidean constant on the joint
variable ``(y, z)`` that the affine representation uses (default ``sqrt(2) c_l1``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ObstacleViolation
from .lattice import Lattice

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    func: Callable = field(repr=False)
    c_l1: float
    d: int = 1
    c_rep: float | None = None
    concave: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.c_l1 < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if self.c_rep is None:
            object.__setattr__(self, "c_rep", SQRT2 * self.c_l1)
        if self.c_rep < self.c_l1:
            raise ValueError(f"c_rep={self.c_rep} must dominate c_l1={self.c_l1}")

    def __call__(self, t, y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.d == 1 and z.ndim == y.ndim:
            z = z[..., None]
        return np.broadcast_to(np.asarray(self.func(t, y, z), dtype=float), y.shape)

    def at_point(self, t: float, x) -> np.ndarray:
        """Evaluate on joint points ``x = (y, z_1..z_d)`` of shape ``(..., d+1)``."""
        x = np.asarray(x, dtype=float)
        return self(t, x[..., 0], x[..., 1:])

    def with_c_rep(self, c_rep: float) -> "GeneratorSpec":
        """Same driver with a user-supplied (sharper or looser) Euclidean constant."""
        return replace(self, c_rep=float(c_rep))

    def plus_drift(self, g0: Callable[[float], float], name: str | None = None) -> "GeneratorSpec":
        """``f(t,y,z) + g0(t)``; the Lipschitz constants are unchanged."""
        f = self.func
        return replace(self, name=name or f"{self.name}+g0",
                       func=lambda t, y, z: f(t, y, z) + g0(t))

    def __neg__(self) -> "GeneratorSpec":
        f = self.func
        return replace(self, name=f"-{self.name}", func=lambda t, y, z: -f(t, y, z),
                       concave=False)


def _znorm(z):
    return np.sqrt(np.sum(z * z, axis=-1))


def _check_mu(mu):
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    return float(mu)


def catalog(name: str, d: int = 1, **params) -> GeneratorSpec:
    """Build a catalog driver.

    Names: ``zero``, ``constant(c)``, ``affine(a, b1, b2)``, ``mu_norm(mu)``
    (``mu(|y| + |z|)``), ``mu_abs_z(mu)``, ``neg_mu_abs_z(mu)`` and
    ``custom(func, c_l1, c_rep=None, concave=False)``.  Pass ``c_rep`` to any
    member to override the default Euclidean constant.
    """
    c_rep = params.pop("c_rep", None)
    if name == "zero":
        spec = GeneratorSpec("zero", lambda t, y, z: np.zeros_like(y), 0.0, d, concave=True)
    elif name == "constant":
        c = float(params.get("c", 0.0))
        spec = GeneratorSpec("constant", lambda t, y, z: np.full_like(y, c), 0.0, d,
                             concave=True, params={"c": c})
    elif name == "affine":
        a = float(params.get("a", 0.0))
        b1 = float(params.get("b1", 0.0))
        b2 = np.broadcast_to(np.asarray(params.get("b2", 0.0), dtype=float), (d,)).copy()

        def f(t, y, z):
            return a + b1 * y + z @ b2

        spec = GeneratorSpec("affine", f, max(abs(b1), float(np.linalg.norm(b2))), d,
                             concave=True, params={"a": a, "b1": b1, "b2": b2.tolist()})
    elif name == "mu_norm":
        mu = _check_mu(params.get("mu", 1.0))
        spec = GeneratorSpec("mu_norm", lambda t, y, z: mu * (np.abs(y) + _znorm(z)), mu, d,
                             params={"mu": mu})
    elif name == "mu_abs_z":
        mu = _check_mu(params.get("mu", 1.0))
        spec = GeneratorSpec("mu_abs_z", lambda t, y, z: mu * _znorm(z), mu, d,
                             params={"mu": mu})
    elif name == "neg_mu_abs_z":
        mu = _check_mu(params.get("mu", 1.0))
        spec = GeneratorSpec("neg_mu_abs_z", lambda t, y, z: -mu * _znorm(z), mu, d,
                             concave=True, params={"mu": mu})
    elif name == "custom":
        if "func" not in params or "c_l1" not in params:
            raise ValueError("custom driver needs func and c_l1")
        spec = GeneratorSpec(params.get("label", "custom"), params["func"],
                             float(params["c_l1"]), d,
                             concave=bool(params.get("concave", False)))
    else:
        raise ValueError(f"unknown generator {name!r}")
    if c_rep is not None:
        spec = spec.with_c_rep(c_rep)
    return spec


def estimate_lipschitz(g: GeneratorSpec, box=(-3.0, 3.0), samples: int = 20000,
                       seed: int = 0, t_range=(0.0, 1.0)) -> float:
    """Largest sampled ratio ``|f(x1) - f(x2)| / (|y1-y2| + |z1-z2|)``.

    Half the pairs are independent uniform draws in the box; the other half
    are short perturbations with a random subset of coordinates frozen, which
    probes the axis directions where l1 quotients peak.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    lo, hi = box
    m = g.d + 1
    n1 = samples // 2
    n2 = samples - n1
    x1 = rng.uniform(lo, hi, size=(samples, m))
    x2 = np.empty_like(x1)
    x2[:n1] = rng.uniform(lo, hi, size=(n1, m))
    step = rng.normal(scale=0.1 * (hi - lo), size=(n2, m))
    step *= rng.integers(0, 2, size=(n2, m))
    x2[n1:] = np.clip(x1[n1:] + step, lo, hi)
    t = rng.uniform(*t_range, size=samples)
    f1 = np.array([g.at_point(ti, xi) for ti, xi in zip(t, x1)]) if _time_varying(g) \
        else g.at_point(t[0], x1)
    f2 = np.array([g.at_point(ti, xi) for ti, xi in zip(t, x2)]) if _time_varying(g) \
        else g.at_point(t[0], x2)
    dist = np.abs(x1[:, 0] - x2[:, 0]) + _znorm(x1[:, 1:] - x2[:, 1:])
    # near-coincident pairs only contribute rounding noise to the quotient
    ok = dist > 1e-3 * (hi - lo)
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(f1 - f2)[ok] / dist[ok]))


def _time_varying(g: GeneratorSpec) -> bool:
    y = np.zeros(1)
    z = np.zeros((1, g.d))
    return not np.array_equal(g(0.0, y, z), g(0.731, y, z))


@dataclass(frozen=True)
class BSDEProblem:
    """Driver, terminal field at level ``N`` and an optional obstacle per level.

    ``obstacle`` is a list of ``N + 1`` node fields.  The obstacle must sit
    below the terminal condition at every terminal node.
    """

    generator: GeneratorSpec
    terminal: np.ndarray
    obstacle: list | None = None

    def __post_init__(self):
        if self.obstacle is not None:
            bad = np.asarray(self.obstacle[-1]) > np.asarray(self.terminal)
            if bad.any():
                raise ObstacleViolation(
                    f"obstacle exceeds terminal value at {int(bad.sum())} terminal node(s)")


def terminal_field(lat: Lattice, name: str, **params) -> np.ndarray:
    """Terminal condition as a function of ``B_T``.

    ``bt`` (first coordinate), ``bt_squared`` (``|B_T|^2``), ``call(K)``,
    ``put(K)`` on the first coordinate, or ``custom(values)`` in node order.
    """
    B = lat.brownian(lat.N)
    b1 = B[..., 0]
    if name == "bt":
        return b1.copy()
    if name == "bt_squared":
        return np.sum(B * B, axis=-1)
    if name == "call":
        return np.maximum(b1 - float(params.get("K", 0.0)), 0.0)
    if name == "put":
        return np.maximum(float(params.get("K", 0.0)) - b1, 0.0)
    if name == "custom":
        vals = np.asarray(params["values"], dtype=float)
        if vals.size != lat.n_nodes(lat.N):
            raise ValueError(f"custom terminal needs {lat.n_nodes(lat.N)} values")
        return vals.reshape(lat.shape(lat.N))
    raise ValueError(f"unknown terminal condition {name!r}")


def obstacle_fields(lat: Lattice, name: str, **params) -> list | None:
    """Obstacle ``S`` on every level: ``none``, ``linear(a, b)`` (``a + b t``),
    ``put_payoff(K)`` (``(K - B_t)^+``) or ``constant(c)``."""
    if name == "none":
        return None
    if name == "linear":
        a, b = float(params.get("a", 0.0)), float(params.get("b", 0.0))
        return [np.full(lat.shape(k), a + b * lat.time(k)) for k in range(lat.N + 1)]
    if name == "put_payoff":
        K = float(params.get("K", 0.0))
        return [np.maximum(K - lat.brownian(k)[..., 0], 0.0) for k in range(lat.N + 1)]
    if name == "constant":
        c = float(params.get("c", 0.0))
        return [np.full(lat.shape(k), c) for k in range(lat.N + 1)]
    raise ValueError(f"unknown obstacle {name!r}")
