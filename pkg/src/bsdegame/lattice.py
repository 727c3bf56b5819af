"""Recombining random-walk lattice standing in for d-dimensional Brownian motion.

A level-``k`` scalar field is a numpy array of shape ``(k + 1,) * d`` indexed by
per-dimension up-counts; d-vector fields (``z``) carry a trailing axis of size
``d``.  Node order is C-order (lexicographic in the up-counts).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import comb

from .errors import LatticeError, PositivityViolation

MAX_DIM = 3


@dataclass(frozen=True)
class Lattice:
    """Product of ``d`` independent symmetric ``+-sqrt(dt)`` walks on ``[0, T]``.

    Parameters
    ----------
    T : float
        Horizon.
    N : int
        Number of time steps.
    d : int
        Dimension of the driving walk, ``1 <= d <= 3``.
    """

    T: float
    N: int
    d: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise LatticeError(f"horizon must be positive, got T={self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise LatticeError(f"need at least one step, got N={self.N}")
        if int(self.d) != self.d or not 1 <= self.d <= MAX_DIM:
            raise LatticeError(f"dimension must be in 1..{MAX_DIM}, got d={self.d}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def sqrt_dt(self) -> float:
        return float(np.sqrt(self.dt))

    @property
    def n_outcomes(self) -> int:
        return 2 ** self.d

    @cached_property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.N + 1)

    def time(self, k: int) -> float:
        return k * self.dt

    @cached_property
    def offsets(self) -> np.ndarray:
        """0/1 up-moves of each one-step outcome, shape ``(2**d, d)``, lexicographic."""
        return np.array(list(itertools.product((0, 1), repeat=self.d)), dtype=int)

    @cached_property
    def signs(self) -> np.ndarray:
        """Increment signs ``+-1`` per outcome, shape ``(2**d, d)``."""
        return 2.0 * self.offsets - 1.0

    def shape(self, k: int) -> tuple[int, ...]:
        return (k + 1,) * self.d

    def n_nodes(self, k: int) -> int:
        return (k + 1) ** self.d

    def up_counts(self, k: int) -> np.ndarray:
        """Up-count vectors of the level-``k`` nodes, shape ``shape(k) + (d,)``."""
        grids = np.meshgrid(*([np.arange(k + 1)] * self.d), indexing="ij")
        return np.stack(grids, axis=-1)

    def brownian(self, k: int) -> np.ndarray:
        """Walk position ``(2u - k) sqrt(dt)`` at level ``k``, shape ``shape(k) + (d,)``."""
        return (2 * self.up_counts(k) - k) * self.sqrt_dt

    def node_probs(self, k: int) -> np.ndarray:
        """Probability of reaching each level-``k`` node from the root."""
        p1 = comb(k, np.arange(k + 1)) / 2.0 ** k
        out = p1
        for _ in range(self.d - 1):
            out = np.multiply.outer(out, p1)
        return out

    def level_of(self, f: np.ndarray, vector: bool = False) -> int:
        """Infer the level a node field lives on, validating its shape."""
        f = np.asarray(f)
        core = f.shape[:-1] if vector else f.shape
        if vector and (f.ndim == 0 or f.shape[-1] != self.d):
            raise LatticeError(f"vector field needs trailing axis {self.d}, got {f.shape}")
        if len(core) != self.d or len(set(core)) != 1:
            raise LatticeError(f"shape {f.shape} is not a level field for d={self.d}")
        k = core[0] - 1
        if k > self.N:
            raise LatticeError(f"field level {k} exceeds N={self.N}")
        return k

    def node_field(self, k: int, func) -> np.ndarray:
        """Evaluate ``func(t, B)`` with ``B`` of shape ``shape(k) + (d,)``."""
        out = np.asarray(func(self.time(k), self.brownian(k)), dtype=float)
        return np.broadcast_to(out, self.shape(k)).copy()

    def successors(self, f: np.ndarray) -> np.ndarray:
        """Stack successor values of a level-``k+1`` field, shape ``(2**d,) + shape(k)``.

        Extra trailing axes of ``f`` are carried along.
        """
        f = np.asarray(f)
        k1 = f.shape[0] - 1
        if k1 < 1:
            raise LatticeError("level-0 field has no predecessor level")
        out = []
        for off in self.offsets:
            idx = tuple(slice(o, o + k1) for o in off)
            out.append(f[idx])
        return np.stack(out)

    def cond_expect(self, f: np.ndarray) -> np.ndarray:
        """Conditional expectation of a level-``k+1`` field onto level ``k``."""
        self.level_of(f)
        return self.successors(f).mean(axis=0)

    def extract_z(self, f: np.ndarray) -> np.ndarray:
        """Martingale-representation coefficient ``E[f dB_i | node] / dt``.

        Returns shape ``shape(k) + (d,)``.  In one dimension this is
        ``(f_up - f_down) / (2 sqrt(dt))``.
        """
        self.level_of(f)
        succ = self.successors(f)
        # sum_e succ[e] * sign[e, i]
        z = np.tensordot(np.moveaxis(succ, 0, -1), self.signs, axes=([-1], [0]))
        return z / (self.n_outcomes * self.sqrt_dt)

    def positivity_margin(self, c_rep: float) -> float:
        """``c (sqrt(d dt) + dt)``; Gamma factors stay positive iff this is below 1."""
        return c_rep * (np.sqrt(self.d * self.dt) + self.dt)

    def check_positivity(self, c_rep: float) -> None:
        m = self.positivity_margin(c_rep)
        if m >= 1.0:
            raise PositivityViolation(
                f"C_rep*(sqrt(d*dt)+dt) = {m:.6g} >= 1 for C_rep={c_rep:.6g}, "
                f"dt={self.dt:.6g}, d={self.d}; increase N"
            )

    def comparison_margin(self, c_l1: float) -> float:
        """Monotonicity of the explicit scheme needs ``c (dt + sqrt(d dt)) <= 1``."""
        return c_l1 * (self.dt + np.sqrt(self.d * self.dt))

    def cone(self, k: int, node: tuple[int, ...], level: int) -> tuple[slice, ...]:
        """Index of the level-``level`` nodes reachable from ``node`` at level ``k``."""
        if level < k:
            raise LatticeError("cone level precedes the apex")
        return tuple(slice(u, u + level - k + 1) for u in node)


def build(T: float, N: int, d: int = 1, c_rep: float | None = None) -> Lattice:
    """Construct a lattice, optionally checking the Gamma positivity guard."""
    lat = Lattice(float(T), int(N), int(d))
    if c_rep is not None:
        lat.check_positivity(c_rep)
    return lat
