"""Discrete closed curves with fixed winding on the torus.

A loop stores its nodes in the universal cover (plain R^2 coordinates) and
its integer winding vector k; the closure convention is u_N = u_0 + k.
Keeping the lift avoids branch cuts when differentiating through periodic
wrapping -- the metric itself wraps coordinates mod 1 internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NullClassError, SpecError
from .metrics import MetricSpec

MIN_NODES = 8


@dataclass(frozen=True)
class HomologyClass:
    """A real homology class t * (p, q) with integer (p, q) and rational t > 0."""

    p: int
    q: int
    scale: Fraction = field(default=Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "scale", Fraction(self.scale))
        if self.scale <= 0:
            raise SpecError("homology class scale must be positive")
        if self.p != int(self.p) or self.q != int(self.q):
            raise SpecError("homology class coordinates must be integers")

    @property
    def is_zero(self) -> bool:
        return self.p == 0 and self.q == 0

    @property
    def gcd(self) -> int:
        if self.is_zero:
            raise NullClassError("the zero class has no gcd normalisation")
        return math.gcd(abs(self.p), abs(self.q))

    def primitive_part(self) -> tuple:
        """(p, q) / gcd with gcd > 0."""
        g = self.gcd
        return (self.p // g, self.q // g)

    @property
    def weight(self) -> float:
        """scale * gcd: the factor relating the class to its primitive part."""
        return float(self.scale * self.gcd)

    def as_vector(self) -> np.ndarray:
        return float(self.scale) * np.array([self.p, self.q], dtype=float)

    def scaled_by(self, t) -> "HomologyClass":
        return HomologyClass(self.p, self.q, self.scale * Fraction(t))

    def __str__(self):
        if self.scale == 1:
            return f"({self.p},{self.q})"
        return f"{self.scale}*({self.p},{self.q})"


def _winding(k) -> tuple:
    if isinstance(k, HomologyClass):
        return (k.p, k.q)
    p, q = int(k[0]), int(k[1])
    return (p, q)


@dataclass
class DiscreteLoop:
    """A closed curve with winding k, nodes u_0..u_{N-1} lifted to R^2."""

    k: tuple
    nodes: np.ndarray

    def __post_init__(self):
        self.k = _winding(self.k)
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise SpecError("loop nodes must form an (N, 2) array")
        if len(self.nodes) < MIN_NODES:
            raise SpecError(f"loops need at least {MIN_NODES} nodes")
        if not np.all(np.isfinite(self.nodes)):
            raise SpecError("loop nodes must be finite")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def with_nodes(self, nodes) -> "DiscreteLoop":
        """Same winding, new node positions (winding is structural)."""
        return DiscreteLoop(self.k, nodes)

    def segments(self):
        """(du, mid): per-segment displacement and midpoint, closure included."""
        u = self.nodes
        nxt = np.roll(u, -1, axis=0).copy()
        nxt[-1] = u[0] + np.asarray(self.k, dtype=float)
        return nxt - u, 0.5 * (u + nxt)

    def to_dict(self) -> dict:
        return {"k": list(self.k), "nodes": self.nodes.tolist()}

    @classmethod
    def from_dict(cls, d) -> "DiscreteLoop":
        return cls(tuple(d["k"]), np.asarray(d["nodes"], dtype=float))


def init_loop(k, n: int, seed: int = 0, amplitude: float = 0.1) -> DiscreteLoop:
    """Seeded straight-plus-perturbation initial loop of winding k.

    Nodes sit on the segment from a random basepoint b to b + k, displaced
    transversally by a smooth random profile of the given amplitude.
    Deterministic in (seed, k).
    """
    kp, kq = _winding(k)
    if kp == 0 and kq == 0:
        raise NullClassError("null class has no loop representative")
    if n < MIN_NODES:
        raise SpecError(f"loops need at least {MIN_NODES} nodes")
    seeds = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    entropy = [int(s) % 2**63 for s in seeds] + [kp % 2**31, kq % 2**31]
    rng = np.random.default_rng(entropy)
    base = rng.uniform(0.0, 1.0, size=2)
    s = np.arange(n) / n
    kvec = np.array([kp, kq], dtype=float)
    normal = np.array([-kq, kp], dtype=float) / math.hypot(kp, kq)
    profile = np.zeros(n)
    for j in (1, 2, 3):
        profile += (rng.normal() * np.sin(2 * np.pi * j * s) + rng.normal() * np.cos(2 * np.pi * j * s)) / j
    nodes = base + np.outer(s, kvec) + amplitude * profile[:, None] * normal
    return DiscreteLoop((kp, kq), nodes)


def loop_length(g: MetricSpec, loop: DiscreteLoop) -> float:
    """Riemannian length by midpoint quadrature over the segments."""
    du, mid = loop.segments()
    return float(np.sum(np.sqrt(g.quadratic(mid, du))))


def loop_energy(g: MetricSpec, loop: DiscreteLoop) -> float:
    """Discrete action of the unit-period parametrisation: (N/2) sum g(du, du)."""
    du, mid = loop.segments()
    return float(0.5 * loop.n * np.sum(g.quadratic(mid, du)))


def energy_gradient(g: MetricSpec, loop: DiscreteLoop) -> np.ndarray:
    """Exact gradient of loop_energy with respect to the node positions."""
    du, mid = loop.segments()
    n = loop.n
    _, xg, gv = g.quadratic_with_grad(mid, du)
    # d/du_j picks up segment j (start point) and segment j-1 (end point);
    # midpoints contribute xg/2 to each endpoint.
    fwd = -n * gv + 0.25 * n * xg
    bwd = n * gv + 0.25 * n * xg
    return fwd + np.roll(bwd, 1, axis=0)


def resample(loop: DiscreteLoop, n_new: int) -> DiscreteLoop:
    """Arc-length (Euclidean, in the lift) reparametrisation to n_new nodes."""
    if n_new < MIN_NODES:
        raise SpecError(f"loops need at least {MIN_NODES} nodes")
    poly = np.vstack([loop.nodes, loop.nodes[0] + np.asarray(loop.k, dtype=float)])
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    if np.any(seg == 0.0):
        # collapsed segments carry no arc length; nudge to keep the map well defined
        seg = np.maximum(seg, 1e-300)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(n_new) * (cum[-1] / n_new)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, loop.n - 1)
    t = (targets - cum[idx]) / seg[idx]
    nodes = poly[idx] + t[:, None] * (poly[idx + 1] - poly[idx])
    return DiscreteLoop(loop.k, nodes)


def loop_speed_ratio(g: MetricSpec, loop: DiscreteLoop) -> float:
    """max / min of the per-segment g-lengths (1.0 means constant speed)."""
    du, mid = loop.segments()
    lens = np.sqrt(g.quadratic(mid, du))
    lo = float(lens.min())
    return float(lens.max()) / lo if lo > 0 else float("inf")
