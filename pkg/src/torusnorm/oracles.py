"""Independent desk-scale oracles used to cross-check the optimizer.

These deliberately avoid the discrete-loop machinery: shortest winding loops
are bounded by dynamic programming on a lifted grid graph, Liouville axis
classes reduce to a one-dimensional minimisation, flat metrics have closed
forms, and gradients are checked against central finite differences.

The grid DP explores paths that are monotone in the first coordinate with
per-step slope at most ``slope_span`` and bounded vertical excursion; classes
are re-oriented (axis swap / mirror) so that |q| <= p first, which makes
every admissible direction representable.  Edge lengths use two-point Gauss
quadrature along each chord, a different rule from the midpoint quadrature
of the loop discretisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .fields import frac
from .metrics import LiouvilleMetric, MetricSpec, fiber_distortion_many
from .loops import HomologyClass

_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


# ---------------------------------------------------------------------------
# closed forms


def flat_beta(matrix, h) -> float:
    """beta of a flat metric: 0.5 * (h, G h) for the real class vector h."""
    hv = h.as_vector() if isinstance(h, HomologyClass) else np.asarray(h, dtype=float)
    g = np.asarray(matrix, dtype=float)
    return float(0.5 * hv @ g @ hv)


def flat_stable_norm(matrix, h) -> float:
    return float(np.sqrt(2.0 * flat_beta(matrix, h)))


# ---------------------------------------------------------------------------
# 1-D reduction for Liouville axis classes


def liouville_axis_minimum(g: LiouvilleMetric, axis: tuple, n_scan: int = 512, n_quad: int = 2048):
    """Minimal length in an axis class of a Liouville metric.

    For winding (p, 0) the minimum is |p| * min_c integral sqrt(f1(x) + f2(c)) dx
    (and symmetrically for (0, q)): any curve has at least |p| units of
    x-travel through f1 while f2 is bounded below by its minimum, and the
    horizontal circle at the minimising height attains the bound.  Found by a
    coarse scan plus golden-section refinement; the integral uses the
    trapezoid rule on the periodic integrand.

    Returns (length, c_star).
    """
    from .metrics import golden_section_max

    if not isinstance(g, LiouvilleMetric):
        raise SpecError("liouville_axis_minimum needs a Liouville metric")
    p, q = int(axis[0]), int(axis[1])
    if (p == 0) == (q == 0):
        raise SpecError("axis class must have exactly one nonzero component")
    ts = (np.arange(n_quad) + 0.5) / n_quad
    if q == 0:
        along, across, mult = g.f1, g.f2, abs(p)
    else:
        along, across, mult = g.f2, g.f1, abs(q)
    base = along.value(ts)

    def length_at(c):
        return float(np.mean(np.sqrt(base + across.value(np.asarray(c)))))

    cs = np.arange(n_scan) / n_scan
    coarse = np.array([length_at(c) for c in cs])
    i = int(np.argmin(coarse))
    c0 = cs[i]
    w = 1.5 / n_scan
    c_star, neg = golden_section_max(lambda c: -length_at(c), c0 - w, c0 + w)
    return mult * (-neg), float(frac(np.asarray(c_star)))


# ---------------------------------------------------------------------------
# lifted grid-graph dynamic programming


class _AxesSwapped:
    def __init__(self, g):
        self._g = g

    def quadratic(self, pts, vecs):
        return self._g.quadratic(pts[..., ::-1], vecs[..., ::-1])


class _XMirrored:
    def __init__(self, g):
        self._g = g

    def quadratic(self, pts, vecs):
        p = np.array(pts, dtype=float, copy=True)
        v = np.array(vecs, dtype=float, copy=True)
        p[..., 0] = -p[..., 0]
        v[..., 0] = -v[..., 0]
        return self._g.quadratic(p, v)


def _orient(g, k, potential=None):
    """Re-orient metric (and potential) so the class satisfies p >= 1, |q| <= p."""
    p, q = int(k[0]), int(k[1])
    if p == 0 and q == 0:
        raise SpecError("grid oracle needs a nonzero class")
    pot = potential
    if abs(q) > abs(p):
        g = _AxesSwapped(g)
        if pot is not None:
            swapped = pot
            pot = lambda pts: swapped(pts[..., ::-1])
        p, q = q, p
    if p < 0:
        g = _XMirrored(g)
        if pot is not None:
            mirrored = pot
            def pot(pts, _f=mirrored):
                pp = np.array(pts, dtype=float, copy=True)
                pp[..., 0] = -pp[..., 0]
                return _f(pp)
        p, q = -p, q
    return g, (p, q), pot


@dataclass
class GridOracleResult:
    value: float
    start_row: float  # minimising seam coordinate, as a torus coordinate
    n: int
    slope_span: int


def _dp_min_over_loops(weight_for, n: int, p: int, q: int, span: int, margin: int):
    """Matrix-state DP: D[start_row, lift_row]; returns (best, argmin_row)."""
    steps = [(dx, dy) for dx in (1, 2, 3) for dy in range(-span, span + 1)]
    # start rows cover the whole fundamental domain [0, n)
    lo = min(0, q * n) - margin
    hi = (n - 1) + max(0, q * n) + margin + 1
    ny = hi - lo
    cols = p * n
    inf = np.inf
    rows0 = np.arange(n)
    d0 = np.full((n, ny), inf)
    d0[rows0, rows0 - lo] = 0.0
    frontier = {0: d0}
    cache = {}
    for x in range(1, cols + 1):
        cur = np.full((n, ny), inf)
        for dx, dy in steps:
            if x - dx < 0:
                continue
            prev = frontier.get(x - dx)
            if prev is None:
                continue
            key = ((x - dx) % n, dx, dy)
            if key not in cache:
                cache[key] = weight_for((x - dx) % n, dx, dy, lo, hi)
            w = cache[key]
            shifted = prev + w[None, :]
            if dy > 0:
                cur[:, dy:] = np.minimum(cur[:, dy:], shifted[:, :-dy])
            elif dy < 0:
                cur[:, :dy] = np.minimum(cur[:, :dy], shifted[:, -dy:])
            else:
                np.minimum(cur, shifted, out=cur)
        frontier[x] = cur
        frontier.pop(x - 3, None)
    final = frontier[cols]
    closing = final[rows0, rows0 + q * n - lo]
    i = int(np.argmin(closing))
    return float(closing[i]), i


def grid_min_loop_length(
    g: MetricSpec, k, n: int = 256, slope_span: int = 3, margin: int | None = None
) -> GridOracleResult:
    """DP upper bound for the minimal loop length of winding k.

    Tight to a few parts in 1e3 for the smooth fixtures it is used on; the
    restriction to monotone bounded-slope paths makes it an upper bound up to
    the quadrature error of single chords.
    """
    g2, (p, q), _ = _orient(g, k)
    if margin is None:
        margin = n // 2
    h = 1.0 / n

    def weight_for(x0, dx, dy, lo, hi):
        ys = np.arange(lo, hi) * h
        a = np.stack([np.full(ys.shape, x0 * h), ys], axis=-1)
        chord = np.array([dx * h, dy * h])
        w = np.zeros(len(ys))
        for t in _GAUSS2:
            w += 0.5 * np.sqrt(g2.quadratic(a + t * chord, np.broadcast_to(chord, a.shape)))
        return w

    best, row = _dp_min_over_loops(weight_for, n, p, q, slope_span, margin)
    return GridOracleResult(best, row / n, n, slope_span)


def grid_min_action(
    g: MetricSpec,
    potential,
    k,
    period: float,
    n: int = 128,
    slope_span: int = 3,
    margin: int | None = None,
) -> GridOracleResult:
    """DP upper bound for the minimal average action at rotation vector k / period.

    Time is allotted proportionally to the advance in the oriented first
    coordinate, so this is an upper bound within the same path restrictions
    as :func:`grid_min_loop_length`.  ``potential`` maps points to V values.
    """
    if period <= 0:
        raise SpecError("period must be positive")
    g2, (p, q), pot = _orient(g, k, potential)
    if margin is None:
        margin = n // 2
    h = 1.0 / n
    cols = p * n

    def weight_for(x0, dx, dy, lo, hi):
        ys = np.arange(lo, hi) * h
        a = np.stack([np.full(ys.shape, x0 * h), ys], axis=-1)
        chord = np.array([dx * h, dy * h])
        dt = period * dx / cols
        kin = np.zeros(len(ys))
        potv = np.zeros(len(ys))
        for t in _GAUSS2:
            pts = a + t * chord
            kin += 0.5 * g2.quadratic(pts, np.broadcast_to(chord, a.shape))
            potv += 0.5 * pot(pts)
        return kin / (2.0 * dt) + potv * dt

    best, row = _dp_min_over_loops(weight_for, n, p, q, slope_span, margin)
    return GridOracleResult(best / period, row / n, n, slope_span)


# ---------------------------------------------------------------------------
# brute-force scans and finite differences


def dense_distortion_scan(g1: MetricSpec, g2: MetricSpec, n: int = 2048) -> float:
    """Max fiber distortion over a dense n-by-n grid (chunked row sweep).

    Corner-aligned sampling (j / n): when n is a multiple of the metrics'
    sample-grid sizes, the scan hits the interpolation cell edges, where
    piecewise-bilinear fields put their ridge maxima.
    """
    xs = np.arange(n) / n
    best = -np.inf
    chunk = max(1, (1 << 22) // n)
    for j0 in range(0, n, chunk):
        ys = xs[j0 : j0 + chunk]
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        pts = np.stack([gx, gy], axis=-1).reshape(-1, 2)
        best = max(best, float(fiber_distortion_many(g1, g2, pts).max()))
    return best


def finite_difference_gradient(value_fn, nodes: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of an (N, 2) array."""
    nodes = np.asarray(nodes, dtype=float)
    grad = np.zeros_like(nodes)
    for i in range(nodes.shape[0]):
        for j in range(nodes.shape[1]):
            plus = nodes.copy()
            minus = nodes.copy()
            plus[i, j] += step
            minus[i, j] -= step
            grad[i, j] = (value_fn(plus) - value_fn(minus)) / (2.0 * step)
    return grad
