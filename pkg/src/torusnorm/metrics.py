"""Riemannian metrics on the 2-torus and the distortion constant.

A metric is one of four variants:

* flat          -- a constant SPD 2x2 matrix G,
* conformal     -- phi(x, y) * G0 for a flat base G0 and a positive factor,
* liouville     -- (f1(x) + f2(y)) * (dx^2 + dy^2),
* general       -- an SPD matrix field sampled on a periodic grid and
                   interpolated bilinearly (entrywise; convexity preserves
                   positive definiteness between samples).

JSON schema (see README for full examples)::

    {"type": "flat",      "matrix": [[a, b], [b, c]]}
    {"type": "conformal", "matrix": ..., "factor_expr": "..."}        # or
    {"type": "conformal", "matrix": ..., "factor_grid": [[...], ...]}
    {"type": "liouville", "f1": "...", "f2": "..."}                   # expr or grid
    {"type": "general",   "spd_grid": [[[[a,b],[b,c]], ...], ...]}

All evaluation wraps coordinates mod 1, so specs are 1-periodic exactly.
Specs are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import fields
from .errors import DegenerateMetricError, SpecError

#: dense-grid resolution used to certify positivity at construction
_VALIDATION_GRID = 256


@dataclass(frozen=True)
class TangentSample:
    """A point x in [0,1)^2 with a tangent vector v in the standard frame."""

    x: tuple
    v: tuple


def _as_points(pts):
    p = np.asarray(pts, dtype=float)
    if p.shape[-1] != 2:
        raise SpecError("points must have trailing dimension 2")
    return p


class MetricSpec:
    """Common interface of the four metric variants."""

    kind = "abstract"

    def matrix_at(self, pts) -> np.ndarray:
        """Metric matrices G(x), shape (..., 2, 2)."""
        raise NotImplementedError

    def quadratic(self, pts, vecs) -> np.ndarray:
        """g_x(v, v) for batched points and vectors."""
        p, v = _as_points(pts), np.asarray(vecs, dtype=float)
        g = self.matrix_at(p)
        q = np.einsum("...i,...ij,...j->...", v, g, v)
        _check_positive(q, v)
        return q

    def quadratic_with_grad(self, pts, vecs):
        """(q, dq/dx, G v) with q = g_x(v, v); dq/dx holds v fixed."""
        raise NotImplementedError

    def scaled(self, c: float) -> "MetricSpec":
        """The metric c * g."""
        raise NotImplementedError

    def mean_matrix(self, n: int = 16) -> np.ndarray:
        """Average of G over an n-by-n grid (used as a preconditioner scale)."""
        xs = (np.arange(n) + 0.5) / n
        gx, gy = np.meshgrid(xs, xs, indexing="xy")
        pts = np.stack([gx, gy], axis=-1).reshape(-1, 2)
        return self.matrix_at(pts).mean(axis=0)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_positive(q, v):
    vv = np.sum(np.asarray(v, dtype=float) ** 2, axis=-1)
    bad = (q <= 0) & (vv > 0)
    if np.any(bad):
        raise DegenerateMetricError("degenerate metric sample")


def _check_spd_2x2(m, where):
    if m.shape[-2:] != (2, 2):
        raise SpecError(f"{where}: expected 2x2 matrices")
    if np.max(np.abs(m[..., 0, 1] - m[..., 1, 0])) > 1e-12:
        raise SpecError(f"{where}: matrix is not symmetric")
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    tr = m[..., 0, 0] + m[..., 1, 1]
    if np.any(det <= 0) or np.any(tr <= 0):
        raise SpecError(f"{where}: matrix is not positive definite")


class FlatMetric(MetricSpec):
    """Constant-coefficient metric G."""

    kind = "flat"

    def __init__(self, matrix):
        g = np.asarray(matrix, dtype=float)
        _check_spd_2x2(g, "flat metric")
        self.matrix = 0.5 * (g + g.T)  # exact symmetrisation
        self.matrix.setflags(write=False)

    def matrix_at(self, pts):
        p = _as_points(pts)
        return np.broadcast_to(self.matrix, p.shape[:-1] + (2, 2))

    def quadratic(self, pts, vecs):
        v = np.asarray(vecs, dtype=float)
        return np.einsum("...i,ij,...j->...", v, self.matrix, v)

    def quadratic_with_grad(self, pts, vecs):
        v = np.asarray(vecs, dtype=float)
        gv = v @ self.matrix
        q = np.sum(v * gv, axis=-1)
        return q, np.zeros_like(v), gv

    def scaled(self, c):
        return FlatMetric(c * self.matrix)

    def to_dict(self):
        return {"type": "flat", "matrix": self.matrix.tolist()}

    def __repr__(self):
        return f"FlatMetric({self.matrix.tolist()})"


class ConformalMetric(MetricSpec):
    """phi(x, y) * G0 with a flat base G0 and a positive smooth factor."""

    kind = "conformal"

    def __init__(self, factor, base: FlatMetric | None = None):
        self.base = base if base is not None else FlatMetric(np.eye(2))
        self.factor = (
            factor
            if isinstance(factor, (fields.ExprField2D, fields.GridField2D))
            else fields.scalar_field_2d(factor)
        )
        lo, _ = fields.field_extrema(self.factor, _VALIDATION_GRID)
        if lo <= 0:
            raise SpecError(f"conformal factor is not positive (min {lo:g})")
        self._floor = lo

    def matrix_at(self, pts):
        p = _as_points(pts)
        f = self.factor.value(p)
        return f[..., None, None] * self.base.matrix

    def quadratic(self, pts, vecs):
        p, v = _as_points(pts), np.asarray(vecs, dtype=float)
        q0 = np.einsum("...i,ij,...j->...", v, self.base.matrix, v)
        q = self.factor.value(p) * q0
        _check_positive(q, v)
        return q

    def quadratic_with_grad(self, pts, vecs):
        p, v = _as_points(pts), np.asarray(vecs, dtype=float)
        q0 = np.einsum("...i,ij,...j->...", v, self.base.matrix, v)
        f = self.factor.value(p)
        xg = self.factor.grad(p) * q0[..., None]
        gv = f[..., None] * (v @ self.base.matrix)
        return f * q0, xg, gv

    def scaled(self, c):
        return ConformalMetric(self.factor, self.base.scaled(c))

    def with_factor(self, factor):
        """Same base, different factor (used by normalisation)."""
        return ConformalMetric(factor, self.base)

    def to_dict(self):
        d = {"type": "conformal", "matrix": self.base.matrix.tolist()}
        key = "factor_expr" if isinstance(self.factor, fields.ExprField2D) else "factor_grid"
        d[key] = self.factor.to_json()
        return d

    def __repr__(self):
        return f"ConformalMetric({self.factor!r}, base={self.base!r})"


class LiouvilleMetric(MetricSpec):
    """(f1(x) + f2(y)) * (dx^2 + dy^2) for positive 1-periodic f1, f2."""

    kind = "liouville"

    def __init__(self, f1, f2):
        self.f1 = f1 if isinstance(f1, (fields.ExprField1D, fields.GridField1D)) else fields.scalar_field_1d(f1, "x")
        self.f2 = f2 if isinstance(f2, (fields.ExprField1D, fields.GridField1D)) else fields.scalar_field_1d(f2, "y")
        ts = np.arange(2 * _VALIDATION_GRID) / (2 * _VALIDATION_GRID)
        lo = float(self.f1.value(ts).min() + self.f2.value(ts).min())
        if lo <= 0:
            raise SpecError(f"liouville sum f1 + f2 is not positive (min {lo:g})")
        self._floor = lo

    def _sum(self, p):
        return self.f1.value(p[..., 0]) + self.f2.value(p[..., 1])

    def matrix_at(self, pts):
        p = _as_points(pts)
        s = self._sum(p)
        return s[..., None, None] * np.eye(2)

    def quadratic(self, pts, vecs):
        p, v = _as_points(pts), np.asarray(vecs, dtype=float)
        q = self._sum(p) * np.sum(v * v, axis=-1)
        _check_positive(q, v)
        return q

    def quadratic_with_grad(self, pts, vecs):
        p, v = _as_points(pts), np.asarray(vecs, dtype=float)
        vv = np.sum(v * v, axis=-1)
        s = self._sum(p)
        xg = np.stack(
            [self.f1.deriv(p[..., 0]) * vv, self.f2.deriv(p[..., 1]) * vv], axis=-1
        )
        return s * vv, xg, s[..., None] * v

    def scaled(self, c):
        scale = lambda f, var: (
            fields.GridField1D(f.values * c, var)
            if isinstance(f, fields.GridField1D)
            else fields.ExprField1D(f"({c!r}) * ({f.text})", var)
        )
        return LiouvilleMetric(scale(self.f1, "x"), scale(self.f2, "y"))

    def to_dict(self):
        return {"type": "liouville", "f1": self.f1.to_json(), "f2": self.f2.to_json()}

    def __repr__(self):
        return f"LiouvilleMetric({self.f1!r}, {self.f2!r})"


class GeneralMetric(MetricSpec):
    """SPD matrix field sampled on an (ny, nx) grid, bilinearly interpolated."""

    kind = "general"

    def __init__(self, spd_grid):
        g = np.asarray(spd_grid, dtype=float)
        if g.ndim != 4 or g.shape[-2:] != (2, 2) or g.shape[0] < 2 or g.shape[1] < 2:
            raise SpecError("general metric needs an (ny, nx, 2, 2) sample grid")
        _check_spd_2x2(g, "general metric samples")
        self.grid = 0.5 * (g + np.swapaxes(g, -1, -2))
        self.grid.setflags(write=False)

    def matrix_at(self, pts):
        p = _as_points(pts)
        return fields.bilinear_value(self.grid, p)

    def quadratic_with_grad(self, pts, vecs):
        p, v = _as_points(pts), np.asarray(vecs, dtype=float)
        g = fields.bilinear_value(self.grid, p)
        gv = np.einsum("...ij,...j->...i", g, v)
        q = np.sum(v * gv, axis=-1)
        dgx, dgy = fields.bilinear_grad(self.grid, p)
        xg = np.stack(
            [
                np.einsum("...i,...ij,...j->...", v, dgx, v),
                np.einsum("...i,...ij,...j->...", v, dgy, v),
            ],
            axis=-1,
        )
        _check_positive(q, v)
        return q, xg, gv

    def scaled(self, c):
        return GeneralMetric(c * self.grid)

    def to_dict(self):
        return {"type": "general", "spd_grid": self.grid.tolist()}

    def __repr__(self):
        return f"GeneralMetric(grid={self.grid.shape[:2]})"


# ---------------------------------------------------------------------------
# operations


def metric_eval(spec: MetricSpec, sample: TangentSample) -> float:
    """Squared fiber norm g_x(v, v) at a single tangent sample."""
    x = np.asarray(sample.x, dtype=float).reshape(1, 2)
    v = np.asarray(sample.v, dtype=float).reshape(1, 2)
    return float(spec.quadratic(x, v)[0])


def _pencil_max_eig(a, b):
    """Largest lambda with det(a - lambda b) = 0, for symmetric 2x2 batches.

    Works on m = b^{-1} a: lambda = tr(m)/2 + sqrt(((m00 - m11)/2)^2 + m01 m10).
    This discriminant form is cancellation-free: the naive
    mixed^2 - 4 det(a) det(b) loses half the mantissa when the pencil is
    near-degenerate (e.g. conformal pairs), which puts sqrt(eps)-size noise
    on an analytically smooth field.
    """
    det_b = b[..., 0, 0] * b[..., 1, 1] - b[..., 0, 1] * b[..., 1, 0]
    if np.any(det_b <= 0) or np.any(b[..., 0, 0] <= 0):
        raise DegenerateMetricError("degenerate reference metric in distortion")
    inv = 1.0 / det_b
    m00 = (b[..., 1, 1] * a[..., 0, 0] - b[..., 0, 1] * a[..., 1, 0]) * inv
    m01 = (b[..., 1, 1] * a[..., 0, 1] - b[..., 0, 1] * a[..., 1, 1]) * inv
    m10 = (b[..., 0, 0] * a[..., 1, 0] - b[..., 1, 0] * a[..., 0, 0]) * inv
    m11 = (b[..., 0, 0] * a[..., 1, 1] - b[..., 1, 0] * a[..., 0, 1]) * inv
    disc = np.maximum(0.25 * (m00 - m11) ** 2 + m01 * m10, 0.0)
    return 0.5 * (m00 + m11) + np.sqrt(disc)


def fiber_distortion(g1: MetricSpec, g2: MetricSpec, x) -> float:
    """sup over v != 0 of g2_x(v, v) / g1_x(v, v) at the point x."""
    p = np.asarray(x, dtype=float).reshape(1, 2)
    val = _pencil_max_eig(g2.matrix_at(p), g1.matrix_at(p))[0]
    return float(val)


def fiber_distortion_many(g1: MetricSpec, g2: MetricSpec, pts) -> np.ndarray:
    p = _as_points(pts)
    return _pencil_max_eig(g2.matrix_at(p), g1.matrix_at(p))


def golden_section_max(f, a: float, b: float, tol: float = 1e-12):
    """Golden-section maximisation of a scalar function on [a, b]."""
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


def distortion_constant(g1: MetricSpec, g2: MetricSpec, grid_n: int = 64):
    """Maximal fiber distortion of g2 against g1 over the torus.

    Coarse grid_n x grid_n scan followed by coordinate-wise golden-section
    refinement around the discrete argmax, iterated until successive
    estimates differ by less than 1e-10 relative.  Returns (C, argmax).
    """
    if grid_n < 16:
        raise SpecError("distortion grid_n must be at least 16")
    xs = (np.arange(grid_n) + 0.5) / grid_n
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    pts = np.stack([gx, gy], axis=-1).reshape(-1, 2)
    vals = fiber_distortion_many(g1, g2, pts)
    i = int(np.argmax(vals))
    x0, y0 = pts[i]
    best = float(vals[i])
    w = 1.5 / grid_n
    for _ in range(60):
        x0, _ = golden_section_max(lambda t: fiber_distortion(g1, g2, (t, y0)), x0 - w, x0 + w)
        y0, cur = golden_section_max(lambda t: fiber_distortion(g1, g2, (x0, t)), y0 - w, y0 + w)
        if abs(cur - best) < 1e-10 * max(1.0, abs(cur)):
            best = cur
            break
        best = cur
    return best, (float(fields.frac(x0)), float(fields.frac(y0)))


# ---------------------------------------------------------------------------
# JSON interface


def metric_from_dict(d: dict) -> MetricSpec:
    if not isinstance(d, dict) or "type" not in d:
        raise SpecError("metric spec must be an object with a 'type' field")
    kind = d["type"]
    if kind == "flat":
        if "matrix" not in d:
            raise SpecError("flat metric needs a 'matrix' field")
        return FlatMetric(d["matrix"])
    if kind == "conformal":
        base = FlatMetric(d.get("matrix", np.eye(2)))
        if "factor_expr" in d:
            factor = fields.ExprField2D(d["factor_expr"])
        elif "factor_grid" in d:
            factor = fields.GridField2D(d["factor_grid"])
        else:
            raise SpecError("conformal metric needs 'factor_expr' or 'factor_grid'")
        return ConformalMetric(factor, base)
    if kind == "liouville":
        if "f1" not in d or "f2" not in d:
            raise SpecError("liouville metric needs 'f1' and 'f2'")
        return LiouvilleMetric(
            fields.scalar_field_1d(d["f1"], "x"), fields.scalar_field_1d(d["f2"], "y")
        )
    if kind == "general":
        if "spd_grid" not in d:
            raise SpecError("general metric needs 'spd_grid'")
        return GeneralMetric(d["spd_grid"])
    raise SpecError(f"unknown metric type {kind!r}")


def load_metric(path) -> MetricSpec:
    """Read a metric spec from a JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read metric spec {path}: {exc}") from exc
    return metric_from_dict(d)
