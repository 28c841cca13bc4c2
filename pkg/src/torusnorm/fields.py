"""Scalar fields on the torus: closed-form expressions and sampled grids.

Expression grammar
------------------
Closed-form fields are parsed with sympy and admit::

    +  -  *  /  **  ( )     sin  cos  exp     numeric literals     pi

together with the torus coordinates ``x`` and ``y`` (one-variable fields use
a single coordinate).  Anything else (other functions, unknown symbols,
infinities) is rejected with :class:`~torusnorm.errors.SpecError`.  Partial
derivatives are exact (symbolic).

Every field is 1-periodic by construction: coordinates are reduced to
[0, 1) before evaluation.  A closed-form expression that is not itself
1-periodic (e.g. a Gaussian bump centred at (1/2, 1/2)) is therefore
evaluated as its periodisation over the fundamental domain.

Grid convention
---------------
A 2-D grid of samples ``v`` has shape ``(ny, nx)`` with
``v[iy, ix] = f(x = ix / nx, y = iy / ny)`` (rows index y).  In JSON, grids
are row-major nested lists in the same layout.  Interpolation is bilinear
with periodic wrap; derivatives are those of the interpolant (piecewise
constant along each axis within a cell).  1-D grids interpolate linearly
with periodic wrap.
"""

from __future__ import annotations

import numpy as np
import sympy
from sympy.parsing.sympy_parser import parse_expr

from .errors import SpecError

_X, _Y = sympy.symbols("x y", real=True)
_COORD = {"x": _X, "y": _Y}
_LOCALS = {
    "x": _X,
    "y": _Y,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "pi": sympy.pi,
}
_ALLOWED_FUNCS = (sympy.sin, sympy.cos, sympy.exp)


def frac(a):
    """Reduce coordinates to the fundamental domain [0, 1)."""
    return a - np.floor(a)


def parse_expression(text: str, variables=("x", "y")) -> sympy.Expr:
    """Parse ``text`` against the documented grammar.

    ``variables`` lists the coordinate names the expression may use.
    """
    if not isinstance(text, str) or not text.strip():
        raise SpecError("expression must be a non-empty string")
    try:
        expr = parse_expr(text, local_dict=_LOCALS, evaluate=True)
    except Exception as exc:  # sympy raises a zoo of error types
        raise SpecError(f"cannot parse expression {text!r}: {exc}") from exc
    if not isinstance(expr, sympy.Expr):
        raise SpecError(f"expression {text!r} does not define a scalar value")
    allowed = {_COORD[v] for v in variables}
    extra = expr.free_symbols - allowed
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise SpecError(f"expression {text!r} uses unknown symbol(s): {names}")
    for fn in expr.atoms(sympy.Function):
        if not isinstance(fn, _ALLOWED_FUNCS):
            raise SpecError(
                f"expression {text!r} uses unsupported function {fn.func}"
            )
    if expr.has(sympy.zoo, sympy.oo, -sympy.oo, sympy.nan):
        raise SpecError(f"expression {text!r} is singular")
    return expr


def _compile(expr: sympy.Expr, args):
    """Lambdify ``expr`` and force array output matching the first argument."""
    raw = sympy.lambdify(args, expr, modules="numpy")

    def fn(*coords):
        out = np.asarray(raw(*coords), dtype=float)
        if out.shape != coords[0].shape:
            out = np.broadcast_to(out, coords[0].shape).copy()
        return out

    return fn


class ExprField2D:
    """Closed-form scalar field f(x, y) with exact partial derivatives."""

    def __init__(self, text: str):
        self.text = str(text)
        self._build()

    def _build(self):
        expr = parse_expression(self.text, ("x", "y"))
        self._f = _compile(expr, (_X, _Y))
        self._fx = _compile(expr.diff(_X), (_X, _Y))
        self._fy = _compile(expr.diff(_Y), (_X, _Y))

    def value(self, pts):
        p = np.asarray(pts, dtype=float)
        return self._f(frac(p[..., 0]), frac(p[..., 1]))

    def grad(self, pts):
        p = np.asarray(pts, dtype=float)
        xs, ys = frac(p[..., 0]), frac(p[..., 1])
        return np.stack([self._fx(xs, ys), self._fy(xs, ys)], axis=-1)

    def to_json(self):
        return self.text

    def __getstate__(self):
        return {"text": self.text}

    def __setstate__(self, state):
        self.text = state["text"]
        self._build()

    def __repr__(self):
        return f"ExprField2D({self.text!r})"


class ExprField1D:
    """Closed-form 1-periodic function of a single coordinate."""

    def __init__(self, text: str, var: str):
        if var not in ("x", "y"):
            raise SpecError(f"1-D field variable must be 'x' or 'y', got {var!r}")
        self.text = str(text)
        self.var = var
        self._build()

    def _build(self):
        expr = parse_expression(self.text, (self.var,))
        sym = _COORD[self.var]
        self._f = _compile(expr, (sym,))
        self._df = _compile(expr.diff(sym), (sym,))

    def value(self, t):
        return self._f(frac(np.asarray(t, dtype=float)))

    def deriv(self, t):
        return self._df(frac(np.asarray(t, dtype=float)))

    def to_json(self):
        return self.text

    def __getstate__(self):
        return {"text": self.text, "var": self.var}

    def __setstate__(self, state):
        self.text = state["text"]
        self.var = state["var"]
        self._build()

    def __repr__(self):
        return f"ExprField1D({self.text!r}, var={self.var!r})"


def _bilinear_parts(shape, pts):
    """Cell indices and weights for periodic bilinear interpolation."""
    ny, nx = shape
    p = np.asarray(pts, dtype=float)
    fx = frac(p[..., 0]) * nx
    fy = frac(p[..., 1]) * ny
    ix = np.floor(fx).astype(int)
    iy = np.floor(fy).astype(int)
    tx = fx - ix
    ty = fy - iy
    ix0, iy0 = ix % nx, iy % ny
    ix1, iy1 = (ix0 + 1) % nx, (iy0 + 1) % ny
    return ix0, ix1, iy0, iy1, tx, ty


def bilinear_value(values: np.ndarray, pts):
    """Evaluate a periodic bilinear interpolant (trailing dims broadcast)."""
    ix0, ix1, iy0, iy1, tx, ty = _bilinear_parts(values.shape[:2], pts)
    extra = values.ndim - 2
    if extra:
        sl = (...,) + (None,) * extra
        tx, ty = tx[sl], ty[sl]
    f00 = values[iy0, ix0]
    f01 = values[iy0, ix1]
    f10 = values[iy1, ix0]
    f11 = values[iy1, ix1]
    return (1 - ty) * ((1 - tx) * f00 + tx * f01) + ty * ((1 - tx) * f10 + tx * f11)


def bilinear_grad(values: np.ndarray, pts):
    """Exact gradient of the bilinear interpolant; leading axis pair (..., 2)."""
    ny, nx = values.shape[:2]
    ix0, ix1, iy0, iy1, tx, ty = _bilinear_parts(values.shape[:2], pts)
    extra = values.ndim - 2
    if extra:
        sl = (...,) + (None,) * extra
        tx, ty = tx[sl], ty[sl]
    f00 = values[iy0, ix0]
    f01 = values[iy0, ix1]
    f10 = values[iy1, ix0]
    f11 = values[iy1, ix1]
    dx = nx * ((1 - ty) * (f01 - f00) + ty * (f11 - f10))
    dy = ny * ((1 - tx) * (f10 - f00) + tx * (f11 - f01))
    return dx, dy


class GridField2D:
    """Scalar samples on an ny-by-nx periodic grid, bilinearly interpolated."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise SpecError("2-D grid field needs an (ny, nx) array, ny, nx >= 2")
        if not np.all(np.isfinite(v)):
            raise SpecError("grid field contains non-finite samples")
        self.values = v

    def value(self, pts):
        return bilinear_value(self.values, pts)

    def grad(self, pts):
        dx, dy = bilinear_grad(self.values, pts)
        return np.stack([dx, dy], axis=-1)

    def to_json(self):
        return self.values.tolist()

    def __repr__(self):
        return f"GridField2D(shape={self.values.shape})"


class GridField1D:
    """Samples of a 1-periodic function, linearly interpolated."""

    def __init__(self, values, var: str = "x"):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise SpecError("1-D grid field needs at least two samples")
        if not np.all(np.isfinite(v)):
            raise SpecError("grid field contains non-finite samples")
        self.values = v
        self.var = var

    def value(self, t):
        n = self.values.size
        ft = frac(np.asarray(t, dtype=float)) * n
        i0 = np.floor(ft).astype(int)
        s = ft - i0
        i0 %= n
        i1 = (i0 + 1) % n
        return (1 - s) * self.values[i0] + s * self.values[i1]

    def deriv(self, t):
        n = self.values.size
        ft = frac(np.asarray(t, dtype=float)) * n
        i0 = np.floor(ft).astype(int) % n
        i1 = (i0 + 1) % n
        return n * (self.values[i1] - self.values[i0])

    def to_json(self):
        return self.values.tolist()

    def __repr__(self):
        return f"GridField1D(n={self.values.size}, var={self.var!r})"


def scalar_field_2d(obj) -> ExprField2D | GridField2D:
    """Build a 2-D field from a JSON value: string -> expression, list -> grid."""
    if isinstance(obj, str):
        return ExprField2D(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return GridField2D(obj)
    if isinstance(obj, (int, float)):
        return ExprField2D(repr(float(obj)))
    raise SpecError(f"cannot interpret {type(obj).__name__} as a 2-D scalar field")


def scalar_field_1d(obj, var: str) -> ExprField1D | GridField1D:
    """Build a 1-D field from a JSON value: string -> expression, list -> grid."""
    if isinstance(obj, str):
        return ExprField1D(obj, var)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return GridField1D(obj, var)
    if isinstance(obj, (int, float)):
        return ExprField1D(repr(float(obj)), var)
    raise SpecError(f"cannot interpret {type(obj).__name__} as a 1-D scalar field")


def shift_field(field, offset: float):
    """Return a field evaluating to ``field + offset`` (exact for grids)."""
    if isinstance(field, GridField2D):
        return GridField2D(field.values + offset)
    if isinstance(field, ExprField2D):
        return ExprField2D(f"({field.text}) + ({offset!r})")
    raise SpecError(f"cannot shift field of type {type(field).__name__}")


def rescale_field(field, factor: float):
    """Return a field evaluating to ``factor * field`` (exact for grids)."""
    if isinstance(field, GridField2D):
        return GridField2D(field.values * factor)
    if isinstance(field, ExprField2D):
        return ExprField2D(f"({factor!r}) * ({field.text})")
    raise SpecError(f"cannot rescale field of type {type(field).__name__}")


def field_extrema(field, n: int = 512):
    """(min, max) of a 2-D field over the dense n-by-n evaluation grid."""
    xs = np.arange(n) / n
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    pts = np.stack([gx, gy], axis=-1)
    vals = field.value(pts)
    return float(vals.min()), float(vals.max())
