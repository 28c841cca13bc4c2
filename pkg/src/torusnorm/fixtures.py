"""Named and randomly generated metric fixtures for tests and demos."""

from __future__ import annotations

import numpy as np

from .fields import ExprField2D, GridField2D
from .metrics import ConformalMetric, FlatMetric, GeneralMetric, LiouvilleMetric, MetricSpec


def flat_identity() -> FlatMetric:
    return FlatMetric(np.eye(2))


def flat_diag(a: float, b: float) -> FlatMetric:
    return FlatMetric([[a, 0.0], [0.0, b]])


def conformal_dip(depth: float = 0.5, sharpness: float = 50.0, center=(0.5, 0.5)) -> ConformalMetric:
    """Radial conformal dip: factor 1 - depth * exp(-sharpness * r^2), max 1."""
    cx, cy = center
    expr = f"1 - {depth!r}*exp(-{sharpness!r}*((x - {cx!r})**2 + (y - {cy!r})**2))"
    return ConformalMetric(ExprField2D(expr))


def conformal_wave(amplitude: float = 0.5) -> ConformalMetric:
    """Factor 1 + amplitude * sin(2 pi x)^2 (max 1 + amplitude at x = 1/4, 3/4)."""
    return ConformalMetric(ExprField2D(f"1 + {amplitude!r}*sin(2*pi*x)**2"))


def conformal_bump_grid(
    height: float = 0.5, radius: float = 0.085, n: int = 128, center=(0.5, 0.5)
) -> ConformalMetric:
    """Compactly supported bump as a grid factor: exactly 1 outside the bump.

    The cosine-squared profile vanishes at the stated radius; bilinear
    interpolation bleeds at most one cell beyond it, so with the defaults
    the factor is exactly 1 outside the disk of radius radius + sqrt(2)/n
    (< 0.1) around the centre.
    """
    xs = np.arange(n) / n
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    # nearest periodic representative of the offset
    dx = (gx - center[0] + 0.5) % 1.0 - 0.5
    dy = (gy - center[1] + 0.5) % 1.0 - 0.5
    r = np.hypot(dx, dy)
    profile = np.where(r < radius, np.cos(0.5 * np.pi * r / radius) ** 2, 0.0)
    return ConformalMetric(GridField2D(1.0 + height * profile))


def liouville_wave() -> LiouvilleMetric:
    return LiouvilleMetric("1", "1 + 0.5*sin(pi*y)**2")


def liouville_two_wave() -> LiouvilleMetric:
    return LiouvilleMetric("2 + 0.3*cos(2*pi*x)", "1.5 + 0.25*sin(2*pi*y)")


def liouville_mixed() -> LiouvilleMetric:
    return LiouvilleMetric("1 + 0.3*sin(pi*x)**2", "2 + 0.4*cos(2*pi*y)")


def banded_pair() -> tuple:
    """A pair with equality exactly at the horizontal class.

    g1 has a deep horizontal valley at y = 1/2, so its (1, 0)-minimisers sit
    on that circle; the conformal ratio of g2 against g1 attains its maximum
    exactly there while staying above 1 elsewhere.  Equality then holds at
    (1, 0) but at no transversal class.
    """
    g1 = ConformalMetric(ExprField2D("10 - 9*exp(-30*(y - 0.5)**2)"))
    ratio = ExprField2D("1 + exp(-30*(y - 0.5)**2)")
    g2_factor = ExprField2D("(10 - 9*exp(-30*(y - 0.5)**2)) * (1 + exp(-30*(y - 0.5)**2))")
    return g1, ConformalMetric(g2_factor), ratio


def _random_trig(rng, n_modes: int = 2, amp: float = 1.0) -> str:
    """A random band-limited expression bounded by amp in absolute value."""
    terms = []
    total = 0.0
    coeffs = []
    for jx in range(n_modes + 1):
        for jy in range(n_modes + 1):
            if jx == 0 and jy == 0:
                continue
            c = rng.normal() / (1 + jx + jy)
            coeffs.append((jx, jy, c, rng.integers(0, 2)))
            total += abs(c)
    for jx, jy, c, kind in coeffs:
        c_scaled = amp * c / total
        fx = f"sin(2*pi*{jx}*x)" if kind else f"cos(2*pi*{jx}*x)"
        fy = f"cos(2*pi*{jy}*y)"
        if jx == 0:
            term = f"{c_scaled!r}*{fy}"
        elif jy == 0:
            term = f"{c_scaled!r}*{fx}"
        else:
            term = f"{c_scaled!r}*{fx}*{fy}"
        terms.append(term)
    return " + ".join(terms)


def random_flat(rng) -> FlatMetric:
    a = float(rng.uniform(0.5, 2.0))
    c = float(rng.uniform(0.5, 2.0))
    b = float(rng.uniform(-0.8, 0.8)) * np.sqrt(a * c)
    return FlatMetric([[a, b], [b, c]])


def random_conformal(rng, base: FlatMetric | None = None) -> ConformalMetric:
    # exp of a bounded random wave keeps the factor positive by construction
    expr = f"exp({_random_trig(rng, 2, 0.5)})"
    return ConformalMetric(ExprField2D(expr), base or flat_identity())


def random_liouville(rng) -> LiouvilleMetric:
    a1 = float(rng.uniform(0.2, 0.6))
    a2 = float(rng.uniform(0.2, 0.6))
    p1 = int(rng.integers(1, 3))
    p2 = int(rng.integers(1, 3))
    f1 = f"{float(rng.uniform(0.8, 2.0))!r} + {a1!r}*cos(2*pi*{p1}*x)"
    f2 = f"{float(rng.uniform(0.8, 2.0))!r} + {a2!r}*sin(2*pi*{p2}*y)"
    return LiouvilleMetric(f1, f2)


def random_general(rng, n: int = 16) -> GeneralMetric:
    """Smooth random SPD field: rotated diagonal with log-bounded eigenvalues."""
    xs = np.arange(n) / n
    gx, gy = np.meshgrid(xs, xs, indexing="xy")

    def wave():
        w = np.zeros_like(gx)
        for _ in range(3):
            jx, jy = rng.integers(0, 3, size=2)
            w += rng.normal() * np.sin(2 * np.pi * (jx * gx + jy * gy) + rng.uniform(0, 2 * np.pi))
        return w / 6.0

    theta = wave() * np.pi
    l1 = np.exp(wave())
    l2 = np.exp(wave())
    c, s = np.cos(theta), np.sin(theta)
    g = np.empty((n, n, 2, 2))
    g[..., 0, 0] = c * c * l1 + s * s * l2
    g[..., 1, 1] = s * s * l1 + c * c * l2
    g[..., 0, 1] = g[..., 1, 0] = c * s * (l1 - l2)
    return GeneralMetric(g)


def random_metric(seed: int) -> MetricSpec:
    rng = np.random.default_rng(seed)
    kind = rng.integers(0, 4)
    if kind == 0:
        return random_flat(rng)
    if kind == 1:
        return random_conformal(rng)
    if kind == 2:
        return random_liouville(rng)
    return random_general(rng)


def random_pair(seed: int) -> tuple:
    """A random (g1, g2) pair drawn from three comparison families.

    Families: exactly homothetic pairs, conformally dominated pairs
    (factor >= 1 with genuine variation), and structurally unrelated pairs.
    """
    rng = np.random.default_rng([17, seed])
    family = seed % 3
    g1 = random_metric(int(rng.integers(0, 2**31)))
    if family == 0:
        c = float(rng.uniform(0.3, 3.0))
        return g1, g1.scaled(c)
    if family == 1:
        lift = f"1 + exp({_random_trig(rng, 2, 0.6)})"
        if isinstance(g1, ConformalMetric):
            combined = ExprField2D(f"({g1.factor.text}) * ({lift})")
            return g1, ConformalMetric(combined, g1.base)
        if isinstance(g1, FlatMetric):
            return g1, ConformalMetric(ExprField2D(lift), g1)
        g1 = random_flat(rng)
        return g1, ConformalMetric(ExprField2D(lift), g1)
    return g1, random_metric(int(rng.integers(0, 2**31)))
