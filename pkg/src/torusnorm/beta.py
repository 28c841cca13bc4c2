"""Stable norms and Mather beta-values at rational homology classes.

The two quantities are tied together by beta(h) = 0.5 * ||h||^2: results
carry both, with the relation holding exactly by construction.  A class
t * (p, q) is reduced to its primitive part before optimisation (minimisers
in primitive classes are connected loops); the m_sweep diagnostic re-runs
the optimiser on m-fold covers to monitor that homogeneity actually holds
for the computed values rather than assuming it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import ConvergenceError, NullClassError
from .loops import HomologyClass
from .metrics import MetricSpec
from .minimizer import MinOptions, MinResult, minimize_energy


@dataclass
class BetaResult:
    """A stable-norm / beta value with its certificate minimiser."""

    h: HomologyClass
    stable_norm: float
    beta: float
    certificate: MinResult
    method: str  # "direct" for a primitive class, "homogeneity" otherwise
    m_sweep: list  # [(m, stable-norm estimate from the m-fold cover), ...]

    def to_dict(self) -> dict:
        return {
            "p": self.h.p,
            "q": self.h.q,
            "scale": str(self.h.scale),
            "stable_norm": self.stable_norm,
            "beta": self.beta,
            "method": self.method,
            "m_sweep": [[m, v] for m, v in self.m_sweep],
            "converged": self.certificate.converged,
            "certificate": self.certificate.to_dict(),
        }


def _as_class(h) -> HomologyClass:
    if isinstance(h, HomologyClass):
        return h
    if isinstance(h, (tuple, list)) and len(h) == 2:
        return HomologyClass(int(h[0]), int(h[1]))
    raise NullClassError(f"cannot interpret {h!r} as a homology class")


def _cover_options(opts: MinOptions, m: int) -> MinOptions:
    if m == 1 or opts.n0 is None:
        return opts
    return replace(opts, n0=opts.n0 * m)


def stable_norm_rational(
    g: MetricSpec, h, opts: MinOptions | None = None, m_values=(1, 2, 3)
) -> BetaResult:
    """Stable norm of a nonzero rational class, with attained minimiser.

    The optimiser runs on the primitive part k0; the norm is
    scale * gcd * sqrt(2 E*).  For each m in m_values the m-fold cover
    m * k0 is optimised independently and (1/m) sqrt(2 E*_m) recorded.
    Raises ConvergenceError when no start converges.
    """
    h = _as_class(h)
    if h.is_zero:
        raise NullClassError("the stable norm is computed at nonzero classes only")
    opts = opts or MinOptions()
    k0 = h.primitive_part()
    result = minimize_energy(g, k0, opts)
    if result.n_converged == 0:
        raise ConvergenceError(
            f"no start converged for class {h} (grad_sup {result.grad_sup:.2e})",
            partial=result,
        )
    weight = h.weight
    norm = weight * math.sqrt(2.0 * result.energy)
    sweep = []
    for m in m_values:
        if m == 1:
            e_m = result.energy
        else:
            cover = minimize_energy(g, (m * k0[0], m * k0[1]), _cover_options(opts, m))
            e_m = cover.energy
        sweep.append((int(m), math.sqrt(2.0 * e_m) / m))
    method = "direct" if weight == 1.0 else "homogeneity"
    return BetaResult(
        h=h,
        stable_norm=norm,
        beta=0.5 * norm * norm,
        certificate=result,
        method=method,
        m_sweep=sweep,
    )


def beta_rational(g: MetricSpec, h, opts: MinOptions | None = None, m_values=(1, 2, 3)) -> BetaResult:
    """Mather beta at a rational class (same record as the stable norm)."""
    return stable_norm_rational(g, h, opts, m_values)


def batch_beta(
    g: MetricSpec, classes, opts: MinOptions | None = None, workers: int = 1, m_values=(1,)
) -> list:
    """BetaResults for a class list, in input order; classes run concurrently."""
    hs = [_as_class(h) for h in classes]

    def one(h):
        return stable_norm_rational(g, h, opts, m_values)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, hs))
    return [one(h) for h in hs]


# ---------------------------------------------------------------------------
# unit-ball sampling through rational directions


def rational_direction(theta: float, max_den: int = 20) -> tuple:
    """Best bounded-denominator rational class aligned with (cos t, sin t)."""
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) >= abs(s):
        f = Fraction(s / c).limit_denominator(max_den)
        p, q = f.denominator, f.numerator
        if c < 0:
            p, q = -p, -q
    else:
        f = Fraction(c / s).limit_denominator(max_den)
        p, q = f.numerator, f.denominator
        if s < 0:
            p, q = -p, -q
    g = math.gcd(abs(p), abs(q))
    return (p // g, q // g)


@dataclass
class NormBallPoint:
    theta: float
    theta_achieved: float
    k: tuple
    radius: float


def norm_ball(g: MetricSpec, n_dirs: int, opts: MinOptions | None = None, max_den: int = 20) -> list:
    """Unit-ball boundary of the stable norm, sampled at n_dirs directions.

    Each direction is replaced by its best rational convergent with bounded
    denominator; the radius is |k|_2 / ||k|| evaluated at that exact rational
    direction (theta_achieved records the substitution).
    """
    if n_dirs < 4:
        raise NullClassError("norm_ball needs at least 4 directions")
    cache = {}
    out = []
    for j in range(n_dirs):
        theta = 2.0 * math.pi * j / n_dirs
        k = rational_direction(theta, max_den)
        if k not in cache:
            cache[k] = stable_norm_rational(g, k, opts, m_values=(1,)).stable_norm
        radius = math.hypot(*k) / cache[k]
        out.append(NormBallPoint(theta, math.atan2(k[1], k[0]), k, radius))
    return out


def norm_ball_convex(points, tol: float = 1e-9) -> bool:
    """Cross-product convexity test on the sampled ball boundary."""
    uniq = {}
    for pt in points:
        uniq[pt.k] = pt
    pts = sorted(uniq.values(), key=lambda pt: pt.theta_achieved % (2 * math.pi))
    if len(pts) < 3:
        return True
    xy = np.array(
        [
            (p.radius * math.cos(p.theta_achieved), p.radius * math.sin(p.theta_achieved))
            for p in pts
        ]
    )
    scale = float(np.abs(xy).max())
    n = len(xy)
    for i in range(n):
        a, b, c = xy[i], xy[(i + 1) % n], xy[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross < -tol * scale * scale:
            return False
    return True


# ---------------------------------------------------------------------------
# norm axioms


@dataclass
class AxiomCheck:
    name: str
    subject: str
    observed: float
    bound: float
    passed: bool


@dataclass
class NormAxiomReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "checks": [
                {
                    "name": c.name,
                    "subject": c.subject,
                    "observed": c.observed,
                    "bound": c.bound,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def check_norm_axioms(g: MetricSpec, classes, opts: MinOptions | None = None) -> NormAxiomReport:
    """Symmetry, homogeneity and triangle checks on the computed norm.

    Violations become report entries, never exceptions.  Homogeneity is
    checked honestly through m-fold covers (independent optimisations), not
    through the gcd reduction that would make it true by construction.
    """
    hs = [_as_class(h) for h in classes]
    checks = []
    norms = {}

    def norm_of(h, m_values=(1,)):
        try:
            return stable_norm_rational(g, h, opts, m_values=m_values)
        except ConvergenceError as exc:
            checks.append(AxiomCheck("convergence", str(_as_class(h)), float("nan"), 0.0, False))
            return None

    for h in hs:
        res = norm_of(h, m_values=(1, 2, 3))
        if res is None:
            continue
        norms[(h.p, h.q)] = res.stable_norm
        neg = norm_of((-h.p, -h.q))
        if neg is not None:
            rel = abs(res.stable_norm - neg.stable_norm) / res.stable_norm
            checks.append(AxiomCheck("symmetry", str(h), rel, 1e-6, rel <= 1e-6))
        base = res.m_sweep[0][1]
        for m, val in res.m_sweep[1:]:
            rel = abs(val - base) / base
            checks.append(AxiomCheck(f"homogeneity_m{m}", str(h), rel, 1e-4, rel <= 1e-4))
    for i in range(len(hs)):
        for j in range(i + 1, len(hs)):
            hi, hj = hs[i], hs[j]
            if hi.p * hj.q - hi.q * hj.p == 0:
                continue  # dependent pair: the sum can hit zero / collinear cases
            p, q = hi.p + hj.p, hi.q + hj.q
            if (p == 0 and q == 0) or (hi.p, hi.q) not in norms or (hj.p, hj.q) not in norms:
                continue
            res = norm_of((p, q))
            if res is None:
                continue
            lhs = norms[(hi.p, hi.q)] + norms[(hj.p, hj.q)]
            slack = res.stable_norm - lhs
            bound = 1e-4 * lhs
            checks.append(
                AxiomCheck("triangle", f"{hi}+{hj}", slack, bound, slack <= bound)
            )
    return NormAxiomReport(checks)
