"""Beta-values for kinetic-plus-potential Tonelli Lagrangians.

L(x, v) = 0.5 * g_x(v, v) + V(x) with the potential normalised so that
max V = 0 on the evaluation grid.  Note the sign convention: the potential
is ADDED to the Lagrangian as stored (no mechanical L = K - U flip), so a
normalised V <= 0 lowers the action.  Fiber convexity and superlinearity
are automatic for this form.

For a rational class h = t * (p, q) the minimisation runs over m-fold
covers of the primitive winding with the period T fixed by k / T = h, so
the rotation vector is exact by construction; the reported value is the
minimum over m, with per-m diagnostics exposed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .beta import _as_class, beta_rational
from .errors import ConvergenceError, SpecError, TorusNormError
from .fields import ExprField2D, GridField2D, field_extrema, scalar_field_2d, shift_field
from .loops import DiscreteLoop, HomologyClass, loop_energy
from .metrics import FlatMetric, MetricSpec, metric_from_dict
from .minimizer import MinOptions, MinResult, minimize_objective
from .oracles import flat_beta

#: grid resolution on which max V = 0 is enforced
NORMALISATION_GRID = 512
#: |V| below this counts as identically zero (machine-zero guard)
ZERO_POTENTIAL_TOL = 1e-12
#: |V| above this counts as a genuine perturbation
NONZERO_POTENTIAL_FLOOR = 1e-6


@dataclass
class TonelliSpec:
    """Kinetic-plus-potential Lagrangian on the torus."""

    kinetic: MetricSpec
    potential: object  # 2-D scalar field
    normalized: bool = False

    def normalize(self) -> "TonelliSpec":
        """Shift the potential so its grid maximum is exactly zero."""
        v2 = normalize_potential(self.potential)
        return TonelliSpec(self.kinetic, v2, normalized=True)

    def potential_range(self):
        return field_extrema(self.potential, NORMALISATION_GRID)

    def to_dict(self) -> dict:
        d = dict(self.kinetic.to_dict())
        d["potential"] = self.potential.to_json()
        return d


def normalize_potential(potential):
    """V - max V, with the maximum taken over the dense evaluation grid."""
    if not isinstance(potential, (ExprField2D, GridField2D)):
        potential = scalar_field_2d(potential)
    _, hi = field_extrema(potential, NORMALISATION_GRID)
    return shift_field(potential, -hi) if hi != 0.0 else potential


def tonelli_from_dict(d: dict) -> TonelliSpec:
    """Metric JSON extended with a 'potential' field (expression or grid)."""
    if "potential" not in d:
        raise SpecError("Tonelli spec needs a 'potential' field")
    metric = metric_from_dict({k: v for k, v in d.items() if k != "potential"})
    return TonelliSpec(metric, scalar_field_2d(d["potential"]))


def load_tonelli(path) -> TonelliSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read Tonelli spec {path}: {exc}") from exc
    return tonelli_from_dict(d)


def _require_normalized(spec: TonelliSpec):
    _, hi = spec.potential_range()
    if abs(hi) > 1e-10:
        raise SpecError(
            f"potential is not normalised (grid max {hi:g}); call .normalize() first"
        )


def average_action(spec: TonelliSpec, loop: DiscreteLoop, period: float) -> float:
    """Discrete average action of the loop traversed with period T.

    Sum over segments of |du|^2_g N / (2 T^2) + V(mid) / N; for V = 0 and
    T = 1 this is exactly the loop energy.
    """
    if period <= 0:
        raise SpecError("period must be positive")
    du, mid = loop.segments()
    kin = 0.5 * loop.n * float(np.sum(spec.kinetic.quadratic(mid, du))) / period**2
    pot = float(np.sum(spec.potential.value(mid))) / loop.n
    return kin + pot


def _action_value_and_grad(spec: TonelliSpec, loop: DiscreteLoop, period: float):
    n = loop.n
    inv_t2 = 1.0 / period**2

    def vag(nodes):
        cur = loop.with_nodes(nodes)
        du, mid = cur.segments()
        q, xg, gv = spec.kinetic.quadratic_with_grad(mid, du)
        value = 0.5 * n * inv_t2 * float(np.sum(q)) + float(
            np.sum(spec.potential.value(mid))
        ) / n
        vgrad = spec.potential.grad(mid) / (2.0 * n)
        fwd = -n * inv_t2 * gv + 0.25 * n * inv_t2 * xg + vgrad
        bwd = n * inv_t2 * gv + 0.25 * n * inv_t2 * xg + vgrad
        return value, fwd + np.roll(bwd, 1, axis=0)

    return vag


@dataclass
class ManeBetaResult:
    """Minimal average action at a rational rotation vector."""

    h: HomologyClass
    value: float
    per_m: list  # [(m, value, converged), ...]
    certificate: MinResult
    best_m: int
    period: float

    def to_dict(self) -> dict:
        return {
            "p": self.h.p,
            "q": self.h.q,
            "scale": str(self.h.scale),
            "value": self.value,
            "best_m": self.best_m,
            "period": self.period,
            "per_m": [[m, v, c] for m, v, c in self.per_m],
            "converged": self.certificate.converged,
            "certificate": self.certificate.to_dict(),
        }


def beta_mane(spec: TonelliSpec, h, opts: MinOptions | None = None, m_max: int = 3) -> ManeBetaResult:
    """Beta of the perturbed Lagrangian at a nonzero rational class.

    For m = 1 .. m_max the winding m * k0 is minimised with the period
    T = m / (scale * gcd) (so the rotation vector is h exactly); the minimum
    over m is reported.
    """
    h = _as_class(h)
    if h.is_zero:
        raise TorusNormError("beta_mane needs a nonzero class")
    _require_normalized(spec)
    opts = opts or MinOptions()
    k0 = h.primitive_part()
    g_mean = spec.kinetic.mean_matrix()
    weight = h.weight
    per_m = []
    best = None
    for m in range(1, m_max + 1):
        k = (m * k0[0], m * k0[1])
        period = m / weight
        m_opts = opts if (m == 1 or opts.n0 is None) else replace(opts, n0=opts.n0 * m)

        def objective_for_loop(loop, _period=period):
            return _action_value_and_grad(spec, loop, _period)

        result = minimize_objective(
            objective_for_loop,
            k,
            m_opts,
            kinetic_scale_for_n=lambda n, _p=period: n / _p**2,
            g_mean=g_mean,
            recompute=lambda loop, _p=period: (
                average_action(spec, loop, _p),
                math.sqrt(2.0 * loop_energy(spec.kinetic, loop)),
            ),
        )
        per_m.append((m, result.energy, result.converged))
        if best is None or result.energy < best[1]:
            best = (m, result.energy, result, period)
    if all(not c for _, _, c in per_m):
        raise ConvergenceError(f"action minimisation failed at every cover for {h}", partial=per_m)
    return ManeBetaResult(
        h=h, value=best[1], per_m=per_m, certificate=best[2], best_m=best[0], period=best[3]
    )


@dataclass
class ManeGapEntry:
    h: HomologyClass
    beta_unperturbed: float
    beta_perturbed: float
    gap: float
    ok: bool
    error_estimate: float


@dataclass
class ManeInequalityReport:
    entries: list

    @property
    def all_ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "all_ok": self.all_ok,
            "entries": [
                {
                    "p": e.h.p,
                    "q": e.h.q,
                    "beta_unperturbed": e.beta_unperturbed,
                    "beta_perturbed": e.beta_perturbed,
                    "gap": e.gap,
                    "ok": e.ok,
                }
                for e in self.entries
            ],
        }


def _unperturbed_beta(kinetic: MetricSpec, h: HomologyClass, opts) -> tuple:
    """(beta, error estimate); closed form for flat kinetic parts."""
    if isinstance(kinetic, FlatMetric):
        return flat_beta(kinetic.matrix, h), 0.0
    res = beta_rational(kinetic, h, opts, m_values=(1,))
    w = h.weight
    return res.beta, w * w * res.certificate.refinement_error()


def mane_inequality_check(
    kinetic: MetricSpec, potential, classes, opts: MinOptions | None = None, m_max: int = 3
) -> ManeInequalityReport:
    """Check beta_perturbed <= beta_unperturbed at every class.

    The tolerance is 1e-6 relative to the unperturbed value; violations are
    recorded in the report, not raised.
    """
    spec = TonelliSpec(kinetic, potential).normalize()
    entries = []
    for h in classes:
        h = _as_class(h)
        b0, err0 = _unperturbed_beta(kinetic, h, opts)
        res = beta_mane(spec, h, opts, m_max)
        gap = b0 - res.value
        w = h.weight
        err = err0 + w * w * res.certificate.refinement_error() + 1e-8 * abs(b0)
        entries.append(
            ManeGapEntry(
                h=h,
                beta_unperturbed=b0,
                beta_perturbed=res.value,
                gap=gap,
                ok=gap >= -1e-6 * abs(b0),
                error_estimate=err,
            )
        )
    return ManeInequalityReport(entries)


@dataclass
class ManeRigidityResult:
    verdict: str  # "zero potential" | "nonzero potential" | "inconclusive"
    potential_sup: float
    report: ManeInequalityReport

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "potential_sup": self.potential_sup,
            "report": self.report.to_dict(),
        }


def mane_rigidity_check(
    kinetic: FlatMetric, potential, classes, opts: MinOptions | None = None, m_max: int = 3
) -> ManeRigidityResult:
    """Equality of beta with the unperturbed flat value detects V = 0.

    For a flat kinetic part the unperturbed beta is the exact quadratic
    form, so any genuine potential shows up as a strictly positive gap at
    every class; sub-resolution potentials return "inconclusive".
    """
    if not isinstance(kinetic, FlatMetric):
        raise TorusNormError("mane_rigidity_check expects a flat kinetic part")
    spec = TonelliSpec(kinetic, potential).normalize()
    lo, hi = spec.potential_range()
    sup = max(abs(lo), abs(hi))
    report = mane_inequality_check(kinetic, potential, classes, opts, m_max)
    gaps_small = all(abs(e.gap) <= max(3.0 * e.error_estimate, 1e-8) for e in report.entries)
    gaps_positive = all(e.gap > 3.0 * e.error_estimate for e in report.entries)
    if sup <= ZERO_POTENTIAL_TOL and gaps_small:
        verdict = "zero potential"
    elif sup > NONZERO_POTENTIAL_FLOOR and gaps_positive:
        verdict = "nonzero potential"
    else:
        verdict = "inconclusive"
    return ManeRigidityResult(verdict=verdict, potential_sup=sup, report=report)
