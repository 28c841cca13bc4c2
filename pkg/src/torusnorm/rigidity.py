"""Pointwise comparison of two metrics at homology classes.

For each class h the scan computes beta_1(h), beta_2(h) and the distortion
constant C of g2 against g1, then inspects the gap C * beta_1 - beta_2.
The gap is nonnegative up to numerical tolerance for any pair of metrics;
a (near-)zero gap flags equality, in which case the metrics must agree up
to the factor C on the first metric's Mather set.  That necessary condition
is probed on the approximate Mather samples (fiber-ratio residual) and
through the second metric's length of the first metric's minimisers
(cross-minimisation excess).  Finite samples can falsify homothety but never
fully confirm it; entries record this as diagnostics, not proofs.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .beta import BetaResult, stable_norm_rational, _as_class
from .errors import TorusNormError
from .fields import field_extrema, rescale_field
from .loops import DiscreteLoop, HomologyClass, loop_length
from .metrics import ConformalMetric, MetricSpec, distortion_constant
from .minimizer import MinOptions, MinResult, distinct_minima, minimize_energy

#: relative tolerance for flagging beta_2 = C * beta_1
DEFAULT_TOL_REL = 1e-3
#: one-sided slack allowed on the comparison inequality itself
GAP_TOL_REL = 1e-6
#: factor range below which a normalised conformal factor counts as constant
CONSTANT_FACTOR_TOL = 1e-12


@dataclass
class MatherSample:
    """Weighted (x, v) samples approximating the Mather set of class h."""

    h: HomologyClass
    positions: np.ndarray  # (n, 2) in [0,1)^2
    velocities: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,), sums to 1
    source: list  # contributing minimiser loops

    def rotation_vector(self) -> np.ndarray:
        return (self.weights[:, None] * self.velocities).sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "p": self.h.p,
            "q": self.h.q,
            "scale": str(self.h.scale),
            "n_samples": len(self.weights),
            "n_loops": len(self.source),
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "weights": self.weights.tolist(),
        }


def mather_sample_from_result(h, result: MinResult, dedup_tol: float = 1e-3) -> MatherSample:
    """Build Mather samples from the near-minimal loops of a finished run."""
    h = _as_class(h)
    loops = distinct_minima(result, dedup_tol)
    weight = h.weight
    pos, vel, wts = [], [], []
    for loop in loops:
        du, mid = loop.segments()
        v = du * loop.n * weight
        pos.append(mid - np.floor(mid))
        vel.append(v)
        wts.append(np.full(loop.n, 1.0 / (len(loops) * loop.n)))
    sample = MatherSample(
        h=h,
        positions=np.concatenate(pos),
        velocities=np.concatenate(vel),
        weights=np.concatenate(wts),
        source=loops,
    )
    rot = sample.rotation_vector()
    if np.max(np.abs(rot - h.as_vector())) > 1e-3:
        raise TorusNormError(f"Mather sample rotation vector {rot} drifted from {h}")
    if np.min(np.sum(sample.velocities**2, axis=1)) == 0.0:
        raise TorusNormError("Mather sample contains a zero velocity")
    return sample


def mather_sample(g: MetricSpec, h, opts: MinOptions | None = None) -> MatherSample:
    """Approximate Mather set of class h for the metric g."""
    h = _as_class(h)
    opts = opts or MinOptions()
    result = minimize_energy(g, h.primitive_part(), opts)
    if result.n_converged == 0:
        raise TorusNormError(f"no converged minimiser for class {h}")
    return mather_sample_from_result(h, result, opts.dedup_tol)


def projected_coverage(g: MetricSpec, h, cell_n: int, opts: MinOptions | None = None) -> float:
    """Fraction of a cell_n x cell_n partition hit by projected Mather samples.

    The number of starts is raised to at least 8 * cell_n before measuring.
    """
    opts = opts or MinOptions()
    opts = replace(opts, starts=max(opts.starts, 8 * cell_n))
    sample = mather_sample(g, h, opts)
    cells = np.floor(sample.positions * cell_n).astype(int) % cell_n
    hit = {(int(a), int(b)) for a, b in cells}
    return len(hit) / float(cell_n * cell_n)


@dataclass
class ComparisonEntry:
    h: HomologyClass
    beta1: float | None = None
    beta2: float | None = None
    distortion: float | None = None
    distortion_argmax: tuple | None = None
    gap: float | None = None
    equality: bool = False
    violation: bool = False
    homothety_residual: float | None = None
    cross_min_excess: float | None = None
    inconclusive: bool = False
    message: str = ""
    sample: MatherSample | None = None
    beta1_error: float = 0.0
    beta2_error: float = 0.0

    def gap_error_estimate(self) -> float:
        # refinement-based estimates plus a 1e-8 relative floor: gaps below
        # ~3e-8 relative are treated as unresolvable by the optimiser
        c = self.distortion or 1.0
        return c * self.beta1_error + self.beta2_error + 1e-8 * c * (self.beta1 or 0.0)

    def to_dict(self, with_sample: bool = True) -> dict:
        d = {
            "p": self.h.p,
            "q": self.h.q,
            "scale": str(self.h.scale),
            "beta1": self.beta1,
            "beta2": self.beta2,
            "distortion": self.distortion,
            "distortion_argmax": list(self.distortion_argmax) if self.distortion_argmax else None,
            "gap": self.gap,
            "equality": self.equality,
            "violation": self.violation,
            "homothety_residual": self.homothety_residual,
            "cross_min_excess": self.cross_min_excess,
            "inconclusive": self.inconclusive,
            "message": self.message,
        }
        if with_sample and self.sample is not None:
            d["mather_sample"] = self.sample.to_dict()
        return d


def _beta_error_estimate(res: BetaResult) -> float:
    w = res.h.weight
    return w * w * res.certificate.refinement_error() + 1e-12


def compare_at_class(
    g1: MetricSpec,
    g2: MetricSpec,
    h,
    tol_rel: float = DEFAULT_TOL_REL,
    opts: MinOptions | None = None,
    grid_n: int = 64,
    distortion: tuple | None = None,
) -> ComparisonEntry:
    """One class of the comparison scan; failures mark the entry inconclusive.

    ``distortion`` may carry a precomputed (C, argmax) pair to avoid
    recomputing the constant for every class of a scan.
    """
    h = _as_class(h)
    opts = opts or MinOptions()
    entry = ComparisonEntry(h=h)
    try:
        if distortion is None:
            distortion = distortion_constant(g1, g2, grid_n)
        entry.distortion, entry.distortion_argmax = distortion
        res1 = stable_norm_rational(g1, h, opts, m_values=(1,))
        res2 = stable_norm_rational(g2, h, opts, m_values=(1,))
    except TorusNormError as exc:
        entry.inconclusive = True
        entry.message = str(exc)
        return entry
    entry.beta1, entry.beta2 = res1.beta, res2.beta
    entry.beta1_error = _beta_error_estimate(res1)
    entry.beta2_error = _beta_error_estimate(res2)
    bound = entry.distortion * entry.beta1
    entry.gap = bound - entry.beta2
    entry.violation = entry.gap < -GAP_TOL_REL * bound
    entry.equality = entry.gap <= tol_rel * bound
    if entry.equality:
        try:
            sample = mather_sample_from_result(h, res1.certificate, opts.dedup_tol)
        except TorusNormError as exc:
            entry.inconclusive = True
            entry.message = str(exc)
            return entry
        entry.sample = sample
        ratio = g2.quadratic(sample.positions, sample.velocities) / g1.quadratic(
            sample.positions, sample.velocities
        )
        entry.homothety_residual = float(np.abs(ratio - entry.distortion).max())
        w = h.weight
        excess = -np.inf
        for loop in sample.source:
            cand = 0.5 * (w * loop_length(g2, loop)) ** 2
            excess = max(excess, cand - entry.beta2)
        entry.cross_min_excess = float(excess)
    return entry


@dataclass
class ComparisonReport:
    entries: list
    distortion: float
    tol_rel: float

    @property
    def equality_classes(self) -> list:
        return [e.h for e in self.entries if e.equality and not e.inconclusive]

    @property
    def inconclusive_classes(self) -> list:
        return [e.h for e in self.entries if e.inconclusive]

    @property
    def inequality_ok(self) -> bool:
        return not any(e.violation for e in self.entries if not e.inconclusive)

    @property
    def homothety_region(self) -> list:
        """Mather samples of all equality classes (the homothety certificate)."""
        return [e.sample for e in self.entries if e.equality and e.sample is not None]

    def verdict(self) -> str:
        if self.inconclusive_classes:
            return "inconclusive entries present"
        if not self.inequality_ok:
            return "numerical violation of the comparison inequality"
        if self.equality_classes:
            eq = ", ".join(str(h) for h in self.equality_classes)
            return f"inequality holds everywhere; equality at {eq}"
        return "inequality holds everywhere; no equality class"

    def to_dict(self) -> dict:
        return {
            "distortion": self.distortion,
            "tol_rel": self.tol_rel,
            "verdict": self.verdict(),
            "inequality_ok": self.inequality_ok,
            "equality_classes": [[h.p, h.q] for h in self.equality_classes],
            "inconclusive_classes": [[h.p, h.q] for h in self.inconclusive_classes],
            "entries": [e.to_dict() for e in self.entries],
        }

    def csv_rows(self) -> list:
        rows = []
        for e in self.entries:
            rows.append(
                [
                    e.h.p,
                    e.h.q,
                    e.beta1,
                    e.beta2,
                    e.distortion,
                    e.gap,
                    e.equality,
                    e.homothety_residual,
                ]
            )
        return rows


CSV_HEADER = ["p", "q", "beta1", "beta2", "C", "gap", "equality", "residual"]


def rigidity_scan(
    g1: MetricSpec,
    g2: MetricSpec,
    classes,
    tol_rel: float = DEFAULT_TOL_REL,
    opts: MinOptions | None = None,
    grid_n: int = 64,
    workers: int = 1,
) -> ComparisonReport:
    """Comparison entries for every class, plus the aggregated verdicts."""
    hs = [_as_class(h) for h in classes]
    if not hs:
        raise TorusNormError("rigidity scan needs a nonempty class list")
    if any(h.is_zero for h in hs):
        raise TorusNormError("rigidity scan classes must be nonzero")
    dist = distortion_constant(g1, g2, grid_n)

    def one(h):
        return compare_at_class(g1, g2, h, tol_rel, opts, grid_n, distortion=dist)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, hs))
    else:
        entries = [one(h) for h in hs]
    return ComparisonReport(entries=entries, distortion=dist[0], tol_rel=tol_rel)


@dataclass
class FlatRigidityResult:
    verdict: str  # "flat" | "not flat" | "inconclusive"
    normalisation: float
    distortion_check: float
    factor_range: float
    report: ComparisonReport

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "normalisation": self.normalisation,
            "distortion_check": self.distortion_check,
            "factor_range": self.factor_range,
            "report": self.report.to_dict(),
        }


def flat_rigidity_check(
    g: ConformalMetric,
    classes,
    tol_rel: float = DEFAULT_TOL_REL,
    opts: MinOptions | None = None,
    grid_n: int = 64,
) -> FlatRigidityResult:
    """Is a conformal metric actually its normalised flat representative?

    The factor is divided by its maximum (so the distortion against the flat
    base becomes 1, re-verified to 1e-8), then beta is compared classwise
    against the base.  Equality at some class together with a genuinely
    constant normalised factor gives "flat"; gaps above three times the
    estimated numerical error at every class give "not flat"; anything in
    between -- e.g. a perturbation below numerical resolution -- stays
    "inconclusive".
    """
    if not isinstance(g, ConformalMetric):
        raise TorusNormError("flat_rigidity_check expects a conformal metric")
    base = g.base
    m, _ = distortion_constant(base, g, grid_n)
    normalised = g.with_factor(rescale_field(g.factor, 1.0 / m))
    c_check, _ = distortion_constant(base, normalised, grid_n)
    if abs(c_check - 1.0) > 1e-8:
        raise TorusNormError(f"normalisation failed: distortion {c_check} != 1")
    report = rigidity_scan(base, normalised, classes, tol_rel, opts, grid_n)
    lo, hi = field_extrema(normalised.factor)
    factor_range = hi - lo
    if report.inconclusive_classes:
        verdict = "inconclusive"
    elif report.equality_classes and factor_range <= CONSTANT_FACTOR_TOL:
        verdict = "flat"
    elif all(
        e.gap is not None and e.gap > 3.0 * e.gap_error_estimate() for e in report.entries
    ):
        verdict = "not flat"
    else:
        verdict = "inconclusive"
    return FlatRigidityResult(
        verdict=verdict,
        normalisation=m,
        distortion_check=c_check,
        factor_range=factor_range,
        report=report,
    )
