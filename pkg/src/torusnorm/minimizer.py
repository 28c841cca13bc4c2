"""Minimal-energy loops in a fixed winding class.

Multistart first-order descent with Armijo backtracking and mesh refinement
(N0 -> 2 N0 -> 4 N0 with re-optimisation).  The descent direction is the
gradient preconditioned by the circulant second-difference operator of the
loop (solved per Fourier mode with the mean metric matrix), which removes
the O(N^2) stiffness of the discrete energy; stationarity is always measured
on the raw gradient.  Optional heavy-ball momentum is available but off by
default.  Runs are deterministic in the seed; starts may execute
concurrently and merge in seed order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NullClassError
from .loops import DiscreteLoop, init_loop, loop_energy, loop_length, loop_speed_ratio, resample
from .metrics import MetricSpec


@dataclass
class MinOptions:
    """Knobs for the multistart minimiser.

    n0=None selects the default 64 * max(|p|, |q|, 1) initial node count.
    """

    n0: int | None = None
    levels: int = 2
    starts: int = 12
    grad_tol: float = 1e-7
    max_iters: int = 2000
    seed: int = 0
    amplitude: float = 0.12
    rel_tol: float = 1e-4
    dedup_tol: float = 1e-3
    momentum: float = 0.0
    precond_eps: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.n0 is not None and self.n0 < 8:
            raise ValueError("n0 must be at least 8")
        if self.starts < 1:
            raise ValueError("starts must be at least 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.levels < 0:
            raise ValueError("levels must be nonnegative")


@dataclass
class StartOutcome:
    loop: DiscreteLoop
    energy: float
    grad_sup: float
    iterations: int
    level_energies: list
    converged: bool


@dataclass
class MinResult:
    """Best loop found plus convergence diagnostics and near-minimal peers."""

    loop: DiscreteLoop
    energy: float
    length: float
    all_minima: list
    converged: bool
    iterations: int
    grad_sup: float
    speed_ratio: float
    level_energies: list
    n_starts: int
    n_converged: int

    def to_dict(self) -> dict:
        return {
            "k": list(self.loop.k),
            "energy": self.energy,
            "length": self.length,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_sup": self.grad_sup,
            "speed_ratio": self.speed_ratio,
            "level_energies": list(self.level_energies),
            "n_starts": self.n_starts,
            "n_converged": self.n_converged,
            "loop": self.loop.to_dict(),
            "n_minima": len(self.all_minima),
        }

    def refinement_error(self) -> float:
        """Crude per-run energy error estimate from the last mesh refinement."""
        if len(self.level_energies) >= 2:
            return abs(self.level_energies[-1] - self.level_energies[-2])
        return 0.0


def default_n0(k) -> int:
    return 64 * max(abs(int(k[0])), abs(int(k[1])), 1)


def _make_preconditioner(n: int, kinetic_scale: float, g_mean: np.ndarray, eps: float, trans_curv=(0.0, 0.0)):
    """Solve (kinetic_scale * lambda_j * G_mean + eps I) d = g per Fourier mode.

    The zero mode (rigid translation) gets its own diagonal block from the
    measured translation curvature: its stiffness comes from the metric
    landscape, not from the path Laplacian, and mis-scaling it throttles the
    Armijo step for every other mode.
    """
    lam = 4.0 * np.sin(np.pi * np.arange(n // 2 + 1) / n) ** 2
    m = kinetic_scale * lam[:, None, None] * g_mean[None, :, :] + eps * np.eye(2)
    m[0] = np.diag([max(eps, trans_curv[0]), max(eps, trans_curv[1])])
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    inv = np.empty_like(m)
    inv[:, 0, 0] = m[:, 1, 1] / det
    inv[:, 1, 1] = m[:, 0, 0] / det
    inv[:, 0, 1] = -m[:, 0, 1] / det
    inv[:, 1, 0] = -m[:, 1, 0] / det

    def apply(g):
        gh = np.fft.rfft(g, axis=0)
        dh = np.einsum("fij,fj->fi", inv, gh)
        return np.fft.irfft(dh, n=n, axis=0)

    return apply


def _translation_curvature(value_and_grad, nodes, delta: float = 1e-2):
    """Second difference of the objective under rigid x / y translations."""
    e0 = value_and_grad(nodes)[0]
    out = []
    for axis in range(2):
        shift = np.zeros(2)
        shift[axis] = delta
        e_plus = value_and_grad(nodes + shift)[0]
        e_minus = value_and_grad(nodes - shift)[0]
        out.append(abs(e_plus - 2.0 * e0 + e_minus) / delta**2)
    return tuple(out)


def _descend(value_and_grad, nodes, kinetic_scale, g_mean, opts: MinOptions, grad_tol):
    """Preconditioned Armijo descent; returns (nodes, E, grad_sup, iterations)."""
    n = len(nodes)
    curv = _translation_curvature(value_and_grad, nodes)
    precond = _make_preconditioner(n, kinetic_scale, g_mean, opts.precond_eps, curv)
    energy, grad = value_and_grad(nodes)
    step = 1.0
    prev_move = None
    iters = 0
    for iters in range(opts.max_iters):
        grad_sup = float(np.abs(grad).max())
        if grad_sup <= grad_tol:
            return nodes, energy, grad_sup, iters
        direction = -precond(grad)
        slope = float(np.sum(grad * direction))
        if slope >= 0:  # preconditioner lost descent (cannot happen for SPD M)
            direction = -grad
            slope = -float(np.sum(grad * grad))
        step = min(1.0, 2.0 * step)
        while True:
            trial = nodes + step * direction
            e_new, g_new = value_and_grad(trial)
            if e_new <= energy + 1e-4 * step * slope or step < 1e-16:
                break
            step *= 0.5
        move = trial - nodes
        nodes, energy, grad = trial, e_new, g_new
        if opts.momentum > 0.0 and prev_move is not None:
            kick = nodes + opts.momentum * prev_move
            e_kick, g_kick = value_and_grad(kick)
            if e_kick < energy:
                move = kick - (nodes - move)
                nodes, energy, grad = kick, e_kick, g_kick
        prev_move = move
    return nodes, energy, float(np.abs(grad).max()), opts.max_iters


def _run_start(objective_for_loop, k, n0, start_index, opts: MinOptions, kinetic_scale_for_n, g_mean):
    loop = init_loop(k, n0, seed=(opts.seed, start_index), amplitude=opts.amplitude)
    level_energies = []
    energy = grad_sup = float("nan")
    iters_total = 0
    for level in range(opts.levels + 1):
        if level > 0:
            loop = resample(loop, 2 * loop.n)
        vag = objective_for_loop(loop)
        nodes, energy, grad_sup, iters = _descend(
            vag, loop.nodes, kinetic_scale_for_n(loop.n), g_mean, opts, opts.grad_tol
        )
        loop = loop.with_nodes(nodes)
        level_energies.append(float(energy))
        iters_total += iters
    return StartOutcome(loop, float(energy), float(grad_sup), iters_total, level_energies, grad_sup <= opts.grad_tol)


def _loop_sort_key(outcome: StartOutcome):
    # energy first; exact ties broken by the lexicographically smallest
    # serialised loop so the merge is deterministic
    return (outcome.energy, json.dumps(outcome.loop.to_dict()))


def cyclic_alignment_distance(a: DiscreteLoop, b: DiscreteLoop) -> float:
    """Sup distance between loops, minimised over cyclic shifts (including
    fractional sub-node shifts) and integer translations of the lift.
    Infinite when the windings differ."""
    if a.k != b.k:
        return float("inf")
    ua, ub = a.nodes, b.nodes
    if len(ua) != len(ub):
        n = max(len(ua), len(ub))
        ua = resample(a, n).nodes
        ub = resample(b, n).nodes
    n = len(ua)
    kvec = np.asarray(a.k, dtype=float)
    idx = (np.arange(n)[None, :] + np.arange(n)[:, None]) % n
    wrap = (np.arange(n)[None, :] + np.arange(n)[:, None]) // n
    rolled = ub[idx] + wrap[:, :, None] * kvec  # (shift, node, 2), lifted
    diff = ua[None, :, :] - rolled
    trans = np.round(diff.mean(axis=1))  # per-shift integer translation
    dist = np.abs(diff - trans[:, None, :]).max(axis=(1, 2))
    s0 = int(np.argmin(dist))

    def at(shift):
        # distance at a real-valued cyclic shift, via linear interpolation
        base = int(np.floor(shift))
        t = shift - base
        j = base + np.arange(n)
        lo = ub[j % n] + (j // n)[:, None] * kvec
        hi = ub[(j + 1) % n] + ((j + 1) // n)[:, None] * kvec
        d = ua - ((1 - t) * lo + t * hi)
        m = np.round(d.mean(axis=0))
        return float(np.abs(d - m).max())

    best = float(dist[s0])
    # the max-of-affine distance is convex in the fractional shift on each
    # unit interval; ternary-search both intervals adjacent to the best shift
    for lo_s, hi_s in ((s0 - 1.0, s0), (s0, s0 + 1.0)):
        a_s, b_s = lo_s, hi_s
        for _ in range(40):
            m1 = a_s + (b_s - a_s) / 3.0
            m2 = b_s - (b_s - a_s) / 3.0
            if at(m1) <= at(m2):
                b_s = m2
            else:
                a_s = m1
        best = min(best, at(0.5 * (a_s + b_s)))
    return best


def _dedup(outcomes, tol: float):
    kept = []
    for oc in outcomes:
        if all(cyclic_alignment_distance(oc.loop, other.loop) > tol for other in kept):
            kept.append(oc)
    return kept


def minimize_objective(objective_for_loop, k, opts: MinOptions, kinetic_scale_for_n, g_mean, recompute=None) -> MinResult:
    """Shared multistart driver.

    objective_for_loop(loop) must return a value-and-gradient callable over
    node arrays of that loop's size.  ``recompute(loop) -> (energy, length)``
    fixes the reported scalars from the final loop exactly.
    """
    kp, kq = int(k[0]), int(k[1])
    if kp == 0 and kq == 0:
        raise NullClassError("cannot minimise over the null class")
    n0 = opts.n0 if opts.n0 is not None else default_n0((kp, kq))

    def task(s):
        return _run_start(objective_for_loop, (kp, kq), n0, s, opts, kinetic_scale_for_n, g_mean)

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            outcomes = list(pool.map(task, range(opts.starts)))
    else:
        outcomes = [task(s) for s in range(opts.starts)]

    ranked = sorted(outcomes, key=_loop_sort_key)
    best = ranked[0]
    window = abs(best.energy) * opts.rel_tol
    near = [oc for oc in ranked if oc.energy <= best.energy + window]
    distinct = _dedup(near, opts.dedup_tol)

    if recompute is not None:
        energy, length = recompute(best.loop)
    else:
        energy, length = best.energy, float("nan")
    return MinResult(
        loop=best.loop,
        energy=float(energy),
        length=float(length),
        all_minima=[oc.loop for oc in distinct],
        converged=best.converged,
        iterations=best.iterations,
        grad_sup=best.grad_sup,
        speed_ratio=float("nan"),
        level_energies=best.level_energies,
        n_starts=len(outcomes),
        n_converged=sum(oc.converged for oc in outcomes),
    )


def minimize_energy(g: MetricSpec, k, opts: MinOptions | None = None) -> MinResult:
    """Minimise the discrete loop energy over the winding class k.

    Returns the best loop over all starts (converged or not -- check the
    ``converged`` flag) together with all distinct near-minimal loops.
    """
    opts = opts or MinOptions()
    from .loops import energy_gradient  # local import keeps module load light

    def objective_for_loop(loop):
        def vag(nodes):
            cur = loop.with_nodes(nodes)
            return loop_energy(g, cur), energy_gradient(g, cur)

        return vag

    g_mean = g.mean_matrix()
    result = minimize_objective(
        objective_for_loop,
        k,
        opts,
        kinetic_scale_for_n=lambda n: float(n),
        g_mean=g_mean,
        recompute=lambda loop: (loop_energy(g, loop), loop_length(g, loop)),
    )
    result.speed_ratio = loop_speed_ratio(g, result.loop)
    return result


def distinct_minima(result: MinResult, dedup_tol: float) -> list:
    """Near-minimal loops of a result, deduplicated at the given tolerance."""
    if not np.isfinite(dedup_tol):
        return [result.loop]
    kept = []
    for loop in result.all_minima:
        if all(cyclic_alignment_distance(loop, other) > dedup_tol for other in kept):
            kept.append(loop)
    return kept
