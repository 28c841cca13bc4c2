"""Command-line interface.

Subcommands: beta, norm-ball, compare, flat-rigidity, mane, gradcheck.
Every run writes deterministic JSON payloads (plus CSV summaries where the
result is tabular) and a run_manifest.json holding the wall-clock data.

Exit codes: 0 ok / inequality verified, 1 config error, 2 numerical
violation beyond tolerance, 3 inconclusive or non-converged entries.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .beta import batch_beta, norm_ball, norm_ball_convex
from .errors import ConvergenceError, SpecError, TorusNormError
from .loops import HomologyClass
from .mane import load_tonelli, mane_inequality_check, mane_rigidity_check
from .metrics import ConformalMetric, FlatMetric, load_metric
from .minimizer import MinOptions
from .oracles import finite_difference_gradient
from .reporting import file_sha, write_csv, write_manifest, write_payload
from .rigidity import CSV_HEADER, flat_rigidity_check, rigidity_scan

_EXIT_OK = 0
_EXIT_CONFIG = 1
_EXIT_VIOLATION = 2
_EXIT_INCONCLUSIVE = 3


def parse_classes(text: str) -> list:
    """Class list in the form "p,q;p,q;..."."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(",")
        if len(bits) != 2:
            raise SpecError(f"bad class {part!r}; expected p,q")
        out.append(HomologyClass(int(bits[0]), int(bits[1])))
    return out


def box_classes(bound: int) -> list:
    """Canonical representatives (p > 0, or p = 0 and q > 0) with |p|,|q| <= B."""
    if bound < 1:
        raise SpecError("class box bound must be at least 1")
    out = [HomologyClass(0, q) for q in range(1, bound + 1)]
    for p in range(1, bound + 1):
        for q in range(-bound, bound + 1):
            out.append(HomologyClass(p, q))
    return out


def _add_common(parser, with_metric=True, with_classes=True):
    if with_metric:
        parser.add_argument("--metric", help="path to the metric spec JSON")
    if with_classes:
        parser.add_argument("--classes", help='class list "p,q;p,q;..."')
        parser.add_argument("--box", type=int, help="all canonical classes with |p|,|q| <= B")
    parser.add_argument("--starts", type=int, help="multistart count")
    parser.add_argument("--nodes", type=int, help="initial node count N0")
    parser.add_argument("--levels", type=int, help="mesh refinement levels")
    parser.add_argument("--tol-rel", type=float, help="equality tolerance")
    parser.add_argument("--grad-tol", type=float, help="stationarity tolerance")
    parser.add_argument("--seed", type=int, help="seed for all randomized starts")
    parser.add_argument("--out-dir", help="output directory (env TORUSNORM_OUT_DIR)")
    parser.add_argument("--workers", type=int, help="worker pool size (default: cpu count)")
    parser.add_argument("--config", help="JSON config file; explicit flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusnorm",
        description="Stable norms, Mather beta-values, and rigidity scans on the 2-torus.",
    )
    parser.add_argument("--version", action="version", version=f"torusnorm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("beta", help="stable norm / beta over a class list")
    _add_common(p)
    p.add_argument("--m-sweep", type=int, default=1, help="covers per class for the homogeneity diagnostic")

    p = sub.add_parser("norm-ball", help="sample the stable-norm unit ball")
    _add_common(p, with_classes=False)
    p.add_argument("--dirs", type=int, default=64, help="number of directions")
    p.add_argument("--max-den", type=int, default=20, help="convergent denominator bound")

    p = sub.add_parser("compare", help="comparison inequality scan between two metrics")
    _add_common(p)
    p.add_argument("--metric2", help="path to the second metric spec JSON")
    p.add_argument("--grid-n", type=int, default=64, help="distortion scan grid")

    p = sub.add_parser("flat-rigidity", help="is a conformal metric secretly flat?")
    _add_common(p)
    p.add_argument("--grid-n", type=int, default=64, help="distortion scan grid")

    p = sub.add_parser("mane", help="potential-perturbation beta values and checks")
    _add_common(p)
    p.add_argument("--m-max", type=int, default=3, help="covers per class")

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    _add_common(p, with_metric=False, with_classes=False)
    p.add_argument("--fixtures", type=int, default=20, help="number of random fixtures")

    return parser


def _merge_config(args) -> dict:
    """File config first, then explicit flags; returns the semantic config."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise SpecError("config file must hold a JSON object")
    for key in (
        "metric",
        "metric2",
        "classes",
        "box",
        "starts",
        "nodes",
        "levels",
        "tol_rel",
        "grad_tol",
        "seed",
        "dirs",
        "max_den",
        "grid_n",
        "m_sweep",
        "m_max",
        "fixtures",
    ):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("seed", 0)
    cfg["command"] = args.command
    return cfg


def _resolve_classes(cfg) -> list:
    if cfg.get("classes"):
        classes = parse_classes(cfg["classes"])
    elif cfg.get("box"):
        classes = box_classes(int(cfg["box"]))
    else:
        classes = []
    if not classes:
        raise SpecError("empty class list: pass --classes or --box")
    if any(h.is_zero for h in classes):
        raise SpecError("classes must be nonzero")
    return classes


def _options(cfg) -> MinOptions:
    kw = {"seed": int(cfg.get("seed", 0))}
    if cfg.get("nodes") is not None:
        kw["n0"] = int(cfg["nodes"])
    if cfg.get("levels") is not None:
        kw["levels"] = int(cfg["levels"])
    if cfg.get("starts") is not None:
        kw["starts"] = int(cfg["starts"])
    if cfg.get("grad_tol") is not None:
        kw["grad_tol"] = float(cfg["grad_tol"])
    return MinOptions(**kw)


def _out_dir(args) -> Path:
    out = getattr(args, "out_dir", None) or os.environ.get("TORUSNORM_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(args) -> int:
    w = getattr(args, "workers", None)
    return int(w) if w else (os.cpu_count() or 1)


def _require_metric(cfg, key="metric"):
    path = cfg.get(key)
    if not path:
        raise SpecError(f"--{key} is required for this command")
    cfg[f"{key}_sha"] = file_sha(path)
    return load_metric(path)


def cmd_beta(args) -> int:
    cfg = _merge_config(args)
    g = _require_metric(cfg)
    classes = _resolve_classes(cfg)
    opts = _options(cfg)
    m_values = tuple(range(1, int(cfg.get("m_sweep", 1)) + 1))
    out = _out_dir(args)
    t0 = time.time()
    exit_code = _EXIT_OK
    try:
        results = batch_beta(g, classes, opts, workers=_workers(args), m_values=m_values)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INCONCLUSIVE
    if any(not r.certificate.converged for r in results):
        exit_code = _EXIT_INCONCLUSIVE
    rows = [
        [r.h.p, r.h.q, str(r.h.scale), r.stable_norm, r.beta, r.certificate.converged]
        for r in results
    ]
    write_csv(out / "beta.csv", ["p", "q", "scale", "stable_norm", "beta", "converged"], rows)
    write_payload(out / "beta.json", {"results": [r.to_dict() for r in results]}, cfg)
    write_manifest(out, cfg, ["beta.csv", "beta.json"], time.time() - t0)
    print(f"beta: {len(results)} classes -> {out/'beta.csv'}")
    return exit_code


def cmd_norm_ball(args) -> int:
    cfg = _merge_config(args)
    g = _require_metric(cfg)
    opts = _options(cfg)
    out = _out_dir(args)
    t0 = time.time()
    points = norm_ball(g, int(cfg.get("dirs", 64)), opts, max_den=int(cfg.get("max_den", 20)))
    convex = norm_ball_convex(points)
    rows = [[p.theta, p.radius, p.theta_achieved, p.k[0], p.k[1]] for p in points]
    write_csv(out / "norm_ball.csv", ["angle", "radius", "angle_achieved", "p", "q"], rows)
    write_payload(
        out / "norm_ball.json",
        {
            "convex": convex,
            "points": [
                {
                    "angle": p.theta,
                    "angle_achieved": p.theta_achieved,
                    "k": list(p.k),
                    "radius": p.radius,
                }
                for p in points
            ],
        },
        cfg,
    )
    write_manifest(out, cfg, ["norm_ball.csv", "norm_ball.json"], time.time() - t0)
    print(f"norm-ball: {len(points)} directions, convex={convex} -> {out/'norm_ball.csv'}")
    return _EXIT_OK


def cmd_compare(args) -> int:
    cfg = _merge_config(args)
    g1 = _require_metric(cfg, "metric")
    g2 = _require_metric(cfg, "metric2")
    classes = _resolve_classes(cfg)
    opts = _options(cfg)
    tol_rel = float(cfg.get("tol_rel", 1e-3))
    out = _out_dir(args)
    t0 = time.time()
    report = rigidity_scan(
        g1, g2, classes, tol_rel, opts, grid_n=int(cfg.get("grid_n", 64)), workers=_workers(args)
    )
    write_csv(out / "compare.csv", CSV_HEADER, report.csv_rows())
    write_payload(out / "compare.json", {"report": report.to_dict()}, cfg)
    write_manifest(out, cfg, ["compare.csv", "compare.json"], time.time() - t0)
    print(f"compare: {report.verdict()} -> {out/'compare.csv'}")
    if report.inconclusive_classes:
        return _EXIT_INCONCLUSIVE
    if not report.inequality_ok:
        return _EXIT_VIOLATION
    return _EXIT_OK


def cmd_flat_rigidity(args) -> int:
    cfg = _merge_config(args)
    g = _require_metric(cfg)
    if not isinstance(g, ConformalMetric):
        raise SpecError("flat-rigidity requires a conformal metric spec")
    classes = _resolve_classes(cfg)
    opts = _options(cfg)
    out = _out_dir(args)
    t0 = time.time()
    result = flat_rigidity_check(
        g, classes, float(cfg.get("tol_rel", 1e-3)), opts, grid_n=int(cfg.get("grid_n", 64))
    )
    write_payload(out / "flat_rigidity.json", {"result": result.to_dict()}, cfg)
    write_manifest(out, cfg, ["flat_rigidity.json"], time.time() - t0)
    print(f"flat-rigidity: verdict = {result.verdict}")
    return _EXIT_OK if result.verdict != "inconclusive" else _EXIT_INCONCLUSIVE


def cmd_mane(args) -> int:
    cfg = _merge_config(args)
    path = cfg.get("metric")
    if not path:
        raise SpecError("--metric is required (metric JSON with a 'potential' field)")
    cfg["metric_sha"] = file_sha(path)
    spec = load_tonelli(path).normalize()
    classes = _resolve_classes(cfg)
    opts = _options(cfg)
    out = _out_dir(args)
    t0 = time.time()
    report = mane_inequality_check(
        spec.kinetic, spec.potential, classes, opts, m_max=int(cfg.get("m_max", 3))
    )
    rows = [
        [e.h.p, e.h.q, e.beta_unperturbed, e.beta_perturbed, e.gap, e.ok]
        for e in report.entries
    ]
    write_csv(out / "mane.csv", ["p", "q", "beta_unperturbed", "beta_perturbed", "gap", "ok"], rows)
    body = {"report": report.to_dict()}
    if isinstance(spec.kinetic, FlatMetric):
        verdict = mane_rigidity_check(
            spec.kinetic, spec.potential, classes, opts, m_max=int(cfg.get("m_max", 3))
        )
        body["rigidity"] = verdict.to_dict()
        print(f"mane: rigidity verdict = {verdict.verdict}")
    write_payload(out / "mane.json", body, cfg)
    write_manifest(out, cfg, ["mane.csv", "mane.json"], time.time() - t0)
    print(f"mane: inequality {'holds' if report.all_ok else 'VIOLATED'} -> {out/'mane.csv'}")
    return _EXIT_OK if report.all_ok else _EXIT_VIOLATION


def cmd_gradcheck(args) -> int:
    from .fixtures import random_metric
    from .loops import energy_gradient, init_loop, loop_energy

    cfg = _merge_config(args)
    out = _out_dir(args)
    n_fixtures = int(cfg.get("fixtures", 20))
    seed = int(cfg.get("seed", 0))
    t0 = time.time()
    entries = []
    worst = 0.0
    for i in range(n_fixtures):
        g = random_metric(1000 * seed + i)
        loop = init_loop((1, 1) if i % 2 else (1, 0), 16, seed=(seed, i), amplitude=0.3)
        analytic = energy_gradient(g, loop)
        fd = finite_difference_gradient(lambda nodes: loop_energy(g, loop.with_nodes(nodes)), loop.nodes)
        rel = float(np.abs(analytic - fd).max() / max(np.abs(analytic).max(), 1e-8))
        worst = max(worst, rel)
        entries.append({"fixture": i, "kind": g.kind, "rel_error": rel, "ok": rel <= 1e-5})
    passed = all(e["ok"] for e in entries)
    write_payload(
        out / "gradcheck.json",
        {"passed": passed, "worst_rel_error": worst, "entries": entries},
        cfg,
    )
    write_manifest(out, cfg, ["gradcheck.json"], time.time() - t0)
    print(f"gradcheck: {'PASS' if passed else 'FAIL'} (worst rel error {worst:.2e})")
    return _EXIT_OK if passed else _EXIT_VIOLATION


_COMMANDS = {
    "beta": cmd_beta,
    "norm-ball": cmd_norm_ball,
    "compare": cmd_compare,
    "flat-rigidity": cmd_flat_rigidity,
    "mane": cmd_mane,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SpecError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except TorusNormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
