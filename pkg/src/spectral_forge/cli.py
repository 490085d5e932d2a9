"""spectral-forge command line.

Subcommands map one-to-one onto the library surface: ``scan-circle``,
``eigs`` and ``convergence`` probe the discrete-time operator, ``semigroup
scan-axis/cert/evolve`` probe the continuous-time one, and ``verify`` runs
the seeded property suites.  Exit codes: 0 all checks passed, 1 a numeric
verification failed, 2 bad usage or configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .errors import SpectralForgeError
from .finite import build_finite_section, convergence_table, finite_spectrum, \
    strongly_connected
from .io import write_csv, write_json
from .model import GroupUnionSpec, WeightSeq
from .resolvent import CERTIFIED, SINGULAR
from .scanner import scan_unit_circle
from .semigroup import FourierState, GeneratorSpec, RationalSchedule, \
    evolve, mode_certificate, scan_imaginary_axis
from .verify import SUITE_NAMES, run_suites

_CONFIG_KEYS = {
    "construction", "orders", "weight_rule", "truncation_depth",
    "grid_size", "exclusion_radius", "seed", "out",
}

_DEFAULTS = {
    "construction": "single-operator",
    "orders": (2, 3),
    "weight_rule": "dyadic",
    "truncation_depth": 40,
    "grid_size": 3600,
    "exclusion_radius": 0.05,
    "seed": 0,
    "out": ".",
}


class UsageError(Exception):
    """Configuration or argument problem; maps to exit status 2."""


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _parse_orders(text) -> tuple:
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [s for s in str(text).replace(" ", "").split(",") if s]
    if not items:
        raise UsageError("orders: need at least one cyclic order")
    try:
        orders = tuple(int(x) for x in items)
    except (TypeError, ValueError):
        raise UsageError(f"orders: {text!r} is not a comma-separated "
                         "list of integers")
    bad = [m for m in orders if m < 1]
    if bad:
        raise UsageError(f"orders: cyclic orders must be >= 1, got {bad}")
    return orders


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config: {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError("config: top level must be a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"config: unknown keys {sorted(unknown)}; "
                         f"allowed: {sorted(_CONFIG_KEYS)}")
    return cfg


def _resolve_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config(args.config))
    for key, attr in (("truncation_depth", "depth"), ("seed", "seed"),
                      ("out", "out"), ("orders", "orders"),
                      ("grid_size", "grid"), ("exclusion_radius", "exclusion")):
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    cfg["orders"] = _parse_orders(cfg["orders"])

    if cfg["weight_rule"] != "dyadic":
        raise UsageError(f"weight_rule: only 'dyadic' is implemented, "
                         f"got {cfg['weight_rule']!r}")
    if not isinstance(cfg["truncation_depth"], int) \
            or cfg["truncation_depth"] < 1:
        raise UsageError("truncation_depth: need a positive integer")
    if cfg["grid_size"] < 1:
        raise UsageError("grid_size: need a positive integer")
    if not 0.0 <= float(cfg["exclusion_radius"]) < 1.0:
        raise UsageError("exclusion_radius: need a radius in [0, 1)")
    return cfg


def _out_path(cfg: dict, name: str) -> str:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _single_operator(cfg: dict):
    spec = GroupUnionSpec(cfg["orders"])
    return spec, WeightSeq.dyadic_single(spec.d)


# ---------------------------------------------------------------------------
# discrete-time commands
# ---------------------------------------------------------------------------

def cmd_scan_circle(args) -> int:
    cfg = _resolve_config(args)
    spec, w = _single_operator(cfg)
    depth = cfg["truncation_depth"]
    report = scan_unit_circle(spec, w, cfg["grid_size"],
                              float(cfg["exclusion_radius"]), depth,
                              cert_block=args.cert_block)

    write_csv(_out_path(cfg, "scan_circle.csv"),
              ["theta", "re_lambda", "im_lambda", "verdict",
               "denominator_abs_lower", "empirical_block_bound"],
              report.csv_rows())

    # closed form 2 * q_n plus the rounding of (1-q)*z - z in the forward map
    threshold = 2.0 * w.value(args.cert_block) + 1e-14
    cert_ok = all(c.residual <= threshold for c in report.certificates)
    rim = [v for v, ex in zip(report.verdicts, report.excluded) if not ex]
    rim_ok = all(v == CERTIFIED for v in rim)

    write_json(_out_path(cfg, "scan_circle.json"), {
        "metadata": report.metadata,
        "counts": report.counts(),
        "empirical_resolvent_bound": report.empirical_m,
        "certificates": [{
            "angle": str(c.angle), "re": c.value.real, "im": c.value.imag,
            "block_index": c.block_index, "inner_abs": c.inner_abs,
            "residual": c.residual, "threshold": threshold,
        } for c in report.certificates],
        "all_nonexcluded_certified": rim_ok,
        "certificates_ok": cert_ok,
    })
    counts = report.counts()
    print(f"scan-circle: {counts[CERTIFIED]} certified, "
          f"{counts[SINGULAR]} withheld of {len(report)} points; "
          f"{len(report.certificates)} certificates "
          f"(max residual {max((c.residual for c in report.certificates), default=0.0):.3e})")
    return 0 if (rim_ok and cert_ok) else 1


def cmd_eigs(args) -> int:
    cfg = _resolve_config(args)
    spec, w = _single_operator(cfg)
    result = finite_spectrum(spec, w, args.n_blocks,
                             renormalize=not args.no_renormalize)
    op = result.operator

    write_csv(_out_path(cfg, "eigs.csv"),
              ["re", "im", "kind", "residual"], result.csv_rows())

    col = op.column_sums()
    vals = np.abs(result.values())
    top = result.values()[vals > vals.max() - 1e-10]
    summary = {
        "orders": list(spec.orders),
        "n_blocks": args.n_blocks,
        "dimension": op.dim,
        "renormalized": op.renormalized,
        "count": len(result),
        "max_residual": result.max_residual(),
        "head_column_sum": float(col[0]),
        "max_column_sum_deviation": float(np.abs(col - 1.0).max()),
        "strongly_connected": strongly_connected(op.matrix),
        "spectral_radius": float(vals.max()),
        "peripheral_values": [{"re": z.real, "im": z.imag} for z in top],
    }
    write_json(_out_path(cfg, "eigs.json"), summary)
    print(f"eigs: {len(result)} eigenvalues of the {op.dim}-dimensional "
          f"section, max residual {result.max_residual():.3e}, "
          f"head column sum {col[0]:.12f}")
    return 0 if result.max_residual() <= 1e-9 else 1


def cmd_convergence(args) -> int:
    cfg = _resolve_config(args)
    spec, w = _single_operator(cfg)
    rows = convergence_table(spec, w, args.n_max)
    write_csv(_out_path(cfg, "convergence.csv"),
              ["n_blocks", "angle", "distance", "bound", "within_bound"],
              ((r.n_blocks, str(r.angle), r.distance, r.bound, r.ok)
               for r in rows))
    ok = all(r.ok for r in rows)
    worst = max(r.distance / r.bound for r in rows)
    print(f"convergence: {len(rows)} rows up to N={args.n_max}, "
          f"worst distance/bound = {worst:.3f}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# semigroup commands
# ---------------------------------------------------------------------------

def _generator(cfg: dict) -> GeneratorSpec:
    return GeneratorSpec(WeightSeq.dyadic_semigroup(), RationalSchedule(),
                         cfg["truncation_depth"])


def _parse_betas(text: Optional[str]) -> List[float]:
    if text is None:
        # default grid: +-0.05..0.95 plus the showcase point beta = 0
        ks = np.arange(-19, 20)
        return [round(0.05 * k, 10) for k in ks]
    try:
        return [float(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise UsageError(f"betas: {text!r} is not a comma-separated "
                         "list of floats")


def cmd_scan_axis(args) -> int:
    cfg = _resolve_config(args)
    g = _generator(cfg)
    betas = _parse_betas(args.betas)
    report = scan_imaginary_axis(g, betas)

    write_csv(_out_path(cfg, "scan_axis.csv"),
              ["beta", "verdict", "denominator_abs_lower"],
              report.csv_rows())

    # expected verdicts: certified strictly inside the unit gap, singular
    # at beta = 0 and beyond |beta| = 1
    mismatches = []
    for p in report.points:
        expected = CERTIFIED if 1e-6 < abs(p.beta) < 1.0 - 1e-6 else SINGULAR
        if p.verdict != expected:
            mismatches.append(p.beta)
    write_json(_out_path(cfg, "scan_axis.json"), {
        "depth": g.depth,
        "counts": report.counts(),
        "mismatched_betas": mismatches,
    })
    print(f"semigroup scan-axis: {report.counts()} over {len(report.points)} "
          f"points, {len(mismatches)} unexpected verdicts")
    return 0 if not mismatches else 1


def _parse_rationals(text: str) -> List[Fraction]:
    try:
        return [Fraction(s) for s in text.replace(" ", "").split(",") if s]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"r: {text!r} is not a comma-separated list "
                         "of rationals like 3/2")


def cmd_cert(args) -> int:
    cfg = _resolve_config(args)
    g = _generator(cfg)
    certs = []
    for r in _parse_rationals(args.r):
        if r < 1:
            raise UsageError(f"r: target speeds must be >= 1, got {r}")
        certs.append(mode_certificate(g, r, args.occurrence))
    write_json(_out_path(cfg, "semigroup_cert.json"), [{
        "r": str(c.r), "omega": str(c.omega), "k": c.k, "n": c.block_index,
        "q_n": c.q_n, "residual": c.residual, "matches": c.matches,
    } for c in certs])
    for c in certs:
        print(f"cert r={c.r}: mode k={c.k} at block n={c.block_index} "
              f"(speed {c.omega}), residual {c.residual:.6e} "
              f"{'=' if c.matches else '!='} q_n")
    return 0 if all(c.matches for c in certs) else 1


def cmd_evolve(args) -> int:
    cfg = _resolve_config(args)
    g = _generator(cfg)
    f0 = FourierState.head_unit()
    if args.mode:
        try:
            n_s, k_s = args.mode.split(",")
            n, k = int(n_s), int(k_s)
        except ValueError:
            raise UsageError(f"mode: {args.mode!r} is not 'n,k'")
        if n < 1:
            raise UsageError("mode: block index must be >= 1")
        f0 = FourierState.single_mode(n, k, 1.0 / (2.0 * np.pi))

    times = np.linspace(0.0, args.t, args.samples)
    mass0 = f0.mass().real
    rows = []
    worst_drift = 0.0
    for t in times:
        ft = evolve(g, f0, float(t))
        mass = ft.mass().real
        worst_drift = max(worst_drift, abs(mass - mass0))
        blocks = [2.0 * np.pi * ft.coeff(n, 0).real
                  for n in range(1, args.trace_blocks + 1)]
        rows.append((float(t), mass, ft.head.real, *blocks))

    headers = ["t", "mass", "head"] + \
        [f"block_mass_{n}" for n in range(1, args.trace_blocks + 1)]
    write_csv(_out_path(cfg, "evolve.csv"), headers, rows)
    tol = 1e-8 * max(1.0, abs(mass0))
    print(f"semigroup evolve: {len(rows)} samples to t={args.t}, "
          f"mass drift {worst_drift:.3e} (tolerance {tol:.1e})")
    return 0 if worst_drift <= tol else 1


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _resolve_config(args)
    names = None
    if args.suites:
        names = [s for s in args.suites.replace(" ", "").split(",") if s]
        unknown = set(names) - set(SUITE_NAMES)
        if unknown:
            raise UsageError(f"suites: unknown {sorted(unknown)}; "
                             f"choices: {list(SUITE_NAMES)}")
    report = run_suites(names, seed=cfg["seed"], corrupt=args.corrupt)
    write_json(_out_path(cfg, "verify.json"), report)
    for name, res in report["suites"].items():
        status = "PASS" if res["passed"] else "FAIL"
        print(f"verify {name}: {status} "
              f"({res['checks']} checks, {res['failures']} failures)")
    return 0 if report["all_passed"] else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--depth", type=int, default=None,
                        help="series truncation depth (default 40)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for all randomised checks")
    common.add_argument("--out", default=None,
                        help="output directory for CSV/JSON artifacts")

    orders_arg = dict(default=None,
                      help="comma-separated cyclic orders, e.g. 2,3")

    parser = argparse.ArgumentParser(
        prog="spectral-forge",
        description="certified spectra of head-coupled cyclic shift systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan-circle", parents=[common],
                       help="classify unit-circle points for the operator")
    p.add_argument("--orders", **orders_arg)
    p.add_argument("--grid", type=int, default=None,
                   help="number of grid angles (default 3600)")
    p.add_argument("--exclusion", type=float, default=None,
                   help="radius of the withheld arcs around target points")
    p.add_argument("--cert-block", type=int, default=30,
                   help="block index used for residual certificates")
    p.set_defaults(func=cmd_scan_circle)

    p = sub.add_parser("eigs", parents=[common],
                       help="full spectrum of a finite section")
    p.add_argument("--orders", **orders_arg)
    p.add_argument("--N", dest="n_blocks", type=int, default=12,
                   help="number of retained blocks")
    p.add_argument("--no-renormalize", action="store_true",
                   help="keep raw weights (head column sums to 1 - 2^-N)")
    p.set_defaults(func=cmd_eigs)

    p = sub.add_parser("convergence", parents=[common],
                       help="distance of section spectra to the target set")
    p.add_argument("--orders", **orders_arg)
    p.add_argument("--n-max", type=int, default=12,
                   help="largest section size")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("verify", parents=[common],
                       help="run the seeded property suites")
    p.add_argument("--suites", default=None,
                   help=f"comma-separated subset of {list(SUITE_NAMES)}")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    sg = sub.add_parser("semigroup", help="continuous-time construction")
    sgsub = sg.add_subparsers(dest="subcommand", required=True)

    p = sgsub.add_parser("scan-axis", parents=[common],
                         help="classify imaginary-axis points")
    p.add_argument("--betas", default=None,
                   help="comma-separated beta values (default grid in "
                        "[-0.95, 0.95] including 0)")
    p.set_defaults(func=cmd_scan_axis)

    p = sgsub.add_parser("cert", parents=[common],
                         help="single-mode approximate eigenvalue certificates")
    p.add_argument("--r", required=True,
                   help="comma-separated rational speeds >= 1, e.g. 1,3/2,7/3")
    p.add_argument("--occurrence", type=int, default=1,
                   help="which recurrence of the speed to use")
    p.set_defaults(func=cmd_cert)

    p = sgsub.add_parser("evolve", parents=[common],
                         help="orbit of the semigroup with mass trace")
    p.add_argument("--t", type=float, default=10.0, help="final time")
    p.add_argument("--samples", type=int, default=51,
                   help="number of trace samples")
    p.add_argument("--mode", default=None,
                   help="start from a single mode 'n,k' instead of the head")
    p.add_argument("--trace-blocks", type=int, default=8,
                   help="number of leading block masses in the CSV")
    p.set_defaults(func=cmd_evolve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpectralForgeError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
