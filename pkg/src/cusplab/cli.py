"""Command-line surface: every experiment as a reproducible run.

Commands write CSV for grids and JSON for summaries; each output embeds
the resolved configuration and the package version, and carries no
timestamps, so identical configs reproduce byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 invariant failure (selftest).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import CuspLabError, DomainError
from .numerics import gauss_rule, reg_gamma_lower, reg_gamma_upper
from .discmodel import model_kernel_diag, model_norm_restricted
from .surface import Perturbation, SurfaceModel, build_surface, dimension
from .basislab import (Cutoff, TruncationSchedule, epsilon_matrix,
                       head_closeness_report, project_and_orthonormalize)
from .geometry import (CuspComparison, eta_p, fitted_loglog_slope, fs_pullback,
                       quotient_scan, sample_sections, zero_mass_conservation,
                       zero_statistics)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4


def _resolved_config(args, fields) -> dict:
    cfg = {name: getattr(args, name) for name in fields}
    cfg["version"] = __version__
    return cfg


def _emit(args, payload: dict, rows=None, header=None):
    """Write JSON (summary + config) or CSV (config echoed in comments)."""
    out = io.StringIO()
    if args.format == "json":
        doc = dict(payload)
        if rows is not None:
            doc["rows"] = [list(r) for r in rows]
            doc["columns"] = list(header or ())
        json.dump(doc, out, sort_keys=True)
        out.write("\n")
    else:
        out.write(f"# cusplab {__version__}\n")
        out.write("# config " + json.dumps(payload["config"], sort_keys=True) + "\n")
        for key, val in sorted(payload.items()):
            if key in ("config",):
                continue
            out.write(f"# {key} {json.dumps(val, sort_keys=True)}\n")
        writer = csv.writer(out, lineterminator="\n")
        if rows is not None:
            writer.writerow(header)
            for r in rows:
                writer.writerow(r)
    text = out.getvalue()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_grid(spec: str):
    """'s:a:b:n' -> n geometric points in s between a and b (both negative)."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] != "s":
        raise DomainError(f"grid spec must look like s:-40:-4:100, got {spec!r}")
    a, b, n = float(parts[1]), float(parts[2]), int(parts[3])
    if not a < b < 0 or n < 2:
        raise DomainError(f"grid spec needs a < b < 0 and n >= 2, got {spec!r}")
    return -np.geomspace(-a, -b, n)


def _parse_range(spec: str, name: str):
    parts = spec.split(":")
    if len(parts) != 2:
        raise DomainError(f"{name} must look like lo:hi, got {spec!r}")
    return float(parts[0]), float(parts[1])


def _surface_from_args(args) -> SurfaceModel:
    if getattr(args, "model_json", None):
        with open(args.model_json) as fh:
            return SurfaceModel.from_json(fh.read())
    pert = None
    if getattr(args, "tau", 0.0):
        pert = Perturbation(tau=args.tau,
                            support=tuple(_parse_range(args.pert_support, "support")),
                            mode=args.pert_mode)
    return build_surface(k=args.k, perturbation=pert)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_model_kernel(args) -> int:
    cfg = _resolved_config(args, ["p", "z_abs", "grid", "tol", "format"])
    rows = []
    if args.grid:
        svals = _parse_grid(args.grid)
        zvals = np.exp(svals / 2.0)
    elif args.z_abs is not None:
        zvals = [args.z_abs]
    else:
        raise DomainError("model-kernel needs --z-abs or --grid")
    for z in zvals:
        ev = model_kernel_diag(args.p, float(z), rel_tol=args.tol)
        rows.append((float(z), ev.log_value.log, ev.certified_relative_tail))
    _emit(args, {"config": cfg}, rows, ("z_abs", "log_kernel", "certified_relative_tail"))
    return EXIT_OK


def cmd_quotient_scan(args) -> int:
    cfg = _resolved_config(args, ["k", "p_ladder", "s_range", "s_points",
                                  "derivatives", "format"])
    model = _surface_from_args(args)
    s_lo, s_hi = _parse_range(args.s_range, "--s-range")
    ladder = [int(p) for p in args.p_ladder.split(",")]
    rows, sups, sups_d1, sups_d2 = [], [], [], []
    for p in ladder:
        scan = quotient_scan(model, p, s_lo, s_hi, n_points=args.s_points,
                             derivatives=args.derivatives)
        rows.extend(scan.rows())
        sups.append(scan.sup_quotient)
        sups_d1.append(scan.sup_d1)
        sups_d2.append(scan.sup_d2)
    summary = {
        "config": cfg,
        "sup_quotient_minus_1": sups,
        "slope_quotient": fitted_loglog_slope(ladder, sups) if len(ladder) > 1 else None,
    }
    if args.derivatives:
        summary["sup_d1"] = sups_d1
        summary["sup_d2"] = sups_d2
        if len(ladder) > 1:
            summary["slope_d1"] = fitted_loglog_slope(ladder, sups_d1)
            summary["slope_d2"] = fitted_loglog_slope(ladder, sups_d2)
    _emit(args, summary, rows,
          ("p", "s", "z_abs", "quotient_minus_1", "d1_abs", "d2_abs"))
    return EXIT_OK


def cmd_basis(args) -> int:
    cfg = _resolved_config(args, ["k", "p", "r", "beta", "kappa", "refined",
                                  "tau", "pert_support", "pert_mode",
                                  "export_matrix", "format"])
    model = _surface_from_args(args)
    schedule = TruncationSchedule(r=args.r, beta=args.beta, kappa=args.kappa)
    cutoff = Cutoff(r=args.r, beta=args.beta)
    basis = project_and_orthonormalize(model, args.p, schedule, cutoff,
                                       refined=args.refined)
    report = head_closeness_report(basis, model)
    eps = epsilon_matrix(basis, cap=basis.head_count)
    echelon = 0.0
    for l in range(1, basis.head_count + 1):
        for j in range(1, l):
            echelon = max(echelon, abs(basis.scaled[j - 1, l - 1]))
    summary = {
        "config": cfg,
        "dimension": dimension(model, args.p),
        "head_count": basis.head_count,
        "echelon_residual_scaled": echelon,
        "epsilon_head_max": float(np.max(np.abs(eps))),
        "head_report": [(row.l, row.sigma_defect, row.max_offdiag,
                         row.diag_deviation) for row in report],
    }
    if args.export_matrix:
        rows = basis.export_rows()
        header = ("j", "l", "sign", "log_abs")
    else:
        rows = summary.pop("head_report")
        header = ("l", "sigma_defect", "max_offdiag", "diag_deviation")
    _emit(args, summary, rows, header)
    return EXIT_OK


def cmd_zeros(args) -> int:
    cfg = _resolved_config(args, ["k", "p", "samples", "seed", "annulus", "format"])
    model = _surface_from_args(args)
    ens = sample_sections(model, args.p, args.samples, args.seed)
    s_lo, s_hi = _parse_range(args.annulus, "--annulus")
    emp, theo, err = zero_statistics(ens, model, s_lo, s_hi)
    summary = {
        "config": cfg,
        "p": ens.p,
        "k": ens.k,
        "n_samples": ens.n_samples,
        "seed": ens.seed,
        "empirical": emp,
        "theoretical": theo,
        "mc_error": err,
        "failures": len(ens.failures),
        "mass_conservation": zero_mass_conservation(ens),
    }
    rows = None
    if args.write_roots:
        rows = [(i, float(rt.real), float(rt.imag))
                for i, roots in enumerate(ens.roots) for rt in roots]
    if ens.failures and len(ens.failures) / args.samples >= 0.01:
        _emit(args, summary, rows, ("sample_id", "root_re", "root_im"))
        return EXIT_NUMERICAL
    _emit(args, summary, rows, ("sample_id", "root_re", "root_im") if rows else None)
    return EXIT_OK


def cmd_fs_metric(args) -> int:
    cfg = _resolved_config(args, ["k", "p", "grid", "format"])
    model = _surface_from_args(args)
    engine = CuspComparison(model, args.p)
    rows = []
    for s in _parse_grid(args.grid):
        density, defect = fs_pullback(model, args.p, float(s), engine=engine)
        rows.append((float(s), density, defect, eta_p(model, args.p,
                                                      math.exp(s / 2), engine=engine)))
    _emit(args, {"config": cfg}, rows, ("s", "fs_density", "defect", "eta"))
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Fast invariant battery; one PASS/FAIL line per invariant, exit 4 on failure."""
    cfg = _resolved_config(args, ["format"])
    checks = []

    def check(name, fn):
        try:
            ok = bool(fn())
            detail = ""
        except CuspLabError as exc:
            ok, detail = False, f" ({exc})"
        except Exception as exc:  # diagnostics must not mask the failure
            ok, detail = False, f" ({type(exc).__name__}: {exc})"
        checks.append((name, ok))
        print(f"{'PASS' if ok else 'FAIL'} {name}{detail}")

    check("incomplete-gamma P+Q=1",
          lambda: all(abs(reg_gamma_lower(a, x) + reg_gamma_upper(a, x) - 1) < 1e-12
                      for a, x in ((1.5, 0.5), (40.0, 35.0), (300.0, 420.0))))
    check("integer-shape Q(2,2)=3e^-2",
          lambda: abs(reg_gamma_upper(2, 2) - 3 * math.exp(-2)) < 1e-12)
    check("model normalization",
          lambda: all(abs(model_norm_restricted(p, l, 1.0) - 1.0) < 1e-10
                      for p in (2, 10, 50) for l in (1, 5)))
    check("flat-region kernel value",
          lambda: abs(model_kernel_diag(100, 0.5).log_value.to_float()
                      * 2 * math.pi / 99.0 - 1.0) < 1e-3)

    model = build_surface(k=1)
    check("bridge coefficients", lambda: (
        abs(model.potential.coeffs[0] - (1.5 - math.log(4.0))) < 1e-12
        and abs(model.potential.coeffs[1] - 0.5) < 1e-12
        and abs(model.potential.coeffs[2] - 1.0 / 32.0) < 1e-12))

    def _norm_symmetry():
        from .surface import log_section_norms
        ln = log_section_norms(model, 12)
        return float(np.max(np.abs(ln - ln[::-1]))) < 1e-10

    check("norm symmetry j <-> kp-j", _norm_symmetry)

    def _quotient_small():
        engine = CuspComparison(model, 40)
        return abs(engine.quotient_minus_one(-10.0)) < 1e-4

    check("quotient near 1 in the cusp", _quotient_small)

    def _quotient_positive_and_cross_checked():
        engine = CuspComparison(model, 30)
        for s in (-5.0, -12.0, -25.0):
            fine = engine.quotient(s)
            if fine <= 0 or abs(fine - engine.quotient_direct(s)) > 1e-10:
                return False
        return True

    check("quotient positivity and dual-path agreement",
          _quotient_positive_and_cross_checked)

    def _gauss_exact():
        rule = gauss_rule(6, 0.0, 2.0)
        return abs(rule.integrate(lambda x: x ** 11) - 2.0 ** 12 / 12.0) < 1e-9

    check("quadrature exactness at declared degree", _gauss_exact)

    def _tail_certificate_spot():
        ev = model_kernel_diag(60, 0.02)
        n = ev.terms_used
        s = 2 * math.log(0.02)
        ls = np.arange(1, n + 500, dtype=float)
        logs = 59 * np.log(ls) + ls * s
        m = logs.max()
        head = float(np.exp(logs[:n] - m).sum())
        tail = float(np.exp(logs[n:] - m).sum())
        return tail / head <= ev.certified_relative_tail

    check("kernel tail certificate", _tail_certificate_spot)

    def _echelon():
        from .basislab import project_and_orthonormalize
        basis = project_and_orthonormalize(model, 30)
        worst = max((abs(basis.scaled[j, l]) for l in range(basis.dim)
                     for j in range(min(l, basis.head_count))), default=0.0)
        return worst <= 1e-9

    check("echelon zero block", _echelon)

    def _zeros_quick():
        ens = sample_sections(model, 10, 50, 7)
        again = sample_sections(model, 10, 50, 7)
        same = all(np.array_equal(a, b) for a, b in zip(ens.roots, again.roots))
        return zero_mass_conservation(ens) and not ens.failures and same

    check("zero-mass conservation and reproducibility", _zeros_quick)

    summary = {"config": cfg, "passed": sum(ok for _, ok in checks),
               "failed": sum(not ok for _, ok in checks)}
    if args.output:
        _emit(args, summary)
    return EXIT_OK if summary["failed"] == 0 else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sub, surface=True):
    sub.add_argument("--format", choices=("csv", "json"), default="json")
    sub.add_argument("--output", default=None, help="output path (default stdout)")
    if surface:
        sub.add_argument("--k", type=int, default=1, help="bundle degree")
        sub.add_argument("--model-json", default=None,
                         help="surface model JSON file (overrides --k/--tau)")
        sub.add_argument("--tau", type=float, default=0.0,
                         help="angular perturbation amplitude")
        sub.add_argument("--pert-support", default="-3:3")
        sub.add_argument("--pert-mode", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cusplab",
                                 description="Bergman kernels near Poincare cusps")
    ap.add_argument("--version", action="version", version=__version__)
    sp = ap.add_subparsers(dest="command", required=True)

    mk = sp.add_parser("model-kernel", help="diagonal model kernel on the disc")
    mk.add_argument("--p", type=int, required=True)
    mk.add_argument("--z-abs", type=float, default=None)
    mk.add_argument("--grid", default=None, help="s:a:b:n geometric grid in s")
    mk.add_argument("--tol", type=float, default=1e-12)
    _add_common(mk, surface=False)
    mk.set_defaults(fn=cmd_model_kernel)

    qs = sp.add_parser("quotient-scan", help="kernel quotient over a p-ladder")
    qs.add_argument("--p-ladder", required=True, help="comma list, e.g. 20,40,80")
    qs.add_argument("--s-range", default="-40:-4")
    qs.add_argument("--s-points", type=int, default=400)
    qs.add_argument("--derivatives", action="store_true")
    _add_common(qs)
    qs.set_defaults(fn=cmd_quotient_scan)

    bs = sp.add_parser("basis", help="orthonormal basis reports")
    bs.add_argument("--p", type=int, required=True)
    bs.add_argument("--r", type=float, default=0.05)
    bs.add_argument("--beta", type=float, default=0.85)
    bs.add_argument("--kappa", type=float, default=0.5)
    bs.add_argument("--refined", action="store_true",
                    help="use the refined head count delta'_p")
    bs.add_argument("--export-matrix", action="store_true",
                    help="emit the dense coefficient matrix as (j, l, sign, log_abs) rows")
    _add_common(bs)
    bs.set_defaults(fn=cmd_basis)

    zr = sp.add_parser("zeros", help="random-section zero statistics")
    zr.add_argument("--p", type=int, required=True)
    zr.add_argument("--samples", type=int, default=500)
    zr.add_argument("--seed", type=int, default=0)
    zr.add_argument("--annulus", default="-2:2")
    zr.add_argument("--write-roots", action="store_true")
    _add_common(zr)
    zr.set_defaults(fn=cmd_zeros)

    fs = sp.add_parser("fs-metric", help="Fubini-Study pullback density")
    fs.add_argument("--p", type=int, required=True)
    fs.add_argument("--grid", default="s:-40:-5:50")
    _add_common(fs)
    fs.set_defaults(fn=cmd_fs_metric)

    st = sp.add_parser("selftest", help="fast invariant battery")
    _add_common(st, surface=False)
    st.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    _apply_thread_override()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        _validate(args)
        return args.fn(args)
    except DomainError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CuspLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _apply_thread_override():
    """CUSPLAB_THREADS caps the linear-algebra thread pools (best effort;
    honored by BLAS backends that read their environment lazily)."""
    import os
    n = os.environ.get("CUSPLAB_THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, n)


def _validate(args):
    p = getattr(args, "p", None)
    if p is not None and p < 2:
        raise DomainError(f"tensor power must satisfy p >= 2, got {p}")


if __name__ == "__main__":
    sys.exit(main())
