"""Command-line entry point: ``mefflab {coeffs,sweep,verify,expand}``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input,
3 a quadrature did not converge (output is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from . import asymptotics as asy
from . import coefficients as coef
from . import wick
from .model import InvalidParameters, PhysicalParams
from .quad import NonConvergence, QuadSpec

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_NONCONV = 0, 1, 2, 3

# Relative agreement demanded of the two independent a2 paths.
WICK_REL_TOL = 1e-6
E2_SLOPE_REL_TOL = 0.01


class UsageError(ValueError):
    """Bad command-line input that argparse itself cannot catch."""


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    alpha: float
    quad: QuadSpec
    grid: Optional[str]
    out: Optional[str]
    fmt: str = "csv"
    prefactor_scale: float = 1.0


# ---------------------------------------------------------------- parsing

def parse_grid(text: str, spec: QuadSpec) -> asy.SweepGrid:
    """``geometric:START:STOP:N`` or ``list:v1,v2,...``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "geometric":
            start, stop, n = rest.split(":")
            n_i = int(n)
            return asy.SweepGrid.geometric(float(start), float(stop), n_i, spec)
        if kind == "list":
            return asy.SweepGrid(tuple(float(v) for v in rest.split(",")), spec)
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    raise UsageError(f"bad grid {text!r}: expected geometric:START:STOP:N or list:v1,v2,...")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=float, default=1.0, help="bare particle mass")
    p.add_argument("--nu", type=float, default=1.0, help="boson mass")
    p.add_argument("--kappa", type=float, default=1.0, help="infrared cutoff")
    p.add_argument("--lambda", dest="lam", type=float, default=10.0, help="ultraviolet cutoff")
    p.add_argument("--alpha", type=float, default=0.1, help="coupling constant")
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-14)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    # Test hook: scales every bound prefactor to show a wrong constant is caught.
    p.add_argument("--prefactor-scale", type=float, default=1.0, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mefflab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("coeffs", help="all coefficients at one cutoff")
    _common(p)
    p.add_argument("--angular", choices=coef.ANGULAR_MODES, default="closed",
                   help="z integral by closed form (default) or by quadrature")
    p = sub.add_parser("sweep", help="coefficients on a grid of cutoffs")
    _common(p)
    p.add_argument("--grid", default=None, help="geometric:START:STOP:N or list:v1,v2,...")
    p.add_argument("--quantity", action="append", choices=asy.QUANTITIES,
                   help="restrict columns (repeatable; default all)")
    p.add_argument("--fit", action="store_true", help="add log-slope fits to json output")
    p = sub.add_parser("verify", help="run the bound and cross-check suite")
    _common(p)
    p.add_argument("--grid", default=None, help="default geometric:1e3k:1e7k:8")
    p = sub.add_parser("expand", help="print the perturbative vectors symbolically")
    p.add_argument("--order", type=int, default=3, help="highest order, 1..3")
    p.add_argument("--out", help="output file (default: stdout)")
    return parser


def make_config(ns: argparse.Namespace) -> RunConfig:
    params = PhysicalParams(m=ns.m, nu=ns.nu, kappa=ns.kappa, lam=ns.lam)
    if not math.isfinite(ns.alpha):
        raise UsageError("alpha must be finite")
    quad = QuadSpec(rel_tol=ns.rel_tol, abs_tol=ns.abs_tol)
    return RunConfig(params, ns.alpha, quad, getattr(ns, "grid", None), ns.out, ns.fmt,
                     ns.prefactor_scale)


def _grid(cfg: RunConfig) -> asy.SweepGrid:
    if cfg.grid is None:
        return asy.default_grid(cfg.params, cfg.quad)
    return parse_grid(cfg.grid, cfg.quad)


# ---------------------------------------------------------------- output

def _columns(quantities: Sequence[str]) -> List[str]:
    cols = ["lambda"]
    for q in quantities:
        cols += [q, f"{q}_err"]
    return cols + ["converged"]


def _report_row(rep: coef.CoefficientReport, quantities: Sequence[str]) -> Dict[str, object]:
    vals = rep.values()
    row: Dict[str, object] = {"lambda": rep.params.lam}
    for q in quantities:
        row[q] = vals[q]
        row[f"{q}_err"] = rep.error_estimates[q]
    row["converged"] = rep.converged
    return row


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(cfg: RunConfig, columns: List[str], rows: List[Dict[str, object]],
           checks: Optional[List[Dict[str, object]]] = None, extra: Optional[dict] = None) -> str:
    if cfg.fmt == "json":
        doc = {"params": cfg.params.as_dict(), "alpha": cfg.alpha, "rows": rows,
               "checks": checks or []}
        doc.update(extra or {})
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    if checks:
        buf.write("\n")
        w.writerow(["check", "passed", "value", "lower", "upper"])
        for c in checks:
            w.writerow([_cell(c[k]) for k in ("name", "passed", "value", "lower", "upper")])
    return buf.getvalue()


def read_csv_rows(text: str) -> List[Dict[str, object]]:
    """Parse the data block of a csv this module wrote back into typed rows."""
    block = text.split("\n\n", 1)[0]
    rows = []
    for r in csv.DictReader(io.StringIO(block)):
        rows.append({k: (v == "true") if k == "converged" else float(v) for k, v in r.items()})
    return rows


def _emit(cfg_out: Optional[str], text: str) -> None:
    if cfg_out:
        with open(cfg_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_coeffs(cfg: RunConfig, angular: str = "closed") -> int:
    rep = coef.a2(cfg.params, cfg.quad, angular)
    cols = _columns(coef.CoefficientReport.field_names())
    row = _report_row(rep, coef.CoefficientReport.field_names())
    cols.insert(-1, "meff_ratio")
    row["meff_ratio"] = 1.0 + rep.a1 * cfg.alpha**2 + rep.a2 * cfg.alpha**4
    _emit(cfg.out, render(cfg, cols, [row]))
    return EXIT_OK if rep.converged else EXIT_NONCONV


def cmd_sweep(cfg: RunConfig, quantities: Optional[Sequence[str]] = None, fit: bool = False) -> int:
    grid = _grid(cfg)
    qs = list(quantities) if quantities else list(asy.QUANTITIES)
    reps = asy.sweep_reports(grid, cfg.params)
    rows = [_report_row(r, qs) for r in reps]
    extra = None
    if fit and cfg.fmt == "json" and len(reps) - len(reps) // 3 >= 3:
        fits = {}
        for q in qs:
            f = asy.fit_log_slope([(r["lambda"], r[q]) for r in rows])
            fits[q] = {"slope": f.slope, "intercept": f.intercept,
                       "residual_rms": f.residual_rms, "window": list(f.window)}
        extra = {"fits": fits}
    _emit(cfg.out, render(cfg, _columns(qs), rows, extra=extra))
    return EXIT_OK if all(r.converged for r in reps) else EXIT_NONCONV


def _check(name: str, passed: bool, value: float, lower: Optional[float] = None,
           upper: Optional[float] = None, detail: str = "") -> Dict[str, object]:
    return {"name": name, "passed": bool(passed), "value": value,
            "lower": lower if lower is not None else "", "upper": upper if upper is not None else "",
            "detail": detail}


def run_checks(cfg: RunConfig, grid: asy.SweepGrid):
    """Every verification check; returns (rows, checks, converged)."""
    params, scale = cfg.params, cfg.prefactor_scale
    if grid.decades < 3.0 - 1e-12:
        raise asy.InsufficientSpan(f"grid must span at least 3 decades (spans {grid.decades:.3g})")
    reps = asy.sweep_reports(grid, params)
    names = coef.CoefficientReport.field_names()
    rows = [_report_row(r, names) for r in reps]
    conv = all(r.converged for r in reps)

    def table(q):
        return asy.SweepTable(q, grid.lambdas, tuple(r.values()[q] for r in reps),
                              tuple(r.error_estimates[q] for r in reps),
                              tuple(r.converged for r in reps))

    checks = []
    for t in ("i1", "i2", "a2"):
        s = asy.verify_sandwich(t, grid, params, table=table(t), prefactor_scale=scale,
                                raise_on_failure=False)
        checks.append(_check(f"sandwich_{t}", s.passed, s.fit.slope, s.lower - 3 * s.sigma,
                             s.upper + 3 * s.sigma, f"sigma={s.sigma!r}"))
    f = asy.fit_log_slope(table("e2"))
    target = -params.m / math.pi**2
    checks.append(_check("e2_slope", abs(f.slope - target) <= E2_SLOPE_REL_TOL * abs(target), f.slope,
                         target * (1 + E2_SLOPE_REL_TOL), target * (1 - E2_SLOPE_REL_TOL)))
    b1 = asy.explicit_bound("i1", params, scale)
    shift = math.log(params.kappa + 1 + params.nu + params.m)
    ok = all(r.i[0] >= b1.lower_slope * (math.log(r.params.lam) - shift)
             for r in reps if r.params.lam > params.kappa + 1 + params.nu + params.m)
    checks.append(_check("i1_nonasymptotic", ok, min(r.i[0] for r in reps)))
    for j in range(3, 9):
        bnd = asy.explicit_bound(f"i{j}", params, scale).constant_bound
        worst = max(abs(r.i[j - 1]) for r in reps)
        checks.append(_check(f"bound_i{j}", worst <= bnd, worst, None, bnd))
    if not params.empty_shell:
        lib = coef.a2(params, cfg.quad, "numeric")
        wk = wick.wick_coefficients(params, cfg.quad)
        rel = abs(lib.a2 - wk.a2) / abs(wk.a2)
        conv = conv and lib.converged and wk.converged
        checks.append(_check("wick_a2", rel <= WICK_REL_TOL, rel, None, WICK_REL_TOL,
                             f"coefficients={lib.a2!r} wick={wk.a2!r}"))
    return rows, checks, conv


def cmd_verify(cfg: RunConfig) -> int:
    grid = _grid(cfg)
    grid.check_params(cfg.params)
    rows, checks, conv = run_checks(cfg, grid)
    gamma = asy.suggest_gamma(cfg.params, cfg.alpha, grid)
    text = render(cfg, _columns(coef.CoefficientReport.field_names()), rows, checks,
                  {"derived": {"gamma": gamma}})
    _emit(cfg.out, text)
    for c in checks:
        state = "PASS" if c["passed"] else "FAIL"
        print(f"{state} {c['name']}: value={c['value']!r} {c['detail']}".rstrip(), file=sys.stderr)
    if not all(c["passed"] for c in checks):
        return EXIT_CHECK
    return EXIT_OK if conv else EXIT_NONCONV


def expand_text(order: int) -> str:
    if not 1 <= order <= 3:
        raise UsageError(f"order must be in 1..3, got {order!r}")
    out = []
    for n in range(order + 1):
        out.append(f"phi_{n} =")
        out += ["  " + line for line in wick.pretty(wick.build_phi(n)).splitlines()]
    for n in range(order + 1):
        out.append(f"Phi_{n} =")
        out += ["  " + line for line in wick.pretty(wick.build_capital_phi(n)).splitlines()]
    if order >= 3:
        terms = wick.c2_terms()
        out.append(f"c2 terms: {len(terms)} total, {sum(not t.is_zero for t in terms)} nonzero")
        out += [wick.pretty(t) for t in terms]
        rest = wick.c_dependence(wick.c2_expression(terms))
        out.append("c2 depends on: " + (", ".join(map(str, rest)) if rest else "none of c0..c3"))
    return "\n".join(out) + "\n"


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "expand":
            _emit(ns.out, expand_text(ns.order))
            return EXIT_OK
        cfg = make_config(ns)
        with warnings.catch_warnings():
            # Convergence is reported through the exit code and row flags.
            warnings.simplefilter("ignore", NonConvergence)
            if ns.command == "coeffs":
                return cmd_coeffs(cfg, ns.angular)
            if ns.command == "sweep":
                return cmd_sweep(cfg, ns.quantity, ns.fit)
            return cmd_verify(cfg)
    except (InvalidParameters, UsageError, asy.InsufficientSpan, ValueError) as exc:
        print(f"mefflab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
