"""Cutoff sweeps, log-slope fits and the explicit bound constants.

The divergent pieces of the second-order coefficient grow like log Lambda,
so every asymptotic statement is probed the same way: evaluate on a
geometric grid of cutoffs and regress the value on log Lambda.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import coefficients as coef
from .model import PhysicalParams
from .parallel import ordered_map
from .quad import IntegralResult, QuadSpec

__all__ = [
    "QUANTITIES",
    "SweepGrid",
    "SweepTable",
    "LogFit",
    "BoundReport",
    "SandwichReport",
    "DegenerateWindow",
    "InsufficientSpan",
    "SandwichViolated",
    "default_grid",
    "sweep",
    "sweep_reports",
    "fit_log_slope",
    "bound_K",
    "bound_B",
    "explicit_bound",
    "verify_sandwich",
    "suggest_gamma",
]

QUANTITIES = ("a1", "b1", "e2") + tuple(f"i{j}" for j in range(1, 11)) + ("a2",)

_P6 = (2.0 * math.pi) ** -6
_PI2 = math.pi ** 2


class DegenerateWindow(ValueError):
    """Fewer than three points in the fit window."""


class InsufficientSpan(ValueError):
    """The grid spans fewer decades than the check requires."""


class SandwichViolated(AssertionError):
    """A fitted slope fell outside its bound interval."""

    def __init__(self, report: "SandwichReport") -> None:
        self.report = report
        super().__init__(report.diagnostic())


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepGrid:
    """Strictly increasing cutoffs with the quadrature settings for each.

    ``specs`` may hold one QuadSpec per point; otherwise ``spec`` is used
    everywhere.
    """

    lambdas: Tuple[float, ...]
    spec: QuadSpec = field(default_factory=QuadSpec)
    specs: Optional[Tuple[QuadSpec, ...]] = None

    def __post_init__(self) -> None:
        lam = tuple(float(x) for x in self.lambdas)
        object.__setattr__(self, "lambdas", lam)
        if not lam:
            raise ValueError("grid must contain at least one cutoff")
        if any(not math.isfinite(x) for x in lam):
            raise ValueError("grid cutoffs must be finite")
        if any(b <= a for a, b in zip(lam, lam[1:])):
            raise ValueError("invariant violated: grid cutoffs must be strictly increasing")
        if self.specs is not None and len(self.specs) != len(lam):
            raise ValueError("specs must have one entry per cutoff")

    @classmethod
    def geometric(cls, start: float, stop: float, n: int, spec: Optional[QuadSpec] = None) -> "SweepGrid":
        if n < 1:
            raise ValueError("geometric grid needs n >= 1")
        if not (0 < start <= stop):
            raise ValueError("geometric grid needs 0 < start <= stop")
        if n == 1:
            pts = (float(start),)
        else:
            # Endpoints are pinned exactly; interior points come from logspace.
            pts = np.logspace(math.log10(start), math.log10(stop), n)
            pts[0], pts[-1] = start, stop
            pts = tuple(float(x) for x in pts)
        return cls(pts, spec or QuadSpec())

    def spec_at(self, k: int) -> QuadSpec:
        return self.specs[k] if self.specs is not None else self.spec

    @property
    def decades(self) -> float:
        return math.log10(self.lambdas[-1] / self.lambdas[0])

    def check_params(self, params: PhysicalParams) -> None:
        if self.lambdas[0] < params.kappa:
            raise ValueError(
                f"invariant violated: grid cutoffs must be >= kappa (got {self.lambdas[0]!r} < {params.kappa!r})"
            )


def default_grid(params: PhysicalParams, spec: Optional[QuadSpec] = None) -> SweepGrid:
    """Eight geometric points from 1e3 kappa to 1e7 kappa."""
    return SweepGrid.geometric(1e3 * params.kappa, 1e7 * params.kappa, 8, spec)


@dataclass(frozen=True)
class SweepTable:
    quantity: str
    lambdas: Tuple[float, ...]
    values: Tuple[float, ...]
    errors: Tuple[float, ...]
    converged: Tuple[bool, ...]

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.lambdas, self.values, self.errors))

    def __len__(self) -> int:
        return len(self.lambdas)


@functools.lru_cache(maxsize=4096)
def _report(params: PhysicalParams, spec: QuadSpec, angular: str) -> coef.CoefficientReport:
    return coef.a2(params, spec, angular)


@functools.lru_cache(maxsize=4096)
def _single(quantity: str, params: PhysicalParams, spec: QuadSpec, angular: str) -> IntegralResult:
    if quantity == "a1":
        return coef.a1(params, spec)
    if quantity == "b1":
        return coef.b1(params, spec)
    if quantity == "e2":
        return coef.e2(params, spec)
    return coef.iterm(int(quantity[1:]), params, spec, angular)


def _check_quantity(quantity: str) -> None:
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {', '.join(QUANTITIES)}")


def sweep_reports(grid: SweepGrid, params: PhysicalParams,
                  angular: str = "closed") -> List[coef.CoefficientReport]:
    """Full coefficient reports, one per grid point, in grid order."""
    grid.check_params(params)
    points = [(params.with_lambda(lam), grid.spec_at(k)) for k, lam in enumerate(grid.lambdas)]
    return ordered_map(lambda ps: _report(ps[0], ps[1], angular), points)


def sweep(quantity: str, grid: SweepGrid, params: PhysicalParams = PhysicalParams(),
          angular: str = "closed") -> SweepTable:
    """Evaluate one quantity on every grid cutoff.

    ``params`` supplies m, nu and kappa; its own cutoff is ignored. The
    two-body integrals default to the closed-form angular reduction, which
    keeps sweeps up to 1e7 kappa at a few seconds.
    """
    _check_quantity(quantity)
    grid.check_params(params)
    if quantity == "a2":
        reps = sweep_reports(grid, params, angular)
        return SweepTable("a2", grid.lambdas, tuple(r.a2 for r in reps),
                          tuple(r.error_estimates["a2"] for r in reps),
                          tuple(r.converged for r in reps))
    points = [(params.with_lambda(lam), grid.spec_at(k)) for k, lam in enumerate(grid.lambdas)]
    res = ordered_map(lambda ps: _single(quantity, ps[0], ps[1], angular), points)
    return SweepTable(quantity, grid.lambdas, tuple(r.value for r in res),
                      tuple(r.error_estimate for r in res), tuple(r.converged for r in res))


# ---------------------------------------------------------------- fitting

@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    residual_rms: float
    window: Tuple[int, int]

    def predict(self, lam: float) -> float:
        return self.slope * math.log(lam) + self.intercept


TableLike = Union[SweepTable, Sequence[Tuple[float, float]]]


def _xy(table: TableLike) -> Tuple[List[float], List[float]]:
    if isinstance(table, SweepTable):
        return list(table.lambdas), list(table.values)
    pts = list(table)
    return [float(p[0]) for p in pts], [float(p[1]) for p in pts]


def fit_log_slope(table: TableLike, window: Optional[Tuple[int, int]] = None) -> LogFit:
    """Least-squares fit of value = slope * log(Lambda) + intercept.

    ``window`` is a half-open index range ``(start, stop)``. By default the
    leftmost third of the points is dropped, since the non-logarithmic
    transients die off only slowly.

    >>> import math
    >>> pts = [(lam, 2 * math.log(lam) + 5) for lam in (10.0, 100.0, 1000.0)]
    >>> f = fit_log_slope(pts, (0, 3))
    >>> round(f.slope, 12), round(f.intercept, 12)
    (2.0, 5.0)
    """
    lam, val = _xy(table)
    n = len(lam)
    if window is None:
        window = (n // 3, n)
    start, stop = window
    if not (0 <= start <= stop <= n):
        raise DegenerateWindow(f"window {window!r} out of range for {n} points")
    if stop - start < 3:
        raise DegenerateWindow(f"fit window {window!r} holds {stop - start} points, need at least 3")
    x = [math.log(v) for v in lam[start:stop]]
    y = val[start:stop]
    k = len(x)
    xm = math.fsum(x) / k
    ym = math.fsum(y) / k
    dx = [xi - xm for xi in x]
    sxx = math.fsum(d * d for d in dx)
    if sxx == 0:
        raise DegenerateWindow("fit window has no spread in log(Lambda)")
    sxy = math.fsum(d * (yi - ym) for d, yi in zip(dx, y))
    slope = sxy / sxx
    intercept = ym - slope * xm
    res = [yi - (slope * xi + intercept) for xi, yi in zip(x, y)]
    rms = math.sqrt(math.fsum(r * r for r in res) / k)
    return LogFit(slope, intercept, rms, (start, stop))


# ---------------------------------------------------------------- bound constants

def bound_K(params: PhysicalParams) -> float:
    s = math.sqrt((params.kappa + 1.0) ** 2 + params.nu**2)
    return 1.0 / (s * ((params.kappa + 1.0) ** 2 / (2.0 * params.m) + s) ** 4)


def bound_B(params: PhysicalParams) -> float:
    k = params.kappa
    return ((k + 1.0) ** 3 - k**3) / (6.0 * params.nu**2)


def _Q(params: PhysicalParams) -> float:
    k, nu = params.kappa, params.nu
    return 1.0 / params.m + 2.0 * math.sqrt(k * k + nu * nu) / (k * k)


@dataclass(frozen=True)
class BoundReport:
    target: str
    lower_slope: Optional[float] = None
    upper_slope: Optional[float] = None
    constant_bound: Optional[float] = None
    notes: Tuple[str, ...] = ()


BOUND_TARGETS = ("i1", "i2", "i3", "i4", "i5", "i6", "i7", "i8", "a2", "K", "B")


def explicit_bound(target: str, params: PhysicalParams, prefactor_scale: float = 1.0) -> BoundReport:
    """Explicit slope or constant bounds with the polar prefactors applied.

    ``prefactor_scale`` multiplies every polar prefactor. It exists so the
    verification pipeline can be shown to fail when a constant is wrong; it
    stays at 1 in normal use.
    """
    if target not in BOUND_TARGETS:
        raise ValueError(f"unknown bound target {target!r}; expected one of {', '.join(BOUND_TARGETS)}")
    m, k = params.m, params.kappa
    p1 = _PI2 * _P6 * prefactor_scale
    p2 = 2.0 * p1
    p4 = 4.0 * p1
    if target == "K":
        return BoundReport("K", constant_bound=bound_K(params))
    if target == "B":
        return BoundReport("B", constant_bound=bound_B(params))
    if target == "i1":
        K, B = bound_K(params), bound_B(params)
        lower = p4 * K * ((k + 1.0) ** 5 - k**5) / (10.0 * math.sqrt(2.0) * (1.0 / m + math.sqrt(2.0)))
        upper = p4 * 64.0 * m**5 / k**4
        const = p4 * (112.0 * m**4 / (3.0 * k**3) + 8.0 * m**4 * B / k**4)
        return BoundReport("i1", lower, upper, const, (
            "upper-bound constant uses 8 m^4 B / kappa^4, the value implied by summing the two partial bounds",
            "lower bound uses sqrt(2) in the (1/m + sqrt(2)) factor",
        ))
    if target == "i2":
        return BoundReport("i2", 0.0, p2 * 64.0 * m**5 / k**4, None, (
            "no lower slope is derived for I2; positivity gives 0",
        ))
    if target == "i3":
        q = _Q(params)
        return BoundReport("i3", constant_bound=p1 * (1190.0 * m**4 * q / k**2 + 10880.0 * m**6 * q / k**4))
    if target == "i4":
        return BoundReport("i4", constant_bound=p2 * 2.0 * (375.0 * m**3 / (8.0 * k**2) + 128.0 * m**5 / k**4))
    if target == "i5":
        return BoundReport("i5", constant_bound=p2 * 32.0 * m**3 / (3.0 * k**2), notes=(
            "uses m^3; the intermediate weight carries one power of m, not two",
        ))
    if target == "i6":
        return BoundReport("i6", constant_bound=p1 * 2.0 * (350.0 * m**2 / (3.0 * k) + 1024.0 * m**5 / k**4))
    if target == "i7":
        q = _Q(params)
        return BoundReport("i7", constant_bound=p2 * (
            620.0 * m**4 * q * q / k + 400.0 * m**7 * q * q / k**4 + 512.0 * m**2 / (15.0 * k)
        ), notes=("second term uses m^7, consistent with its ingredient bounds",))
    if target == "i8":
        notes = ()
        if k < 1.0:
            notes = ("the r^-3/4 step assumes kappa >= 1; the constant is not proven for kappa < 1",)
        return BoundReport("i8", constant_bound=p2 * 2.0 * (
            16.0 * m**5 / k + 256.0 * m / (27.0 * k**0.75) + 32.0 * m**2 / (3.0 * k)
            + 8.0 * m**3 / k**2 + 128.0 * m**4 / (15.0 * k**3)
        ), notes=notes)
    # a2: the slope comes from I1 + I2 and from E2 ~ -(m/pi^2) log Lambda
    # multiplying the convergent I9. 0 <= I9 <= (1/4pi^2) 4 m^4 / kappa^4.
    b1_ = explicit_bound("i1", params, prefactor_scale)
    b2_ = explicit_bound("i2", params, prefactor_scale)
    i9_max = 4.0 * m**4 / (4.0 * _PI2 * k**4)
    lower = 2.0 / (3.0 * m) * (b1_.lower_slope + b2_.lower_slope) - i9_max / _PI2
    upper = 2.0 / (3.0 * m) * (b1_.upper_slope + b2_.upper_slope)
    return BoundReport("a2", lower, upper, None, (
        "I9 enters through 0 <= I9 <= m^4 / (pi^2 kappa^4)",
    ))


# ---------------------------------------------------------------- sandwich

@dataclass(frozen=True)
class SandwichReport:
    target: str
    fit: LogFit
    lower: float
    upper: float
    sigma: float
    passed: bool
    rows: Tuple[Tuple[float, float, float], ...]
    notes: Tuple[str, ...] = ()

    def diagnostic(self) -> str:
        lines = [
            f"{self.target}: slope {self.fit.slope!r} vs [{self.lower!r}, {self.upper!r}] "
            f"with sigma {self.sigma!r} -> {'ok' if self.passed else 'VIOLATED'}",
            "lambda,value,error",
        ]
        lines += [f"{lam!r},{v!r},{e!r}" for lam, v, e in self.rows]
        return "\n".join(lines)


def _require_span(grid: SweepGrid, decades: float = 3.0) -> None:
    if grid.decades < decades - 1e-12:
        raise InsufficientSpan(
            f"invariant violated: grid must span at least {decades:g} decades (spans {grid.decades:.3g})"
        )


def verify_sandwich(target: str, grid: SweepGrid, params: PhysicalParams,
                    spec: Optional[QuadSpec] = None, table: Optional[SweepTable] = None,
                    angular: str = "closed", prefactor_scale: float = 1.0,
                    raise_on_failure: bool = True) -> SandwichReport:
    """Check lower - 3 sigma <= fitted slope <= upper + 3 sigma.

    ``sigma`` is the residual rms of the fit. A precomputed ``table`` may
    be passed instead of sweeping ``grid``.
    """
    if target not in ("i1", "i2", "a2"):
        raise ValueError(f"sandwich target must be i1, i2 or a2, got {target!r}")
    _require_span(grid)
    if spec is not None:
        grid = SweepGrid(grid.lambdas, spec)
    if table is None:
        table = sweep(target, grid, params, angular)
    fit = fit_log_slope(table)
    bnd = explicit_bound(target, params, prefactor_scale)
    sigma = fit.residual_rms
    lo, hi = bnd.lower_slope, bnd.upper_slope
    ok = (lo - 3 * sigma) <= fit.slope <= (hi + 3 * sigma)
    rep = SandwichReport(target, fit, lo, hi, sigma, ok, tuple(table.rows()), bnd.notes)
    if not ok and raise_on_failure:
        raise SandwichViolated(rep)
    return rep


def suggest_gamma(params: PhysicalParams, alpha: float, grid: SweepGrid,
                  spec: Optional[QuadSpec] = None, angular: str = "closed") -> float:
    """D alpha^2 / C with D the fitted a2 log-slope and C the a1 limit.

    C is read off at the largest grid cutoff, where a1 has converged.
    """
    if alpha == 0:
        return 0.0
    if spec is not None:
        grid = SweepGrid(grid.lambdas, spec)
    reps = sweep_reports(grid, params, angular)
    d = fit_log_slope(SweepTable("a2", grid.lambdas, tuple(r.a2 for r in reps),
                                 tuple(r.error_estimates["a2"] for r in reps),
                                 tuple(r.converged for r in reps))).slope
    c = reps[-1].a1
    return d * alpha * alpha / c
