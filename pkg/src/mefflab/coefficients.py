"""Effective-mass expansion coefficients at a single cutoff.

All quantities are radial reductions of momentum-space integrals with a
form factor equal to (2 pi)**-3/2 on the shell kappa <= |k| <= Lambda. For
two-boson integrals

    int dk1 dk2 f = 8 pi^2 int r1^2 r2^2 dr1 dr2 int_{-1}^{1} dz f,

with k1.k2 = r1 r2 z and |phi1|^2 |phi2|^2 = (2 pi)**-6.

The second-order coefficient is assembled as

    a2 = 2/(3m) sum_{j<=8} w_j I_j + (E2/m) I_9 - a1 I_10 + a1^2

with weights w = (1, 1, 2, 1, 1, 1, 1, 0). The inner product that would
produce I_8 equals, by self-adjointness, the one producing I_4/2 + I_3, so
I_3 is counted twice and I_8 not at all. I_8 is still computed and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .model import PhysicalParams, _bigF, _omega
from .parallel import ordered_map
from .quad import IntegralResult, QuadSpec, integrate_1d, integrate_2d, integrate_3d

__all__ = [
    "ANGULAR_MODES",
    "CoefficientReport",
    "SeriesRequest",
    "a1",
    "a2",
    "b1",
    "e2",
    "iterm",
    "meff_ratio",
    "angular_moment",
    "two_body_integrand",
    "ITERM_PREFACTOR",
    "A2_WEIGHTS",
    "assemble_a2",
]

_P6 = (2.0 * math.pi) ** -6
_PI2 = math.pi ** 2

# Polar-reduction prefactors of I_1..I_8; I_9 and I_10 are one-dimensional.
ITERM_PREFACTOR: Dict[int, float] = {
    1: 2 * _PI2 * _P6,
    2: _PI2 * _P6,
    3: _PI2 * _P6,
    4: 2 * _PI2 * _P6,
    5: 2 * _PI2 * _P6,
    6: _PI2 * _P6,
    7: 2 * _PI2 * _P6,
    8: 2 * _PI2 * _P6,
    9: 1.0 / (4 * _PI2),
    10: 1.0 / (4 * _PI2),
}

# Weights of I_1..I_8 in the assembly of a2.
A2_WEIGHTS: Tuple[int, ...] = (1, 1, 2, 1, 1, 1, 1, 0)

ANGULAR_MODES = ("numeric", "closed")

# Below this ratio B/A the z-odd moments are summed as a power series.
_SERIES_T = 0.1


# ---------------------------------------------------------------- angular moments

def _U(n: int, A: np.ndarray, B: np.ndarray, D: np.ndarray) -> np.ndarray:
    """int_{-1}^{1} (A + B z)^-n dz with D = A - B supplied separately.

    Near the diagonal r1 = r2 at large momenta D is tiny compared with A,
    and forming it as A - B would throw away most of its digits.
    """
    if n == 0:
        return np.full_like(A, 2.0)
    lg = np.log1p(2.0 * B / D)
    if n == 1:
        return lg / B
    q = n - 1
    # D^-q - (A+B)^-q written without cancellation.
    return (A + B) ** (-q) * np.expm1(q * lg) / (q * B)


def _v_series(n: int, t: np.ndarray) -> np.ndarray:
    """int_{-1}^{1} z (1 + t z)^-n dz as a power series in t."""
    total = np.zeros_like(t)
    coeff = float(n)  # binom(n + k - 1, k) at k = 1
    tk = t.copy()
    t2 = t * t
    for k in range(1, 40, 2):
        total -= coeff * tk * (2.0 / (k + 2))
        coeff *= (n + k) * (n + k + 1) / ((k + 1) * (k + 2))
        tk = tk * t2
    return total


def angular_moment(p: int, n: int, A, B, D=None) -> np.ndarray:
    """Closed form of int_{-1}^{1} z^p (A + B z)^-n dz for p in {0, 1}, 0 < B < A.

    ``D`` is ``A - B``; pass it when it can be computed without cancellation.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    D = A - B if D is None else np.asarray(D, dtype=float)
    if p == 0:
        return _U(n, A, B, D)
    t = B / A
    small = t < _SERIES_T
    out = np.empty(np.broadcast(A, B).shape)
    if small.any():
        out[small] = _v_series(n, t[small]) * A[small] ** (-n)
    big = ~small
    if big.any():
        Ab, Bb, Db = A[big], B[big], D[big]
        out[big] = (_U(n - 1, Ab, Bb, Db) - Ab * _U(n, Ab, Bb, Db)) / Bb
    return out


# ---------------------------------------------------------------- integrands

def two_body_integrand(j: int, m: float, nu: float, r1, r2, ang: Callable) -> np.ndarray:
    """Radial part of I_j (j = 1..8) times the angular factor ``ang(p, n)``.

    ``ang(p, n)`` stands for z^p / L^n. Passing pointwise values gives the
    three-dimensional integrand, passing the z-integrated moments gives the
    two-dimensional one.
    """
    w1, w2 = _omega(nu, r1), _omega(nu, r2)
    f1, f2 = _bigF(m, nu, r1), _bigF(m, nu, r2)
    g1, g2 = 1.0 / f1, 1.0 / f2
    rr = r1 * r1 * r2 * r2 / (w1 * w2)
    sym = 1.0 / f1 + 1.0 / f2
    if j == 1:
        return rr * (r1 * r1 * g1**3 + r2 * r2 * g2**3) * sym * ang(0, 1)
    if j == 2:
        return rr * (r1 * r1 * g1**4 + r2 * r2 * g2**4) * ang(0, 1)
    if j == 4:
        return rr * (r1 * r1 * g1**2 + r2 * r2 * g2**2) * sym * ang(0, 2)
    if j == 6:
        return rr * sym * sym * (r1 * r1 + r2 * r2) * ang(0, 3)
    rrr = rr * r1 * r2
    if j == 3:
        return rrr * (g1 * g1 + g2 * g2) * sym * ang(1, 2)
    if j == 5:
        return rrr * (g1 * g1) * (g2 * g2) * ang(1, 1)
    if j == 7:
        return rrr * sym * sym * ang(1, 3)
    if j == 8:
        return rrr * sym * ang(1, 4)
    raise ValueError(f"no two-body integrand for j={j}")


def _check_j(j: int) -> None:
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or not 1 <= j <= 10:
        raise ValueError(f"iterm index must be an integer in 1..10, got {j!r}")


def _radial(params: PhysicalParams, f: Callable, spec: QuadSpec) -> IntegralResult:
    return integrate_1d(f, params.kappa, params.lam, spec)


def a1(params: PhysicalParams, spec: Optional[QuadSpec] = None) -> IntegralResult:
    """First-order coefficient (1/(6 pi^2 m)) int r^4 / (omega F^3) dr."""
    if params.empty_shell:
        return IntegralResult.exact_zero()
    m, nu = params.m, params.nu
    res = _radial(params, lambda r: r**4 / (_omega(nu, r) * _bigF(m, nu, r) ** 3), spec or QuadSpec())
    return res.scaled(1.0 / (6.0 * _PI2 * m))


def e2(params: PhysicalParams, spec: Optional[QuadSpec] = None) -> IntegralResult:
    """Second derivative of the ground-state energy in alpha at alpha = 0."""
    if params.empty_shell:
        return IntegralResult.exact_zero()
    m, nu = params.m, params.nu
    res = _radial(params, lambda r: r * r / (_omega(nu, r) * _bigF(m, nu, r)), spec or QuadSpec())
    return res.scaled(-1.0 / (2.0 * _PI2))


def b1(params: PhysicalParams, spec: Optional[QuadSpec] = None) -> IntegralResult:
    """Norm correction (phi_1, phi_1).

    Integrated in the logarithmic variable s = log r so that it shares no
    nodes or panels with the radial I_10 it must agree with.
    """
    if params.empty_shell:
        return IntegralResult.exact_zero()
    m, nu = params.m, params.nu

    def f(s):
        r = np.exp(s)
        return r**3 / (_omega(nu, r) * _bigF(m, nu, r) ** 2)

    spec = spec or QuadSpec()
    res = integrate_1d(f, math.log(params.kappa), math.log(params.lam),
                       QuadSpec(spec.rel_tol, spec.abs_tol, spec.max_subdivisions,
                                "uniform", spec.panels_per_decade))
    return res.scaled(1.0 / (4.0 * _PI2))


def iterm(j: int, params: PhysicalParams, spec: Optional[QuadSpec] = None,
          angular: str = "numeric") -> IntegralResult:
    """The integral I_j of the second-order expansion.

    Parameters
    ----------
    j : int
        Index 1..10.
    angular : {"numeric", "closed"}
        For j <= 8, whether z is integrated adaptively (three-dimensional
        quadrature) or through its elementary antiderivative, leaving a
        two-dimensional radial integral. Both give the same number within
        the quadrature error; "closed" is much faster at large cutoffs.
    """
    _check_j(j)
    if angular not in ANGULAR_MODES:
        raise ValueError(f"angular must be one of {ANGULAR_MODES}, got {angular!r}")
    if params.empty_shell:
        return IntegralResult.exact_zero()
    spec = spec or QuadSpec()
    m, nu, k, lam = params.m, params.nu, params.kappa, params.lam
    pref = ITERM_PREFACTOR[j]
    if j == 9:
        res = _radial(params, lambda r: r**4 / (_omega(nu, r) * _bigF(m, nu, r) ** 4), spec)
        return res.scaled(pref)
    if j == 10:
        res = _radial(params, lambda r: r * r / (_omega(nu, r) * _bigF(m, nu, r) ** 2), spec)
        return res.scaled(pref)
    if angular == "numeric":
        def f3(z, r1, r2):
            L = (r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * z) / (2.0 * m) + _omega(nu, r1) + _omega(nu, r2)
            return two_body_integrand(j, m, nu, r1, r2, lambda p, n: z**p / L**n)
        res = integrate_3d(f3, ((-1.0, 1.0), (k, lam), (k, lam)), spec)
    else:
        def f2(r1, r2):
            w = _omega(nu, r1) + _omega(nu, r2)
            A = (r1 * r1 + r2 * r2) / (2.0 * m) + w
            B = r1 * r2 / m
            D = (r1 - r2) ** 2 / (2.0 * m) + w
            return two_body_integrand(j, m, nu, r1, r2, lambda p, n: angular_moment(p, n, A, B, D))
        res = integrate_2d(f2, ((k, lam), (k, lam)), spec)
    return res.scaled(pref)


# ---------------------------------------------------------------- assembly

_FIELDS = ("a1", "b1", "e2") + tuple(f"i{j}" for j in range(1, 11)) + ("a2",)


@dataclass(frozen=True)
class CoefficientReport:
    params: PhysicalParams
    a1: float
    b1: float
    e2: float
    i: Tuple[float, ...]
    a2: float
    error_estimates: Dict[str, float]
    converged: bool = True
    angular: str = "numeric"

    def iterm(self, j: int) -> float:
        """I_j with the one-based index used throughout."""
        _check_j(j)
        return self.i[j - 1]

    def values(self) -> Dict[str, float]:
        out = {"a1": self.a1, "b1": self.b1, "e2": self.e2}
        out.update({f"i{j}": self.i[j - 1] for j in range(1, 11)})
        out["a2"] = self.a2
        return out

    @staticmethod
    def field_names() -> Tuple[str, ...]:
        return _FIELDS


def assemble_a2(m: float, i: Tuple[float, ...], e2v: float, a1v: float) -> float:
    return math.fsum([
        (2.0 / (3.0 * m)) * math.fsum(w * v for w, v in zip(A2_WEIGHTS, i)),
        (e2v / m) * i[8],
        -a1v * i[9],
        a1v * a1v,
    ])


def a2(params: PhysicalParams, spec: Optional[QuadSpec] = None,
       angular: str = "numeric") -> CoefficientReport:
    """Every piece of the second-order coefficient at one cutoff."""
    spec = spec or QuadSpec()
    if params.empty_shell:
        zeros = {name: 0.0 for name in _FIELDS}
        return CoefficientReport(params, 0.0, 0.0, 0.0, (0.0,) * 10, 0.0, zeros,
                                 True, angular)
    jobs = [("a1", None), ("b1", None), ("e2", None)] + [("i", j) for j in range(1, 11)]

    def run(job):
        kind, j = job
        if kind == "a1":
            return a1(params, spec)
        if kind == "b1":
            return b1(params, spec)
        if kind == "e2":
            return e2(params, spec)
        return iterm(j, params, spec, angular)

    res = ordered_map(run, jobs)
    ra1, rb1, re2, ri = res[0], res[1], res[2], res[3:]
    i = tuple(r.value for r in ri)
    m = params.m
    a2v = assemble_a2(m, i, re2.value, ra1.value)
    errs = {"a1": ra1.error_estimate, "b1": rb1.error_estimate, "e2": re2.error_estimate}
    errs.update({f"i{j}": ri[j - 1].error_estimate for j in range(1, 11)})
    errs["a2"] = math.fsum([
        (2.0 / (3.0 * m)) * math.fsum(w * errs[f"i{j}"] for j, w in enumerate(A2_WEIGHTS, 1)),
        abs(i[8] / m) * errs["e2"],
        abs(re2.value / m) * errs["i9"],
        abs(i[9]) * errs["a1"],
        abs(ra1.value) * errs["i10"],
        2.0 * abs(ra1.value) * errs["a1"],
    ])
    return CoefficientReport(params, ra1.value, rb1.value, re2.value, i, a2v, errs,
                             all(r.converged for r in res), angular)


@dataclass(frozen=True)
class SeriesRequest:
    params: PhysicalParams
    alpha: float
    order: int = 2

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order!r}")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")


def meff_ratio(req: SeriesRequest, spec: Optional[QuadSpec] = None,
               angular: str = "numeric") -> float:
    """Truncated m_eff/m = 1 + a1 alpha^2 (+ a2 alpha^4)."""
    if req.alpha == 0:
        return 1.0
    a2_ = req.alpha**2
    if req.order == 1:
        return 1.0 + a1(req.params, spec).value * a2_
    rep = a2(req.params, spec, angular)
    return 1.0 + rep.a1 * a2_ + rep.a2 * a2_ * a2_
