"""Fock-space bookkeeping for the perturbative ground state.

Two layers live here.

Operator strings are formal words in ``H0^-1``, ``H_I`` and ``P_f`` acting
on the vacuum, with sympy coefficients. The recurrences for the ground
state vectors phi_n and the auxiliary vectors Phi_n are run at this level,
which keeps their output readable and lets the second-order coefficient be
listed one inner product at a time.

Fock states are sums of labelled terms. A term stands for the symmetrised
function of its live momentum labels; every label is created by ``a*(g)``
with ``g = phi_hat / sqrt(omega)``, so the form factor and dispersion
weights are implicit. A term records which labels have been annihilated
again (they are integrated out), its energy denominators as label subsets,
and its free vector factors ``(sum of k)_mu``. Symmetrisation factors are
folded into exact coefficients when an operator is applied, and inner
products average over label matchings.

All combinatorics are exact. Numbers enter only in :func:`evaluate`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from .model import PhysicalParams, _bigF, _omega
from .quad import IntegralResult, QuadSpec, integrate_1d, integrate_3d

__all__ = [
    "E2", "M", "C",
    "MAX_PARTICLES",
    "ParticleOverflow",
    "UncontractedIndex",
    "OperatorSymbol",
    "FockTerm",
    "SymbolicState",
    "OperatorString",
    "ScalarExpression",
    "C2Term",
    "WickReport",
    "vacuum",
    "apply",
    "apply_interaction",
    "realize",
    "build_phi",
    "build_capital_phi",
    "vacuum_expectation",
    "c1_expression",
    "b1_expression",
    "e2_expression",
    "c2_terms",
    "c2_expression",
    "c_dependence",
    "evaluate",
    "wick_coefficients",
    "pretty",
]

E2 = sp.Symbol("E2", real=True)
M = sp.Symbol("m", positive=True)
C = sp.symbols("c0:4", real=True)

MAX_PARTICLES = 3

_P6 = (2.0 * math.pi) ** -6
_P3 = (2.0 * math.pi) ** -3


class ParticleOverflow(RuntimeError):
    """An operator would push a term past the particle-number cap."""


class UncontractedIndex(RuntimeError):
    """An inner product left more than two vector indices to contract."""


# ---------------------------------------------------------------- Fock level

@dataclass(frozen=True)
class OperatorSymbol:
    """One primitive operator.

    ``CreateG`` and ``AnnihilateG`` are ``a*(g)/sqrt(2)`` and ``a(g)/sqrt(2)``
    so that ``H_I`` is their sum. ``InvH0`` is the reduced resolvent (zero
    on the vacuum). ``MomentumComp`` is one component of the field momentum.
    ``Scalar`` multiplies by ``value``.
    """

    kind: str
    value: sp.Expr = sp.Integer(1)

    KINDS = ("CreateG", "AnnihilateG", "InvH0", "MomentumComp", "Scalar")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "value", sp.sympify(self.value))


CREATE = OperatorSymbol("CreateG")
ANNIHILATE = OperatorSymbol("AnnihilateG")
INV_H0 = OperatorSymbol("InvH0")
MOMENTUM = OperatorSymbol("MomentumComp")

Labels = Tuple[int, ...]


@dataclass(frozen=True, order=True)
class FockTerm:
    """Shape of one unsymmetrised summand; the coefficient lives in the state."""

    live: Labels = ()
    contracted: Labels = ()
    dens: Tuple[Labels, ...] = ()
    vecs: Tuple[Labels, ...] = ()

    @property
    def n(self) -> int:
        return len(self.live)

    def labels(self) -> Labels:
        return tuple(sorted(self.live + self.contracted))

    def fresh(self) -> int:
        return max(self.labels(), default=0) + 1

    def relabel(self, mp: Mapping[int, int]) -> "FockTerm":
        def s(xs):
            return tuple(sorted(mp[x] for x in xs))
        return FockTerm(s(self.live), s(self.contracted),
                        tuple(sorted(s(d) for d in self.dens)),
                        tuple(sorted(s(v) for v in self.vecs)))

    def canonical(self) -> "FockTerm":
        labs = self.labels()
        best = None
        for perm in itertools.permutations(range(1, len(labs) + 1)):
            cand = self.relabel(dict(zip(labs, perm)))
            if best is None or cand < best:
                best = cand
        return best if best is not None else self


def _clean(coeffs: Dict) -> Dict:
    out = {}
    for k in sorted(coeffs):
        c = sp.expand(coeffs[k])
        if c != 0:
            out[k] = c
    return out


@dataclass(frozen=True)
class SymbolicState:
    """Finite sum of Fock terms with exact coefficients.

    ``rank`` is the number of free vector indices shared by every term, or
    None for a mixture. ``strings`` keeps the operator-string form when the
    state was produced from one.
    """

    terms: Tuple[Tuple[FockTerm, sp.Expr], ...] = ()
    rank: Optional[int] = 0
    strings: Optional[Tuple["OperatorString", ...]] = None

    @staticmethod
    def from_dict(coeffs: Dict[FockTerm, sp.Expr], rank: Optional[int],
                  strings=None) -> "SymbolicState":
        merged: Dict[FockTerm, sp.Expr] = {}
        for t, c in coeffs.items():
            k = t.canonical()
            merged[k] = merged.get(k, 0) + c
        return SymbolicState(tuple(_clean(merged).items()), rank, strings)

    def as_dict(self) -> Dict[FockTerm, sp.Expr]:
        return dict(self.terms)

    def __add__(self, other: "SymbolicState") -> "SymbolicState":
        d = self.as_dict()
        for t, c in other.terms:
            d[t] = d.get(t, 0) + c
        rank = self.rank if self.rank == other.rank or not other.terms else (
            other.rank if not self.terms else None)
        return SymbolicState.from_dict(d, rank)

    def scaled(self, c) -> "SymbolicState":
        c = sp.sympify(c)
        return SymbolicState.from_dict({t: v * c for t, v in self.terms}, self.rank, self.strings)

    def component(self, n: int) -> "SymbolicState":
        return SymbolicState(tuple((t, c) for t, c in self.terms if t.n == n), self.rank)

    def particle_numbers(self) -> Tuple[int, ...]:
        return tuple(sorted({t.n for t, _ in self.terms}))

    def vacuum_coefficient(self) -> sp.Expr:
        return sp.expand(sum((c for t, c in self.terms if t.n == 0 and not t.contracted
                              and not t.dens), sp.Integer(0)))

    @property
    def is_zero(self) -> bool:
        return not self.terms


def vacuum() -> SymbolicState:
    return SymbolicState(((FockTerm(), sp.Integer(1)),), 0)


def apply(op: OperatorSymbol, state: SymbolicState) -> SymbolicState:
    """Apply one primitive operator term by term."""
    out: Dict[FockTerm, sp.Expr] = {}

    def add(t: FockTerm, c) -> None:
        out[t] = out.get(t, 0) + c

    rank = state.rank
    if op.kind == "Scalar":
        return state.scaled(op.value)
    if op.kind == "MomentumComp" and rank is not None:
        rank += 1
    for t, c in state.terms:
        n = t.n
        if op.kind == "CreateG":
            if n + 1 > MAX_PARTICLES:
                raise ParticleOverflow(f"creation would exceed {MAX_PARTICLES} particles")
            new = t.fresh()
            add(FockTerm(tuple(sorted(t.live + (new,))), t.contracted, t.dens, t.vecs),
                c * sp.sqrt(n + 1) / sp.sqrt(2))
        elif op.kind == "AnnihilateG":
            for j in t.live:
                live = tuple(x for x in t.live if x != j)
                add(FockTerm(live, tuple(sorted(t.contracted + (j,))), t.dens, t.vecs),
                    c / (sp.sqrt(n) * sp.sqrt(2)))
        elif n == 0:
            # H0^-1 and P_f both annihilate the vacuum sector.
            continue
        elif op.kind == "InvH0":
            add(FockTerm(t.live, t.contracted, tuple(sorted(t.dens + (t.live,))), t.vecs), c)
        else:
            add(FockTerm(t.live, t.contracted, t.dens, tuple(sorted(t.vecs + (t.live,)))), c)
    return SymbolicState.from_dict(out, rank)


def apply_interaction(state: SymbolicState) -> SymbolicState:
    """``H_I = (a*(g) + a(g)) / sqrt(2)``."""
    return apply(CREATE, state) + apply(ANNIHILATE, state)


# ---------------------------------------------------------------- operator strings

_TOKENS = {"R": "H0^-1", "H": "H_I", "P": "P_f"}


@dataclass(frozen=True)
class OperatorString:
    """``coeff * op_1 op_2 ... op_k Omega`` with ops drawn from R, H, P."""

    coeff: sp.Expr
    ops: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeff", sp.expand(sp.sympify(self.coeff)))
        bad = [o for o in self.ops if o not in _TOKENS]
        if bad:
            raise ValueError(f"unknown operator tokens {bad!r}")

    @property
    def category(self) -> int:
        """0 plain, 1 carries E2, 2 carries one of the free constants c_i."""
        syms = self.coeff.free_symbols
        if syms & set(C):
            return 2
        return 1 if E2 in syms else 0

    @property
    def rank(self) -> int:
        return self.ops.count("P")

    def word(self) -> str:
        return _word(self.ops)


def _word(ops: Sequence[str]) -> str:
    parts: List[str] = []
    i = 0
    while i < len(ops):
        k = 0
        while tuple(ops[i + 2 * k:i + 2 * k + 2]) == ("R", "H"):
            k += 1
        if k >= 2:
            parts.append(f"(H0^-1 H_I)^{k}")
            i += 2 * k
            continue
        k = 0
        while i + k < len(ops) and ops[i + k] == "R":
            k += 1
        if k >= 2:
            parts.append(f"(H0^-1)^{k}")
            i += k
            continue
        parts.append(_TOKENS[ops[i]])
        i += 1
    return " ".join(parts + ["Omega"])


def _prepend(tokens: Tuple[str, ...], strings: Iterable[OperatorString], c=1) -> List[OperatorString]:
    out = []
    for s in strings:
        ops = tokens + s.ops
        # R and P annihilate the vacuum, so a word ending in either vanishes.
        if ops and ops[-1] in ("R", "P"):
            continue
        out.append(OperatorString(s.coeff * c, ops))
    return out


def _merge(strings: Iterable[OperatorString]) -> Tuple[OperatorString, ...]:
    acc: Dict[Tuple[str, ...], sp.Expr] = {}
    for s in strings:
        acc[s.ops] = acc.get(s.ops, 0) + s.coeff
    merged = [OperatorString(c, ops) for ops, c in acc.items() if sp.expand(c) != 0]
    return tuple(sorted(merged, key=lambda s: s.category))


def realize(strings: Sequence[OperatorString]) -> SymbolicState:
    """Fock-level form of a sum of operator strings."""
    total: Dict[FockTerm, sp.Expr] = {}
    ranks = {s.rank for s in strings}
    for s in strings:
        st = vacuum().scaled(s.coeff)
        for tok in reversed(s.ops):
            if tok == "H":
                st = apply_interaction(st)
            elif tok == "R":
                st = apply(INV_H0, st)
            else:
                st = apply(MOMENTUM, st)
        for t, c in st.terms:
            total[t] = total.get(t, 0) + c
    rank = ranks.pop() if len(ranks) == 1 else (0 if not ranks else None)
    return SymbolicState.from_dict(total, rank, tuple(strings))


def _phi_strings(n: int) -> Tuple[OperatorString, ...]:
    if n == 0:
        return (OperatorString(1, ()),)
    parts = _prepend(("R", "H"), _phi_strings(n - 1), -n)
    if n >= 2:
        # E1 = E3 = 0, so only E2 feeds the recurrence below fourth order.
        parts += _prepend(("R",), _phi_strings(n - 2), sp.binomial(n, 2) * E2)
    return _merge(parts)


def _capital_strings(n: int) -> Tuple[OperatorString, ...]:
    if n == 0:
        return (OperatorString(C[0], ()),)
    parts = _prepend(("R", "P"), _phi_strings(n), 1 / M)
    parts += _prepend(("R", "H"), _capital_strings(n - 1), -n)
    if n >= 2:
        parts += _prepend(("R",), _capital_strings(n - 2), sp.binomial(n, 2) * E2)
    parts.append(OperatorString(C[n], ()))
    return _merge(parts)


def _check_order(n: int) -> None:
    if not 0 <= n <= 3:
        raise ValueError(f"order must be in 0..3, got {n!r}")


def build_phi(n: int) -> SymbolicState:
    """Ground-state Taylor vector phi_n, with E2 left symbolic.

    >>> [s.word() for s in build_phi(2).strings]
    ['(H0^-1 H_I)^2 Omega']
    """
    _check_order(n)
    return realize(_phi_strings(n))


def build_capital_phi(n: int) -> SymbolicState:
    """Auxiliary vector Phi_n for one momentum component.

    The undetermined vacuum constants enter as the symbols ``c0..c3``.
    """
    _check_order(n)
    return realize(_capital_strings(n))


# ---------------------------------------------------------------- contraction

NumKey = Tuple[Tuple[int, int], ...]
ScalarKey = Tuple[int, Tuple[Labels, ...], NumKey]


def _relabel_scalar(key: ScalarKey, mp: Mapping[int, int]) -> ScalarKey:
    n, dens, num = key
    d = tuple(sorted(tuple(sorted(mp[x] for x in s)) for s in dens))
    u = tuple(sorted(tuple(sorted((mp[i], mp[j]))) for i, j in num))
    return (n, d, u)


def _canonical_scalar(key: ScalarKey) -> ScalarKey:
    n = key[0]
    labs = tuple(range(1, n + 1))
    return min(_relabel_scalar(key, dict(zip(labs, p))) for p in itertools.permutations(labs))


@dataclass(frozen=True)
class ScalarExpression:
    """Fully contracted sum of momentum integrals.

    Each key is ``(number of labels, denominators, numerator pairs)``; a pair
    ``(i, i)`` means ``|k_i|^2`` and ``(i, j)`` means ``k_i . k_j``. Every
    label carries ``|phi_hat|^2 / omega`` and is integrated over the shell.
    ``structural_zero`` marks an inner product killed by a lone vector index.
    """

    terms: Tuple[Tuple[ScalarKey, sp.Expr], ...] = ()
    structural_zero: bool = False

    @staticmethod
    def from_dict(d: Dict[ScalarKey, sp.Expr], structural_zero: bool = False) -> "ScalarExpression":
        merged: Dict[ScalarKey, sp.Expr] = {}
        for k, c in d.items():
            ck = _canonical_scalar(k)
            merged[ck] = merged.get(ck, 0) + c
        return ScalarExpression(tuple(_clean(merged).items()), structural_zero)

    @staticmethod
    def constant(c) -> "ScalarExpression":
        return ScalarExpression.from_dict({(0, (), ()): sp.sympify(c)})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def scaled(self, c) -> "ScalarExpression":
        c = sp.sympify(c)
        return ScalarExpression.from_dict({k: v * c for k, v in self.terms}, self.structural_zero)

    def __add__(self, other: "ScalarExpression") -> "ScalarExpression":
        d = dict(self.terms)
        for k, v in other.terms:
            d[k] = d.get(k, 0) + v
        return ScalarExpression.from_dict(d, self.structural_zero and other.structural_zero)

    def free_symbols(self) -> set:
        out = set()
        for _, c in self.terms:
            out |= c.free_symbols
        return out

    def diff(self, sym: sp.Symbol) -> "ScalarExpression":
        return ScalarExpression.from_dict({k: sp.diff(c, sym) for k, c in self.terms})


def _contract(vecs: List[Labels]) -> Optional[List[NumKey]]:
    """Expand the mu-sum of the vector factors; None for a lone index."""
    if not vecs:
        return [()]
    if len(vecs) == 1:
        return None
    if len(vecs) > 2:
        raise UncontractedIndex(f"{len(vecs)} vector indices left after contraction")
    s, t = vecs
    return [(tuple(sorted((i, j))),) for i in s for j in t]


def vacuum_expectation(bra: SymbolicState, ket: SymbolicState) -> ScalarExpression:
    """``sum_mu (bra, ket)`` with the vector indices contracted pairwise.

    Coefficients are real here, so the bra is not conjugated.
    """
    if bra.rank is not None and ket.rank is not None:
        total = bra.rank + ket.rank
        if total == 1:
            return ScalarExpression(structural_zero=True)
        if total > 2:
            raise UncontractedIndex(f"{total} vector indices cannot be contracted to a scalar")
    out: Dict[ScalarKey, sp.Expr] = {}
    lone = False
    for bt, bc in bra.terms:
        for kt, kc in ket.terms:
            if bt.n != kt.n:
                continue
            base = kt.fresh()
            extra = {x: base + i for i, x in enumerate(bt.contracted)}
            weight = bc * kc / sp.factorial(kt.n)
            for perm in itertools.permutations(kt.live):
                mp = dict(extra)
                mp.update(zip(bt.live, perm))
                b = bt.relabel(mp)
                dens = list(b.dens) + list(kt.dens)
                pairs = _contract(list(b.vecs) + list(kt.vecs))
                if pairs is None:
                    lone = True
                    continue
                n = len(kt.labels()) + len(bt.contracted)
                # Labels are already dense 1..n: ket labels first, then bra extras.
                labs = sorted(set(kt.labels()) | set(extra.values()))
                dense = {x: i + 1 for i, x in enumerate(labs)}
                d = tuple(tuple(sorted(dense[x] for x in s)) for s in dens)
                for num in pairs:
                    u = tuple(tuple(sorted((dense[i], dense[j]))) for i, j in num)
                    key = (n, d, u)
                    out[key] = out.get(key, 0) + weight
    return ScalarExpression.from_dict(out, lone and not out)


# ---------------------------------------------------------------- low-order coefficients

def _inner_strings(bra: Sequence[OperatorString], ket: Sequence[OperatorString],
                   bra_prefix: Tuple[str, ...] = ("P",)) -> ScalarExpression:
    total = ScalarExpression()
    for b in bra:
        bs = realize([OperatorString(b.coeff, bra_prefix + b.ops)])
        for k in ket:
            total = total + vacuum_expectation(bs, realize([k]))
    return total


def e2_expression() -> ScalarExpression:
    """``E2 = 2 (Omega, H_I phi_1)``."""
    return vacuum_expectation(vacuum(), apply_interaction(build_phi(1))).scaled(2)


def b1_expression() -> ScalarExpression:
    """``b1 = (phi_1, phi_1)``."""
    phi1 = build_phi(1)
    return vacuum_expectation(phi1, phi1)


def c1_expression() -> ScalarExpression:
    """``c1``; the first mass coefficient is its negative."""
    a = _inner_strings(_phi_strings(1), _capital_strings(1))
    b = _inner_strings(_phi_strings(2), _capital_strings(0)).scaled(sp.Rational(1, 2))
    return (a + b).scaled(sp.Rational(-2, 3))


@dataclass(frozen=True)
class C2Term:
    """One of the inner products making up c2, prefactor included."""

    index: int
    group: str
    prefactor: sp.Expr
    bra: OperatorString
    ket: OperatorString
    inner: ScalarExpression

    @property
    def expression(self) -> ScalarExpression:
        return self.inner.scaled(self.prefactor)

    @property
    def is_zero(self) -> bool:
        return self.inner.is_zero

    def describe(self) -> str:
        return (f"({self.index}) {sp.sstr(self.prefactor)} * sum_mu "
                f"(P_f {_word(self.bra.ops)}, {_word(self.ket.ops)})")


_C2_GROUPS = (("A", 1, 3, sp.Rational(-1, 9)), ("B", 2, 2, sp.Rational(-1, 6)),
              ("C", 3, 1, sp.Rational(-1, 9)))


def c2_terms() -> List[C2Term]:
    """All 21 inner products of c2, ordered plain, then E2, then c_i terms.

    Within a class the order is group (phi_1, phi_2, phi_3 on the left), then
    left string, then right string.
    """
    raw = []
    for group, nl, nr, pref in _C2_GROUPS:
        for b in _phi_strings(nl):
            for k in _capital_strings(nr):
                cat = max(b.category, k.category)
                raw.append((cat, group, sp.expand(pref * b.coeff * k.coeff), b, k))
    raw.sort(key=lambda r: r[0])
    out = []
    for idx, (cat, group, pref, b, k) in enumerate(raw, start=1):
        bs = realize([OperatorString(1, ("P",) + b.ops)])
        inner = vacuum_expectation(bs, realize([OperatorString(1, k.ops)]))
        out.append(C2Term(idx, group, pref, OperatorString(1, b.ops), OperatorString(1, k.ops), inner))
    return out


def c2_expression(terms: Optional[Sequence[C2Term]] = None) -> ScalarExpression:
    total = ScalarExpression()
    for t in terms if terms is not None else c2_terms():
        total = total + t.expression
    return total


def c_dependence(expr: ScalarExpression) -> Tuple[sp.Symbol, ...]:
    """The free constants c_i an expression still depends on."""
    return tuple(c for c in C if any(sp.diff(v, c) != 0 for _, v in expr.terms))


# ---------------------------------------------------------------- numerics

def _numeric_terms(expr: ScalarExpression, bindings: Mapping[sp.Symbol, float]):
    grouped: Dict[int, List[Tuple[float, Tuple[Labels, ...], NumKey]]] = {}
    for (n, dens, num), c in expr.terms:
        v = sp.sympify(c).subs(bindings)
        if v.free_symbols:
            raise ValueError(f"unbound symbols {sorted(map(str, v.free_symbols))} in expression")
        grouped.setdefault(n, []).append((float(v), dens, num))
    return grouped


def evaluate(expr: ScalarExpression, params: PhysicalParams, spec: Optional[QuadSpec] = None,
             e2: Optional[float] = None) -> IntegralResult:
    """Numerical value of a contracted expression.

    ``m`` is bound from ``params``; ``e2`` must be supplied when the
    expression carries E2. Two-label terms are integrated over (z, r1, r2)
    after the polar reduction ``d3k1 d3k2 -> 8 pi^2 r1^2 r2^2 dr1 dr2 dz``.
    """
    if expr.is_zero:
        return IntegralResult.exact_zero()
    spec = spec or QuadSpec()
    bindings = {M: params.m}
    if e2 is not None:
        bindings[E2] = e2
    grouped = _numeric_terms(expr, bindings)
    if any(n > 2 for n in grouped):
        raise ValueError("evaluation supports at most two momentum labels")
    m, nu, lo, hi = params.m, params.nu, params.kappa, params.lam
    parts: List[Tuple[float, IntegralResult]] = []
    if 0 in grouped:
        parts.append((math.fsum(c for c, _, _ in grouped[0]), IntegralResult(1.0, 0.0, 0, True)))
    if params.empty_shell:
        return IntegralResult.combine(parts) if parts else IntegralResult.exact_zero()
    if 1 in grouped:
        terms1 = grouped[1]

        def f1(r):
            F = _bigF(m, nu, r)
            acc = np.zeros_like(r)
            for c, dens, num in terms1:
                acc = acc + c * r ** (2 * len(num)) / F ** len(dens)
            return 4.0 * math.pi * _P3 * r * r / _omega(nu, r) * acc

        parts.append((1.0, integrate_1d(f1, lo, hi, spec)))
    if 2 in grouped:
        terms2 = grouped[2]

        def f2(z, r1, r2):
            w1, w2 = _omega(nu, r1), _omega(nu, r2)
            den = {(1,): r1 * r1 / (2 * m) + w1, (2,): r2 * r2 / (2 * m) + w2,
                   (1, 2): (r1 * r1 + r2 * r2 + 2 * r1 * r2 * z) / (2 * m) + w1 + w2}
            numv = {(1, 1): r1 * r1, (2, 2): r2 * r2, (1, 2): r1 * r2 * z}
            acc = np.zeros(np.broadcast(z, r1, r2).shape)
            for c, dens, num in terms2:
                t = c
                for d in dens:
                    t = t / den[d]
                for p in num:
                    t = t * numv[p]
                acc = acc + t
            return 8.0 * math.pi**2 * _P6 * (r1 * r2) ** 2 / (w1 * w2) * acc

        parts.append((1.0, integrate_3d(f2, ((-1.0, 1.0), (lo, hi), (lo, hi)), spec)))
    return IntegralResult.combine(parts)


@dataclass(frozen=True)
class WickReport:
    params: PhysicalParams
    e2: float
    a1: float
    b1: float
    c2: float
    a2: float
    error_estimates: Dict[str, float] = field(default_factory=dict)
    converged: bool = True


def wick_coefficients(params: PhysicalParams, spec: Optional[QuadSpec] = None) -> WickReport:
    """E2, a1, b1, c2 and ``a2 = -c2 - b1 a1 + a1^2`` from the recurrences alone."""
    spec = spec or QuadSpec()
    e2r = evaluate(e2_expression(), params, spec)
    a1r = evaluate(c1_expression().scaled(-1), params, spec)
    b1r = evaluate(b1_expression(), params, spec)
    c2e = c2_expression()
    if c_dependence(c2e):
        raise ValueError("c2 still depends on the free constants")
    c2r = evaluate(c2e, params, spec, e2=e2r.value)
    dc2 = evaluate(c2e.diff(E2), params, spec)
    a1v, b1v = a1r.value, b1r.value
    a2v = math.fsum([-c2r.value, -b1v * a1v, a1v * a1v])
    c2err = c2r.error_estimate + abs(dc2.value) * e2r.error_estimate
    a2err = c2err + abs(a1v) * b1r.error_estimate + abs(2 * a1v - b1v) * a1r.error_estimate
    errs = {"e2": e2r.error_estimate, "a1": a1r.error_estimate, "b1": b1r.error_estimate,
            "c2": c2err, "a2": a2err}
    conv = all(r.converged for r in (e2r, a1r, b1r, c2r, dc2))
    return WickReport(params, e2r.value, a1v, b1v, c2r.value, a2v, errs, conv)


# ---------------------------------------------------------------- printing

def _den_name(s: Labels) -> str:
    return "E" + "".join(str(x) for x in s)


def _scalar_term(key: ScalarKey, c: sp.Expr) -> str:
    n, dens, num = key
    nums = [f"|k{i}|^2" if i == j else f"(k{i}.k{j})" for i, j in num]
    counts: Dict[Labels, int] = {}
    for d in dens:
        counts[d] = counts.get(d, 0) + 1
    ds = [_den_name(d) + (f"^{p}" if p > 1 else "") for d, p in sorted(counts.items())]
    body = " ".join(nums) if nums else "1"
    if ds:
        body += " / (" + " ".join(ds) + ")"
    measure = " ".join(f"dk{i}" for i in range(1, n + 1))
    return f"{sp.sstr(c)} * int[{measure}] {body}" if n else sp.sstr(c)


def _fock_term(t: FockTerm, c: sp.Expr) -> str:
    argl = ",".join(f"k{i}" for i in t.live) or "-"
    parts = [f"{sp.sstr(c)} * psi({argl})"]
    if t.contracted:
        parts.append("int[" + " ".join(f"dk{i}" for i in t.contracted) + "]")
    for d in t.dens:
        parts.append("/" + _den_name(d))
    for v in t.vecs:
        parts.append("(" + "+".join(f"k{i}" for i in v) + ")_mu")
    return " ".join(parts)


def pretty(obj) -> str:
    """Canonical text form of a state, string, expression or c2 term."""
    if isinstance(obj, OperatorString):
        return f"{sp.sstr(obj.coeff)} * {obj.word()}"
    if isinstance(obj, SymbolicState):
        if obj.strings is not None:
            lines = [pretty(s) for s in obj.strings]
        else:
            lines = [_fock_term(t, c) for t, c in obj.terms]
        return "\n".join(lines) if lines else "0"
    if isinstance(obj, ScalarExpression):
        if obj.is_zero:
            return "0 (lone vector index)" if obj.structural_zero else "0"
        return "\n".join(_scalar_term(k, c) for k, c in obj.terms)
    if isinstance(obj, C2Term):
        head = obj.describe()
        if obj.is_zero:
            return head + " = 0"
        body = "\n".join("    " + _scalar_term(k, c) for k, c in obj.inner.terms)
        return head + " =\n" + body
    raise TypeError(f"cannot pretty-print {type(obj).__name__}")
