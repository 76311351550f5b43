import numpy as np
import pytest
import sympy as sp

from mefflab import coefficients as co
from mefflab import wick as w
from mefflab.model import PhysicalParams
from mefflab.quad import QuadSpec

P0 = PhysicalParams()


@pytest.fixture(scope="module")
def terms():
    return w.c2_terms()


def test_vacuum_norm():
    e = w.vacuum_expectation(w.vacuum(), w.vacuum())
    assert e.terms == (((0, (), ()), 1),)
    assert w.evaluate(e, P0).value == 1.0


def test_resolvent_and_momentum_kill_vacuum():
    assert w.apply(w.INV_H0, w.vacuum()).is_zero
    assert w.apply(w.MOMENTUM, w.vacuum()).is_zero


def test_creation_weight():
    st = w.apply(w.CREATE, w.vacuum())
    ((t, c),) = st.terms
    assert t == w.FockTerm(live=(1,))
    assert c == 1 / sp.sqrt(2)


def test_phi1_one_particle_weight():
    ((t, c),) = w.build_phi(1).terms
    assert t == w.FockTerm(live=(1,), dens=((1,),))
    assert sp.simplify(c + 1 / sp.sqrt(2)) == 0


def test_particle_overflow():
    st = w.vacuum()
    for _ in range(3):
        st = w.apply(w.CREATE, st)
    with pytest.raises(w.ParticleOverflow):
        w.apply(w.CREATE, st)


def test_unknown_operator_kind():
    with pytest.raises(ValueError):
        w.OperatorSymbol("Dagger")
    with pytest.raises(ValueError):
        w.build_phi(4)


def test_phi_closed_forms():
    assert w.pretty(w.build_phi(0)) == "1 * Omega"
    assert w.pretty(w.build_phi(1)) == "-1 * H0^-1 H_I Omega"
    assert w.pretty(w.build_phi(2)) == "2 * (H0^-1 H_I)^2 Omega"
    assert w.pretty(w.build_phi(3)) == "-6 * (H0^-1 H_I)^3 Omega\n-3*E2 * (H0^-1)^2 H_I Omega"


def test_capital_phi_closed_forms():
    assert w.pretty(w.build_capital_phi(0)) == "c0 * Omega"
    assert w.pretty(w.build_capital_phi(1)).splitlines() == [
        "-1/m * H0^-1 P_f H0^-1 H_I Omega", "-c0 * H0^-1 H_I Omega", "c1 * Omega"]
    assert len(w.build_capital_phi(2).strings) == 5
    assert len(w.build_capital_phi(3).strings) == 10


@pytest.mark.parametrize("n", range(4))
def test_orthogonality_and_parity(n):
    phi = w.build_phi(n)
    assert phi.vacuum_coefficient() == (1 if n == 0 else 0)
    if n:
        expect = {1: (1,), 2: (2,), 3: (1, 3)}[n]
        assert phi.particle_numbers() == expect


@pytest.mark.parametrize("n", range(4))
def test_capital_phi_vacuum_component_is_cn(n):
    assert w.build_capital_phi(n).vacuum_coefficient() == w.C[n]


def test_support_labels_are_consistent():
    for n in range(4):
        for t, _ in w.build_capital_phi(n).terms:
            labs = set(t.labels())
            assert all(set(d) <= labs for d in t.dens + t.vecs)


def test_uncontracted_index():
    one = w.apply(w.MOMENTUM, w.build_phi(1))
    three = w.apply(w.MOMENTUM, w.apply(w.MOMENTUM, one))
    with pytest.raises(w.UncontractedIndex):
        w.vacuum_expectation(one, three)


def test_lone_index_is_structural_zero():
    e = w.vacuum_expectation(w.apply(w.MOMENTUM, w.build_phi(1)), w.build_phi(1))
    assert e.is_zero and e.structural_zero


def test_c2_has_21_terms_nine_nonzero(terms):
    assert len(terms) == 21
    assert [t.index for t in terms if not t.is_zero] == list(range(1, 10))
    assert all(t.inner.structural_zero for t in terms[9:])


def test_c2_prefactors(terms):
    m, e2, c = w.M, w.E2, w.C
    expect = [-sp.Rational(2, 3) / m] * 6 + [-e2 / (3 * m)] * 3 + [
        -2 * c[0] / 3, 2 * c[1] / 3, -c[2] / 3, -c[0] * e2 / 3, c[3] / 9,
        -2 * c[0] / 3, 2 * c[1] / 3, -c[2] / 3,
        -2 * c[0] / 3, 2 * c[1] / 3, -c[0] * e2 / 3, c[1] * e2 / 3]
    assert [sp.simplify(t.prefactor - e) for t, e in zip(terms, expect)] == [0] * 21


def test_term_one_matches_display(terms):
    # (1/8) int (|k1|^2/E1^3 + |k2|^2/E2^3)(1/E1 + 1/E2) / E12
    d = {}
    for i, j in ((1, 1), (2, 2)):
        for k in (1, 2):
            key = (2, tuple(sorted(((i,),) * 3 + ((k,), (1, 2)))), ((i, i),))
            d[key] = d.get(key, 0) + sp.Rational(1, 8)
    assert terms[0].inner == w.ScalarExpression.from_dict(d)


def test_terms_seven_to_nine_are_equal(terms):
    assert terms[6].inner == terms[7].inner == terms[8].inner
    assert terms[6].inner.terms == (((1, ((1,),) * 4, ((1, 1),)), sp.Rational(1, 2)),)


def test_self_adjoint_pairs(terms):
    # (1) and (6), (2) and (5) are related by moving operators across.
    assert terms[0].inner == terms[5].inner
    assert terms[1].inner == terms[4].inner


def test_free_constants_cancel(terms):
    assert sum(bool(t.prefactor.free_symbols & set(w.C)) for t in terms) == 12
    assert w.c_dependence(w.c2_expression(terms)) == ()
    assert w.c_dependence(w.c1_expression()) == ()


def test_low_order_expressions():
    assert w.pretty(w.c1_expression()) == "-1/(3*m) * int[dk1] |k1|^2 / (E1^3)"
    assert w.pretty(w.b1_expression()) == "1/2 * int[dk1] 1 / (E1^2)"
    assert w.pretty(w.e2_expression()) == "-1 * int[dk1] 1 / (E1)"


def test_evaluate_zero_is_exact(terms):
    r = w.evaluate(terms[12].expression, P0)
    assert (r.value, r.error_estimate, r.converged) == (0.0, 0.0, True)


def test_evaluate_requires_bindings(terms):
    with pytest.raises(ValueError, match="unbound"):
        w.evaluate(terms[6].expression, P0)


def test_term_values_against_coefficients(terms):
    i = [co.iterm(j, P0).value for j in range(1, 11)]
    expect = {1: i[0] / 2, 2: i[3] / 2 + i[2], 3: i[1] + i[4], 4: i[5] + i[6],
              5: i[3] / 2 + i[2], 6: i[0] / 2, 7: i[8], 8: i[8], 9: i[8]}
    for t in terms[:9]:
        assert w.evaluate(t.inner, P0).value == pytest.approx(expect[t.index], rel=1e-9)


def test_low_order_values_against_coefficients():
    rep = w.wick_coefficients(P0)
    assert rep.e2 == pytest.approx(co.e2(P0).value, rel=1e-12)
    assert rep.a1 == pytest.approx(co.a1(P0).value, rel=1e-12)
    assert rep.b1 == pytest.approx(co.b1(P0).value, rel=1e-12)


def test_empty_shell():
    rep = w.wick_coefficients(PhysicalParams(kappa=3.0, lam=3.0))
    assert (rep.a1, rep.b1, rep.c2, rep.a2) == (0.0, 0.0, 0.0, 0.0)


def test_independence_oracle_random_points():
    rng = np.random.default_rng(20261014)
    for _ in range(3):
        m, nu, kappa = rng.uniform(0.5, 2.0, 3)
        lam = kappa * rng.uniform(5.0, 40.0)
        p = PhysicalParams(float(m), float(nu), float(kappa), float(lam))
        lib = co.a2(p)
        wk = w.wick_coefficients(p)
        assert abs(lib.a2 - wk.a2) <= lib.error_estimates["a2"] + wk.error_estimates["a2"]


def test_pretty_is_deterministic(terms):
    a = "\n".join(w.pretty(t) for t in terms)
    b = "\n".join(w.pretty(t) for t in w.c2_terms())
    assert a == b
    assert w.pretty(terms[0]).splitlines() == [
        "(1) -2/(3*m) * sum_mu (P_f H0^-1 H_I Omega, H0^-1 P_f (H0^-1 H_I)^3 Omega) =",
        "    1/4 * int[dk1 dk2] |k1|^2 / (E1^4 E12)",
        "    1/4 * int[dk1 dk2] |k1|^2 / (E1^3 E12 E2)",
    ]
    assert w.pretty(terms[20]).endswith("= 0")


def test_fock_level_printer():
    text = w.pretty(w.SymbolicState(w.build_phi(2).terms, 0))
    # 2 * (1/sqrt2)(sqrt2/sqrt2): one 1/sqrt2 per creation, sqrt2 from symmetrising.
    assert text == "sqrt(2) * psi(k1,k2) /E1 /E12"
