import math

import numpy as np
import pytest

from mefflab import coefficients as co
from mefflab.model import PhysicalParams
from mefflab.quad import QuadSpec, integrate_1d, integrate_2d

P0 = PhysicalParams()

# Frozen at m = nu = kappa = 1, Lambda = 10 with the default QuadSpec.
FROZEN_I = (
    2.08649216119122e-4, 7.455295725364714e-5, -1.7184782850685983e-5, 7.13892240268509e-5,
    -4.611188404446544e-6, 5.610840605505691e-5, -2.245397559663534e-5, -9.787327539779815e-6,
    1.5243702671414803e-3, 7.79447962094775e-3,
)
FROZEN_A1 = 5.1889562235453955e-3
FROZEN_E2 = -0.12778713215366597
FROZEN_A2 = 2.4528530874610537e-05


@pytest.mark.parametrize("j", range(1, 11))
def test_frozen_iterms(j):
    assert co.iterm(j, P0).value == pytest.approx(FROZEN_I[j - 1], rel=1e-10)


def test_frozen_scalars():
    assert co.a1(P0).value == pytest.approx(FROZEN_A1, rel=1e-10)
    assert co.e2(P0).value == pytest.approx(FROZEN_E2, rel=1e-10)
    assert co.a2(P0).a2 == pytest.approx(FROZEN_A2, rel=1e-9)


@pytest.mark.parametrize("j", range(1, 9))
def test_closed_and_numeric_angular_paths_agree(j):
    for lam in (10.0, 300.0):
        p = P0.with_lambda(lam)
        a = co.iterm(j, p, angular="numeric")
        b = co.iterm(j, p, angular="closed")
        assert a.value == pytest.approx(b.value, rel=1e-9, abs=a.error_estimate + b.error_estimate)


def test_signs():
    rep = co.a2(P0.with_lambda(1e4), angular="closed")
    for j in (1, 2, 4, 6, 9, 10):
        assert rep.iterm(j) > 0
    for j in (3, 5, 7, 8):
        assert rep.iterm(j) < 0
    assert rep.a1 > 0 and rep.e2 < 0


def test_empty_shell_is_all_zero():
    p = PhysicalParams(kappa=2.0, lam=2.0)
    rep = co.a2(p)
    assert all(v == 0.0 for v in rep.values().values())
    assert co.iterm(3, p).value == 0.0


def test_bad_index():
    with pytest.raises(ValueError):
        co.iterm(0, P0)
    with pytest.raises(ValueError):
        co.iterm(11, P0)
    with pytest.raises(ValueError):
        co.iterm(1, P0, angular="bogus")


def test_assembly_identity_is_exact():
    rep = co.a2(P0.with_lambda(50.0), angular="closed")
    assert rep.a2 == co.assemble_a2(rep.params.m, rep.i, rep.e2, rep.a1)
    w = co.A2_WEIGHTS
    manual = math.fsum([2 / 3 * math.fsum(wj * v for wj, v in zip(w, rep.i)),
                        rep.e2 * rep.i[8], -rep.a1 * rep.i[9], rep.a1**2])
    assert rep.a2 == pytest.approx(manual, rel=1e-14)


@pytest.mark.parametrize("lam", [10.0, 1e3, 1e6])
def test_b1_equals_i10_via_independent_paths(lam):
    p = P0.with_lambda(lam)
    b, i10 = co.b1(p), co.iterm(10, p)
    assert abs(b.value - i10.value) <= b.error_estimate + i10.error_estimate


def test_a1_against_finite_difference_of_second_order_energy():
    # Second-order energy at total momentum p along z:
    #   e(p) = -(1/2) int |phi|^2 / omega / (k^2/2m - p k z / m + omega) dk.
    # m_eff/m = 1 + a1 alpha^2 + ... with a1 = -m e''(0).
    p = PhysicalParams(m=1.3, nu=0.8, kappa=0.5, lam=40.0)
    m, nu = p.m, p.nu
    spec = QuadSpec(rel_tol=1e-12, abs_tol=0.0)

    def energy(h):
        def f(r, z):
            w = np.sqrt(r * r + nu * nu)
            return r * r / w / (r * r / (2 * m) - h * r * z / m + w)
        val = integrate_2d(f, ((p.kappa, p.lam), (-1.0, 1.0)), spec).value
        return -0.5 * 2 * math.pi * (2 * math.pi) ** -3 * val

    h = 1e-2
    d2 = (energy(h) - 2 * energy(0.0) + energy(-h)) / (h * h)
    a1_fd = -m * d2
    assert a1_fd == pytest.approx(co.a1(p).value, rel=1e-4)


def test_e2_against_direct_integral():
    p = PhysicalParams(m=2.0, nu=0.5, kappa=1.0, lam=100.0)
    f = lambda r: r * r / (np.sqrt(r * r + 0.25) * (r * r / 4 + np.sqrt(r * r + 0.25)))
    direct = -integrate_1d(f, 1.0, 100.0).value / (2 * math.pi**2)
    assert co.e2(p).value == pytest.approx(direct, rel=1e-12)


# The odd-moment references cancel down to the roundoff floor near t = 1.
@pytest.mark.filterwarnings("ignore::mefflab.quad.NonConvergence")
@pytest.mark.parametrize("p_", [0, 1])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("r1,r2", [(1.0, 1.0), (1.0, 30.0), (5.0, 7.0), (2.0, 4000.0)])
def test_angular_moments_match_quadrature(p_, n, r1, r2):
    m, nu = 1.0, 1.0
    w1, w2 = math.hypot(r1, nu), math.hypot(r2, nu)
    A = (r1 * r1 + r2 * r2) / (2 * m) + w1 + w2
    B = r1 * r2 / m
    D = (r1 - r2) ** 2 / (2 * m) + w1 + w2
    got = float(co.angular_moment(p_, n, np.array([A]), np.array([B]), np.array([D]))[0])
    ref = integrate_1d(lambda z: z**p_ / (A + B * z) ** n, -1.0, 1.0,
                       QuadSpec(rel_tol=1e-13, abs_tol=0.0, panel_strategy="uniform")).value
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-15 * abs(ref) + 1e-300)


def test_series_request_validation():
    with pytest.raises(ValueError):
        co.SeriesRequest(P0, 0.1, order=3)
    with pytest.raises(ValueError):
        co.SeriesRequest(P0, float("nan"))


def test_meff_ratio():
    assert co.meff_ratio(co.SeriesRequest(P0, 0.0)) == 1.0
    r1 = co.meff_ratio(co.SeriesRequest(P0, 0.2, order=1))
    assert r1 == pytest.approx(1 + FROZEN_A1 * 0.04, rel=1e-12)
    r2 = co.meff_ratio(co.SeriesRequest(P0, 0.2, order=2))
    assert r2 == pytest.approx(r1 + FROZEN_A2 * 0.2**4, rel=1e-12)


def test_parallel_evaluation_is_bitwise_identical(monkeypatch):
    p = P0.with_lambda(77.0)
    serial = co.a2(p, angular="closed")
    monkeypatch.setenv("MEFFLAB_THREADS", "4")
    parallel = co.a2(p, angular="closed")
    assert serial == parallel


def test_bad_thread_setting(monkeypatch):
    monkeypatch.setenv("MEFFLAB_THREADS", "zero")
    with pytest.raises(ValueError):
        co.a2(P0)
