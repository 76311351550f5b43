import math

import numpy as np
import pytest

from mefflab.model import (FORM_FACTOR_SQ, InvalidParameters, PhysicalParams, bigF, bigL,
                           omega)


def test_defaults_are_valid():
    p = PhysicalParams()
    assert (p.m, p.nu, p.kappa, p.lam) == (1.0, 1.0, 1.0, 10.0)
    assert not p.empty_shell


@pytest.mark.parametrize("field,value,needle", [
    ("m", 0.0, "m > 0"),
    ("m", -1.0, "m > 0"),
    ("nu", 0.0, "nu > 0"),
    ("kappa", 0.0, "kappa > 0"),
    ("lam", 0.5, "lambda >= kappa"),
])
def test_invariants_name_the_violation(field, value, needle):
    kw = {field: value}
    with pytest.raises(InvalidParameters, match=needle):
        PhysicalParams(**kw)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), "1", True])
def test_non_numeric_or_non_finite_rejected(bad):
    with pytest.raises(InvalidParameters):
        PhysicalParams(m=bad)


def test_empty_shell_allowed():
    assert PhysicalParams(kappa=2.0, lam=2.0).empty_shell


def test_dict_round_trip():
    p = PhysicalParams(m=2.0, nu=0.5, kappa=0.25, lam=123.0)
    assert PhysicalParams.from_dict(p.as_dict()) == p
    assert p.as_dict()["lambda"] == 123.0


def test_form_factor_normalisation():
    assert FORM_FACTOR_SQ == pytest.approx((2 * math.pi) ** -3, rel=1e-15)


def test_omega_and_F_values():
    p = PhysicalParams(m=2.0, nu=1.0)
    assert omega(p, math.sqrt(3.0)) == pytest.approx(2.0)
    assert bigF(p, 2.0) == pytest.approx(4.0 / 4.0 + math.sqrt(5.0))
    assert isinstance(omega(p, 1.0), float)


def test_L_reduces_to_F_sum_structure():
    p = PhysicalParams(m=1.5, nu=0.7)
    r1, r2 = 1.3, 2.1
    # z = -1 with r1 = r2 leaves only the two boson energies.
    assert bigL(p, r1, r1, -1.0) == pytest.approx(2 * omega(p, r1))
    expect = (r1 + r2) ** 2 / (2 * p.m) + omega(p, r1) + omega(p, r2)
    assert bigL(p, r1, r2, 1.0) == pytest.approx(expect)


def test_broadcasting():
    p = PhysicalParams()
    r = np.linspace(1, 5, 7)
    out = bigL(p, r[:, None], r[None, :], 0.3)
    assert out.shape == (7, 7)
    assert np.allclose(out, out.T)


def test_domain_errors():
    p = PhysicalParams()
    with pytest.raises(ValueError):
        omega(p, -1.0)
    with pytest.raises(ValueError):
        bigL(p, 1.0, 1.0, 1.5)
