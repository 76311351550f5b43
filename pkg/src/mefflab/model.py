"""Physical parameters and the elementary dispersion functions.

Every integrand in the package is assembled from three functions of the
momentum magnitude:

    omega(r) = sqrt(r**2 + nu**2)
    F(r)     = r**2 / (2 m) + omega(r)
    L(r1, r2, z) = (r1**2 + r2**2 + 2 r1 r2 z) / (2 m) + omega(r1) + omega(r2)

F is the one-boson energy denominator at total momentum zero and L the
two-boson one, with z the cosine of the relative angle. All three accept
floats or numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

# |phi_hat|^2 on the cutoff shell.
FORM_FACTOR_SQ = (2.0 * math.pi) ** -3


class InvalidParameters(ValueError):
    """Raised when a parameter record violates one of its invariants."""


@dataclass(frozen=True)
class PhysicalParams:
    """Bare mass, boson mass and the two momentum cutoffs.

    The ultraviolet cutoff is stored as ``lam`` because ``lambda`` is a
    Python keyword. ``lam == kappa`` is allowed and means an empty shell.
    """

    m: float = 1.0
    nu: float = 1.0
    kappa: float = 1.0
    lam: float = 10.0

    def __post_init__(self) -> None:
        for name in ("m", "nu", "kappa", "lam"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameters(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.m <= 0:
            raise InvalidParameters(f"invariant m > 0 violated (m={self.m!r})")
        if self.nu <= 0:
            raise InvalidParameters(f"invariant nu > 0 violated (nu={self.nu!r})")
        if self.kappa <= 0:
            raise InvalidParameters(f"invariant kappa > 0 violated (kappa={self.kappa!r})")
        if self.lam < self.kappa:
            raise InvalidParameters(
                f"invariant lambda >= kappa violated (lambda={self.lam!r}, kappa={self.kappa!r})"
            )

    @property
    def empty_shell(self) -> bool:
        return self.lam == self.kappa

    def with_lambda(self, lam: float) -> "PhysicalParams":
        return replace(self, lam=lam)

    def as_dict(self) -> dict:
        return {"m": self.m, "nu": self.nu, "kappa": self.kappa, "lambda": self.lam}

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalParams":
        lam = data["lambda"] if "lambda" in data else data["lam"]
        return cls(m=data["m"], nu=data["nu"], kappa=data["kappa"], lam=lam)


def _check_radius(r: ArrayLike) -> None:
    if np.any(np.asarray(r) < 0):
        raise ValueError("radius must be non-negative")


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def omega(params: PhysicalParams, r: ArrayLike) -> ArrayLike:
    """Boson dispersion sqrt(r^2 + nu^2).

    >>> omega(PhysicalParams(nu=1.0), 3.0 ** 0.5)
    2.0
    """
    _check_radius(r)
    return _scalarize(np.sqrt(np.square(r) + params.nu * params.nu))


def bigF(params: PhysicalParams, r: ArrayLike) -> ArrayLike:
    """One-boson denominator r^2/(2m) + omega(r)."""
    return _scalarize(np.square(r) / (2.0 * params.m) + omega(params, r))


def bigL(params: PhysicalParams, r1: ArrayLike, r2: ArrayLike, z: ArrayLike) -> ArrayLike:
    """Two-boson denominator at relative-angle cosine ``z``."""
    if np.any(np.abs(np.asarray(z)) > 1.0):
        raise ValueError("z must lie in [-1, 1]")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    kin = (r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * np.asarray(z, dtype=float)) / (2.0 * params.m)
    return _scalarize(kin + omega(params, r1) + omega(params, r2))


# Unchecked variants used inside integrands, where validation per call would
# dominate the cost. Inputs there are quadrature nodes and always in range.

def _omega(nu: float, r: np.ndarray) -> np.ndarray:
    return np.sqrt(r * r + nu * nu)


def _bigF(m: float, nu: float, r: np.ndarray) -> np.ndarray:
    return r * r / (2.0 * m) + np.sqrt(r * r + nu * nu)
