"""Perturbative effective mass of the Nelson model.

Numerical and symbolic tools for the coefficients of
m_eff/m = 1 + a1 alpha^2 + a2 alpha^4 + ... as functions of the
ultraviolet cutoff.
"""

from .model import PhysicalParams, InvalidParameters, omega, bigF, bigL
from .quad import (
    QuadSpec,
    IntegralResult,
    NonConvergence,
    NonFiniteEvaluation,
    integrate_1d,
    integrate_2d,
    integrate_3d,
)

__version__ = "0.1.0"
