"""Shared fixtures: built-in models and M/M/1 closed forms.

The Exp(2)/Exp(1) product walk is the all-purpose oracle; every transform the
package computes has an elementary closed form there, collected in `mm1_refs`.
"""

import cmath
from types import SimpleNamespace

import pytest

from walkfluct.contour import ContourSpec
from walkfluct.fluct import walk_functionals
from walkfluct.model import builtin_models

LAM, MU = 1.0, 2.0


def _xi1(z: complex, s: complex) -> complex:
    # left zero of (mu + xi)(lam + s - xi) - z*mu*lam in xi
    return ((LAM + s - MU) - cmath.sqrt((LAM + MU + s) ** 2 - 4 * z * LAM * MU)) / 2.0


def _xi2(z: complex) -> complex:
    # right zero of the same kernel at s = 0
    return ((LAM - MU) + cmath.sqrt((LAM - MU) ** 2 + 4 * LAM * MU * (1 - z))) / 2.0


def _busy(z: complex, s: complex) -> complex:
    return 1 - (1 - z * MU / (MU + s)) * (s + MU) / (s - _xi1(z, s))


def _idle(z: complex, s: complex) -> complex:
    return 1 - (s + _xi2(z)) / (s + LAM)


def _steps(z: complex) -> complex:
    return 1 - (1 - z) * MU / (-_xi1(z, 0.0))


def _transient_max(z: complex, s: complex) -> complex:
    # sum_n z^n E e^{-s M_n}
    x = _xi1(z, 0.0)
    return (MU + s) * (-x) / ((s - x) * MU) / (1 - z)


def _busy_z1(s: complex) -> complex:
    return (LAM + MU + s - cmath.sqrt((LAM + MU + s) ** 2 - 4 * LAM * MU)) / (2 * LAM)


def _stationary_max(s: complex) -> complex:
    rho = LAM / MU
    return (1 - rho) + rho * (MU - LAM) / (MU - LAM + s)


def _psi_plus(z: complex, s: complex) -> complex:
    return (s - _xi1(z, 0.0)) / (MU + s)


def _psi_minus(z: complex, s: complex) -> complex:
    return (_xi2(z) - s) / (LAM - s)


@pytest.fixture(scope="session")
def models():
    return builtin_models()


@pytest.fixture(scope="session")
def mm1(models):
    return walk_functionals(models["product_mm1"])


@pytest.fixture()
def spec():
    return ContourSpec()


@pytest.fixture(scope="session")
def mm1_refs():
    return SimpleNamespace(
        lam=LAM, mu=MU, rho=LAM / MU,
        xi1=_xi1, xi2=_xi2,
        busy=_busy, idle=_idle, steps=_steps,
        transient_max=_transient_max,
        busy_z1=_busy_z1, stationary_max=_stationary_max,
        psi_plus=_psi_plus, psi_minus=_psi_minus,
    )
