"""Constitutive models: RNP potential, PMB bond law, influence function,
calibration from engineering constants and elastic wave speeds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy import integrate

W_D_2D = math.pi  # area of the unit disk


class MaterialError(ValueError):
    pass


@numba.njit(cache=True)
def _j_linear(r):
    if r >= 1.0:
        return 0.0
    return 1.0 - r


@numba.njit(cache=True)
def _j_constant(r):
    if r >= 1.0:
        return 0.0
    return 1.0


@dataclass(frozen=True)
class InfluenceFunction:
    """Radial weight ``J`` on ``[0, 1)``, zero for ``r >= 1``.

    ``kernel`` is a numba-compiled scalar version of ``func`` used inside
    the neighbor-volume kernels.
    """

    name: str
    func: Callable[[float], float]
    kernel: Callable = field(repr=False, compare=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise MaterialError("influence function evaluated at negative r")
        out = np.vectorize(self.func, otypes=[float])(r)
        return out if out.ndim else float(out)

    @property
    def moment(self):
        return moment_MJ(self)


def influence_default(r):
    """``J(r) = 1 - r`` on ``[0, 1)`` and 0 beyond."""
    if r < 0:
        raise MaterialError("r must be non-negative")
    return 0.0 if r >= 1.0 else 1.0 - r


def _constant(r):
    return 0.0 if r >= 1.0 else 1.0


LINEAR_INFLUENCE = InfluenceFunction("linear", influence_default, _j_linear)
CONSTANT_INFLUENCE = InfluenceFunction("constant", _constant, _j_constant)
INFLUENCES = {f.name: f for f in (LINEAR_INFLUENCE, CONSTANT_INFLUENCE)}


def make_influence(name, func):
    """Wrap an arbitrary scalar ``func`` (numba-compilable) as an influence."""
    return InfluenceFunction(name, func, numba.njit(func))


def moment_MJ(J) -> float:
    """``M_J = int_0^1 J(r) r^2 dr`` by adaptive quadrature."""
    f = J.func if isinstance(J, InfluenceFunction) else J
    val, _ = integrate.quad(lambda r: f(r) * r * r, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@dataclass(frozen=True)
class RnpModel:
    """Regularized nonlinear bond potential ``psi(r) = c (1 - exp(-beta r))``.

    ``force_prefactor`` multiplies the discrete nodal force; 2 makes the
    small-strain response match the elastic constants used by the
    calibration (see ``README``).
    """

    c: float
    beta: float
    horizon: float
    rho: float
    E: float = float("nan")
    G_c: float = float("nan")
    nu: float = 0.25
    influence: InfluenceFunction = LINEAR_INFLUENCE
    w_d: float = W_D_2D
    force_prefactor: float = 2.0
    kind: str = field(default="rnp", init=False)

    def __post_init__(self):
        for name in ("c", "beta", "horizon", "rho"):
            if not getattr(self, name) > 0:
                raise MaterialError(f"{name} must be positive")
        if self.nu != 0.25:
            raise MaterialError("bond-based plane strain requires nu = 0.25")

    @property
    def r_star(self):
        return 1.0 / math.sqrt(2.0 * self.beta)

    @property
    def lame(self):
        return 2.0 * self.E / 5.0

    @property
    def force_scale(self):
        """``prefactor / (w_d eps^3)`` with ``omega = 1`` everywhere."""
        return self.force_prefactor / (self.w_d * self.horizon ** 3)

    def psi(self, r):
        return psi(self, r)

    def psi_prime(self, r):
        return psi_prime(self, r)

    def critical_strain(self, length):
        return critical_strain_rnp(self, length)


@dataclass(frozen=True)
class PmbModel:
    c_pmb: float
    S_c: float
    horizon: float
    rho: float
    influence: InfluenceFunction = LINEAR_INFLUENCE
    kind: str = field(default="pmb", init=False)

    def __post_init__(self):
        for name in ("c_pmb", "S_c", "horizon", "rho"):
            if not getattr(self, name) > 0:
                raise MaterialError(f"{name} must be positive")

    def critical_strain(self, length):
        return np.full_like(np.asarray(length, dtype=float), self.S_c)


def calibrate_rnp(E, G_c, horizon, rho, J=LINEAR_INFLUENCE, force_prefactor=2.0) -> RnpModel:
    """RNP parameters from Young's modulus and fracture energy (2-D,
    plane strain, ``nu = 1/4``)."""
    for name, v in (("E", E), ("G_c", G_c), ("horizon", horizon), ("rho", rho)):
        if not v > 0:
            raise MaterialError(f"{name} must be positive, got {v!r}")
    mj = moment_MJ(J)
    c = G_c * math.pi / (4.0 * mj)
    beta = 8.0 * E / (5.0 * c * mj)
    return RnpModel(c=c, beta=beta, horizon=horizon, rho=rho, E=E, G_c=G_c,
                    influence=J, force_prefactor=force_prefactor)


def psi(model, r):
    return model.c * (1.0 - np.exp(-model.beta * np.asarray(r, dtype=float)))


def psi_prime(model, r):
    return model.c * model.beta * np.exp(-model.beta * np.asarray(r, dtype=float))


def critical_strain_rnp(model, length):
    length = np.asarray(length, dtype=float)
    if np.any(length <= 0):
        raise MaterialError("bond length must be positive")
    out = model.r_star / np.sqrt(length)
    return out if out.ndim else float(out)


def wave_speeds(E, nu, rho):
    """Longitudinal, shear and (approximate) Rayleigh wave speeds."""
    if not (E > 0 and rho > 0 and 0 <= nu < 0.5):
        raise MaterialError("need E > 0, rho > 0 and 0 <= nu < 0.5")
    c_l = math.sqrt(E * (1 - nu) / ((1 + nu) * (1 - 2 * nu)) / rho)
    c_s = math.sqrt(E / (2 * (1 + nu)) / rho)
    c_r = c_s * (0.862 + 1.14 * nu) / (1 + nu)
    return c_l, c_s, c_r


def pmb_bond_scalar(model, S, broken, r=0.0):
    """PMB bond force magnitude ``c J(r) S mu`` with ``r = |xi|/eps``."""
    if broken:
        return 0.0
    return model.c_pmb * model.influence.func(r) * S


def material_wave_speeds(model):
    if isinstance(model, RnpModel):
        return wave_speeds(model.E, model.nu, model.rho)
    raise MaterialError("wave speeds need elastic constants (RNP model)")
