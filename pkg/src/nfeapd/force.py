"""Nodal peridynamic force density and damage fields."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .material import PmbModel, RnpModel


class ForceError(ValueError):
    pass


def bond_strain(U_i, U_j, x_i, x_j):
    """Linearized bond strain ``((U_j - U_i)/|xi|) . xi/|xi|``."""
    xi = np.asarray(x_j, dtype=float) - np.asarray(x_i, dtype=float)
    L = float(np.hypot(*xi))
    if L == 0.0:
        raise ForceError("zero-length bond")
    du = np.asarray(U_j, dtype=float) - np.asarray(U_i, dtype=float)
    return float(du @ (xi / L) / L)


def _check(table, U):
    U = np.ascontiguousarray(U, dtype=float)
    if U.shape != (table.n_nodes, 2):
        raise ForceError(f"displacement shape {U.shape} does not match {table.n_nodes} nodes")
    return U


def compute_force_rnp(mesh, table, model: RnpModel, U, out=None):
    """Force density at every node from the RNP bond law.

    Each intact bond contributes
    ``scale * psi'(L S^2) * S * V_ij`` along the reference bond direction,
    where ``scale = prefactor / (pi eps^3)``.
    """
    if mesh is not None and mesh.n_nodes != table.n_nodes:
        raise ForceError("bond table was built for a different mesh")
    U = _check(table, U)
    if out is None:
        out = np.empty_like(U)
    return _kernels.rnp_force(table.row, table.nbr, table.volume, table.length, table.direction,
                              table.broken, U, model.force_scale, model.c, model.beta, out)


def compute_force_pmb(mesh, table, model: PmbModel, U, out=None):
    """PMB force density; bonds reaching the critical strain are broken
    first (irreversibly, ``table.broken`` is updated in place)."""
    if mesh is not None and mesh.n_nodes != table.n_nodes:
        raise ForceError("bond table was built for a different mesh")
    U = _check(table, U)
    _kernels.pmb_break(table.row, table.nbr, table.length, table.direction, table.broken, U, model.S_c)
    if out is None:
        out = np.empty_like(U)
    return _kernels.pmb_force(table.row, table.nbr, table.volume, table.length, table.direction,
                              table.broken, U, model.c_pmb, out)


def compute_force(mesh, table, model, U, out=None):
    if isinstance(model, RnpModel):
        return compute_force_rnp(mesh, table, model, U, out)
    if isinstance(model, PmbModel):
        return compute_force_pmb(mesh, table, model, U, out)
    raise TypeError(f"unknown material model {type(model).__name__}")


def _damage(table, model, U):
    U = _check(table, U)
    z = np.empty(table.n_nodes)
    phi = np.empty(table.n_nodes)
    if isinstance(model, RnpModel):
        r_star, s_const = model.r_star, 0.0
    else:
        r_star, s_const = 0.0, model.S_c
    _kernels.damage_fields(table.row, table.nbr, table.volume, table.length, table.direction,
                           table.broken, U, r_star, s_const, z, phi)
    return z, phi


def damage_Z(table, model, U):
    """Per node, the largest ``|S| / S_c`` over intact bonds."""
    return _damage(table, model, U)[0]


def damage_phi(table, model, U):
    """Per node, the volume fraction of bonds that are broken or critically
    stretched (0 intact, 1 fully damaged)."""
    return _damage(table, model, U)[1]


def damage_fields(table, model, U):
    return _damage(table, model, U)
