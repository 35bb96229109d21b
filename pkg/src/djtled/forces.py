"""Nodal forces written purely in terms of the Jacobian operator.

These are the readable per-element definitions; the compiled engine in
``assembly`` evaluates the same expressions over the whole mesh and is tested
against them.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .element import ElementKind
from .errors import InversionError
from .kinematics import ElementKinematics
from .materials import EnergyDerivatives, Material, energy_derivatives
from .mesh import Mesh
from .precompute import ElementConstants, hourglass_stiffness


def contract_ghat(g_hat: np.ndarray, sixpack: np.ndarray) -> np.ndarray:
    """Sum_k g_k M_k over the six-component ordering."""
    return np.tensordot(g_hat, sixpack, axes=(0, 0))


def _bracket(constants: ElementConstants, kin: ElementKinematics, d: EnergyDerivatives) -> np.ndarray:
    J, inv = kin.J, kin.inv
    Jm23 = J ** (-2.0 / 3.0)
    first = np.zeros((3, 3))
    second = np.zeros((3, 3))
    dev = 0.0
    for coeff, bar, tensor in (
        (d.d1, inv.I1bar, constants.I1m),
        (d.d4, inv.I4bar, constants.I4m),
        (d.d6, inv.I6bar, constants.I6m),
    ):
        if coeff is not None:
            first += coeff * tensor
            dev += coeff * bar
    for coeff, bar, six in (
        (d.d2, inv.I2bar, constants.I2m),
        (d.d5, inv.I5bar, constants.I5m),
        (d.d7, inv.I7bar, constants.I7m),
    ):
        if coeff is not None:
            second += coeff * contract_ghat(kin.g_hat, six)
            dev += 2.0 * coeff * bar
    K = first + Jm23 * second
    scalar = -2.0 / 3.0 * dev + J * d.dJ
    return Jm23 * kin.Jt.T @ K + scalar * constants.V0 * kin.Jt_inv


def element_force(constants: ElementConstants, kin: ElementKinematics, derivs: EnergyDerivatives,
                  shortcut: bool = True) -> np.ndarray:
    """Element nodal forces, shape (n, 3), rows in connectivity order.

    For T4 with ``shortcut`` the first row is the negated sum of the other three.
    """
    if np.array_equal(kin.Jt, constants.J0):
        # undeformed: return exact zeros rather than the rounding residue
        return np.zeros((constants.D.shape[1], 3))
    bracket = _bracket(constants, kin, derivs)
    if shortcut and constants.kind is ElementKind.T4:
        F = np.empty((4, 3))
        F[1:] = bracket.T
        F[0] = -F[1:].sum(axis=0)
        return F
    return constants.D.T @ bracket.T


def hourglass_force(gamma: np.ndarray, U_elem: np.ndarray, k_hg: float) -> np.ndarray:
    """k_hg * sum_a gamma_a (gamma_a^T u_i) for each displacement column u_i."""
    return k_hg * gamma.T @ (gamma @ U_elem)


def hourglass_energy(gamma: np.ndarray, U_elem: np.ndarray, k_hg: float) -> float:
    q = gamma @ U_elem
    return 0.5 * k_hg * float(np.sum(q * q))


def adjacency(mesh: Mesh):
    """Node -> (element, local row) pairs in ascending element order, CSR form."""
    n = mesh.kind.nodes
    flat = mesh.elements.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=mesh.n_nodes)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return offsets, order // n, order % n


def gather(offsets, elem, local, buffer: np.ndarray) -> np.ndarray:
    """Sum per-element rows into nodes, adding in fixed ascending-element order."""
    out = np.zeros((len(offsets) - 1, 3))
    for node in range(len(offsets) - 1):
        acc = np.zeros(3)
        for k in range(offsets[node], offsets[node + 1]):
            acc = acc + buffer[elem[k], local[k]]
        out[node] = acc
    return out


def assemble_internal(mesh: Mesh, constants: ElementConstants, material: Material, U_global: np.ndarray,
                      c_hg: float = 0.1, on_inversion: str = "abort", inverted: Optional[list] = None) -> np.ndarray:
    """Global internal forces (N, 3) from a serial loop over ``element_force``.

    ``constants`` is the mesh-wide table from ``precompute.mesh_constants``.
    With ``on_inversion="report"`` inverted elements are appended to
    ``inverted`` and skipped instead of raising.
    """
    U = np.asarray(U_global, dtype=float).reshape(mesh.n_nodes, 3)
    buffer = np.zeros((mesh.n_elements, mesh.kind.nodes, 3))
    k_hg = hourglass_stiffness(material.kappa, constants.V0, c_hg)
    for e, conn in enumerate(mesh.elements):
        c = constants[e]
        U_elem = U[conn]
        try:
            kin = ElementKinematics.evaluate(c, U_elem, material.needs, element=e)
        except InversionError:
            if on_inversion != "report":
                raise
            if inverted is not None:
                inverted.append(e)
            continue
        buffer[e] = element_force(c, kin, energy_derivatives(material, kin.inv))
        if c.hg is not None:
            buffer[e] += hourglass_force(c.hg, U_elem, k_hg[e])
    return gather(*adjacency(mesh), buffer)
