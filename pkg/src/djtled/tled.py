"""Conventional TLED path: deformation gradient, second Piola-Kirchhoff stress, F = X S B0 V0.

Kept deliberately free of the Jacobian-operator shortcuts so it can serve both
as an independent oracle and as the benchmark baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .element import ElementKind, shape_derivatives
from .errors import InversionError
from .materials import I2, I4, I5, I6, I7, EnergyDerivatives, Material, energy_derivatives, fibres_of
from .precompute import gradient_operator


@dataclass(frozen=True)
class TledConstants:
    """B0 = D^T J0^-T (n x 3, or (M, n, 3) for a mesh) and reference volumes."""

    B0: np.ndarray
    V0: np.ndarray

    @classmethod
    def build(cls, coords: np.ndarray, kind: ElementKind | str) -> "TledConstants":
        D = shape_derivatives(kind)
        coords = np.asarray(coords, dtype=float)
        J0 = np.einsum("ia,...aj->...ij", D, coords)
        detJ0 = np.linalg.det(J0)
        vf = 1.0 / 6.0 if ElementKind.parse(kind) is ElementKind.T4 else 8.0
        return cls(gradient_operator(D, np.linalg.inv(J0)), detJ0 * vf)

    def __getitem__(self, e) -> "TledConstants":
        return TledConstants(self.B0[e], self.V0[e])


def deformation_gradient(U_elem: np.ndarray, B0: np.ndarray) -> np.ndarray:
    """X[i, j] = delta_ij + sum_a U[a, i] B0[a, j]."""
    return np.eye(3) + np.asarray(U_elem, dtype=float).T @ B0


@dataclass(frozen=True)
class DeformationState:
    X: np.ndarray
    C: np.ndarray
    Cinv: np.ndarray
    J: float

    @classmethod
    def of(cls, X: np.ndarray, element: int = -1) -> "DeformationState":
        J = float(np.linalg.det(X))
        if not J > 0.0:
            raise InversionError(element, detail=f"det X = {J:.6g}")
        C = X.T @ X
        return cls(X, C, np.linalg.inv(C), J)


@dataclass(frozen=True)
class StressInvariants:
    """Invariants of C computed the conventional way (traces of C, C^2)."""

    J: float
    I1: float
    I2: Optional[float] = None
    I4: Optional[float] = None
    I5: Optional[float] = None
    I6: Optional[float] = None
    I7: Optional[float] = None

    @property
    def I1bar(self):
        return self.J ** (-2.0 / 3.0) * self.I1

    @property
    def I2bar(self):
        return None if self.I2 is None else self.J ** (-4.0 / 3.0) * self.I2

    @property
    def I4bar(self):
        return None if self.I4 is None else self.J ** (-2.0 / 3.0) * self.I4

    @property
    def I5bar(self):
        return None if self.I5 is None else self.J ** (-4.0 / 3.0) * self.I5

    @property
    def I6bar(self):
        return None if self.I6 is None else self.J ** (-2.0 / 3.0) * self.I6

    @property
    def I7bar(self):
        return None if self.I7 is None else self.J ** (-4.0 / 3.0) * self.I7


def conventional_invariants(state: DeformationState, need: frozenset, a=None, b=None) -> StressInvariants:
    C = state.C
    values = {"I1": float(np.trace(C))}
    if I2 in need:
        values["I2"] = 0.5 * (values["I1"] ** 2 - float(np.trace(C @ C)))
    if I4 in need:
        values["I4"] = float(a @ C @ a)
    if I5 in need:
        values["I5"] = float(a @ C @ C @ a)
    if I6 in need:
        values["I6"] = float(b @ C @ b)
    if I7 in need:
        values["I7"] = float(b @ C @ C @ b)
    return StressInvariants(J=state.J, **values)


def stress_from_derivatives(state: DeformationState, inv: StressInvariants, d: EnergyDerivatives,
                            a=None, b=None) -> np.ndarray:
    """S = 2 dPsi/dC for an uncoupled energy with the given invariant derivatives."""
    C, J = state.C, state.J
    Jm23 = J ** (-2.0 / 3.0)
    Jm43 = Jm23 * Jm23
    eye = np.eye(3)
    S = np.zeros((3, 3))
    dev = 0.0
    if d.d1 is not None:
        S += 2.0 * Jm23 * d.d1 * eye
        dev += d.d1 * inv.I1bar
    if d.d2 is not None:
        S += 2.0 * Jm43 * d.d2 * (inv.I1 * eye - C)
        dev += 2.0 * d.d2 * inv.I2bar
    if d.d4 is not None:
        S += 2.0 * Jm23 * d.d4 * np.outer(a, a)
        dev += d.d4 * inv.I4bar
    if d.d5 is not None:
        A = np.outer(a, a)
        S += 2.0 * Jm43 * d.d5 * (A @ C + C @ A)
        dev += 2.0 * d.d5 * inv.I5bar
    if d.d6 is not None:
        S += 2.0 * Jm23 * d.d6 * np.outer(b, b)
        dev += d.d6 * inv.I6bar
    if d.d7 is not None:
        B = np.outer(b, b)
        S += 2.0 * Jm43 * d.d7 * (B @ C + C @ B)
        dev += 2.0 * d.d7 * inv.I7bar
    S += (-2.0 / 3.0 * dev + J * d.dJ) * state.Cinv
    return 0.5 * (S + S.T)


def second_pk_stress(material: Material, state: DeformationState) -> np.ndarray:
    a, b = fibres_of(material)
    inv = conventional_invariants(state, material.needs, a, b)
    return stress_from_derivatives(state, inv, energy_derivatives(material, inv), a, b)


def tled_element_force(X: np.ndarray, S: np.ndarray, B0: np.ndarray, V0: float) -> np.ndarray:
    """(X S B0^T V0)^T, i.e. the n x 3 nodal force matrix."""
    return V0 * B0 @ (X @ S).T
