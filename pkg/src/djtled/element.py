"""Isoparametric T4/H8 kernels: natural derivatives, reference Jacobian, volume.

Convention used throughout the package: ``D`` is the 3 x n matrix of natural
derivatives (``D[i, a] = dh_a/dxi_i``) and ``J = D @ X`` for nodal coordinates
``X`` of shape (n, 3), so ``J[i, j] = dx_j/dxi_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import MeshError


class ElementKind(str, Enum):
    T4 = "T4"
    H8 = "H8"

    @property
    def nodes(self) -> int:
        return 4 if self is ElementKind.T4 else 8

    @property
    def vtk_cell_type(self) -> int:
        return 10 if self is ElementKind.T4 else 12

    @classmethod
    def parse(cls, value: "str | ElementKind") -> "ElementKind":
        if isinstance(value, ElementKind):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown element kind {value!r} (expected T4 or H8)") from None


# Corner positions of the H8 nodes in natural coordinates.
H8_NATURAL = np.array(
    [
        [-1, -1, -1],
        [+1, -1, -1],
        [+1, +1, -1],
        [-1, +1, -1],
        [-1, -1, +1],
        [+1, -1, +1],
        [+1, +1, +1],
        [-1, +1, +1],
    ],
    dtype=float,
)

_T4_D = np.array(
    [
        [-1.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0, 1.0],
    ]
)
_H8_D = H8_NATURAL.T / 8.0


def shape_derivatives(kind: ElementKind | str) -> np.ndarray:
    """Natural derivatives at the single integration point, shape (3, n).

    T4 uses volume coordinates h = (1-xi-eta-zeta, xi, eta, zeta); H8 uses the
    trilinear functions evaluated at the element centre.
    """
    kind = ElementKind.parse(kind)
    D = _T4_D if kind is ElementKind.T4 else _H8_D
    return D.copy()


@dataclass(frozen=True)
class Jacobian:
    J: np.ndarray
    det: float
    inv: np.ndarray


def jacobian0(coords: np.ndarray, D: np.ndarray) -> Jacobian:
    """Reference Jacobian of one element from its (n, 3) node coordinates."""
    coords = np.asarray(coords, dtype=float)
    J = D @ coords
    det = float(np.linalg.det(J))
    if not det > 0.0:
        raise MeshError(f"non-positive Jacobian determinant {det:.6g}")
    return Jacobian(J, det, np.linalg.inv(J))


def volume0(jac: Jacobian, kind: ElementKind | str) -> float:
    kind = ElementKind.parse(kind)
    if not jac.det > 0.0:
        raise MeshError(f"non-positive element volume (det J = {jac.det:.6g})")
    # 1-point weights: 1/6 for the unit tetrahedron, 8 for the [-1, 1]^3 cube
    return jac.det / 6.0 if kind is ElementKind.T4 else 8.0 * jac.det


def batch_jacobians(nodes: np.ndarray, elements: np.ndarray, kind: ElementKind | str):
    """Vectorised reference Jacobians for a whole mesh.

    Returns ``(J0, detJ0)`` with shapes (M, 3, 3) and (M,). No sign check.
    """
    D = shape_derivatives(kind)
    X = nodes[elements]
    J0 = np.einsum("ia,eaj->eij", D, X)
    return J0, np.linalg.det(J0)


def volume_factor(kind: ElementKind | str) -> float:
    return 1.0 / 6.0 if ElementKind.parse(kind) is ElementKind.T4 else 8.0
