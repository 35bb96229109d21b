"""Run-time element state: current Jacobian, volume ratio, the g-hat vector, invariants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InversionError
from .materials import I1, I2, I4, I5, I6, I7
from .precompute import PAIRS, ElementConstants

_ROWS = np.array([k for k, _ in PAIRS])
_COLS = np.array([l for _, l in PAIRS])


def update_jacobian(J0: np.ndarray, U_elem: np.ndarray, D: np.ndarray, element: int = -1):
    """Jt = J0 + D @ U_elem together with its inverse; raises on det <= 0."""
    U_elem = np.asarray(U_elem, dtype=float)
    if U_elem.shape != (D.shape[1], 3):
        raise ValueError(f"expected {D.shape[1]} x 3 nodal displacements, got {U_elem.shape}")
    Jt = J0 + D @ U_elem
    det = np.linalg.det(Jt)
    if not det > 0.0:
        raise InversionError(element, detail=f"det Jt = {det:.6g}")
    return Jt, np.linalg.inv(Jt)


def volume_ratio(Jt: np.ndarray, det_J0) -> float:
    return np.linalg.det(Jt) / det_J0


def g_vector(Jt: np.ndarray) -> np.ndarray:
    """(g11, g22, g33, g12, g13, g23) of Jt Jt^T; broadcasts over leading axes."""
    g = Jt @ np.swapaxes(Jt, -1, -2)
    return g[..., _ROWS, _COLS]


@dataclass(frozen=True)
class Invariants:
    """Classical and modified invariants of C; entries not requested are ``None``."""

    J: float
    I1: float
    I3: float
    I2: Optional[float] = None
    I4: Optional[float] = None
    I5: Optional[float] = None
    I6: Optional[float] = None
    I7: Optional[float] = None

    def _bar(self, value, power):
        return None if value is None else self.J ** power * value

    @property
    def I1bar(self):
        return self._bar(self.I1, -2.0 / 3.0)

    @property
    def I2bar(self):
        return self._bar(self.I2, -4.0 / 3.0)

    @property
    def I4bar(self):
        return self._bar(self.I4, -2.0 / 3.0)

    @property
    def I5bar(self):
        return self._bar(self.I5, -4.0 / 3.0)

    @property
    def I6bar(self):
        return self._bar(self.I6, -2.0 / 3.0)

    @property
    def I7bar(self):
        return self._bar(self.I7, -4.0 / 3.0)


def _block(constants: ElementConstants, attr: str, name: str):
    value = getattr(constants, attr)
    if value is None:
        raise ValueError(f"invariant {name} requested but {attr} was not precomputed")
    return value


def invariants(g_hat: np.ndarray, J: float, constants: ElementConstants,
               need: frozenset = frozenset({I1})) -> Invariants:
    """Invariants from g-hat and the precomputed trace tensors."""
    values = {"I1": float(g_hat @ constants.m1)}
    if I2 in need:
        values["I2"] = float(g_hat @ constants.M2 @ g_hat)
    if I4 in need:
        values["I4"] = float(g_hat @ _block(constants, "m4", I4))
    if I5 in need:
        values["I5"] = float(g_hat @ _block(constants, "M5", I5) @ g_hat)
    if I6 in need:
        values["I6"] = float(g_hat @ _block(constants, "m6", I6))
    if I7 in need:
        values["I7"] = float(g_hat @ _block(constants, "M7", I7) @ g_hat)
    return Invariants(J=float(J), I3=float(J) ** 2, **values)


@dataclass(frozen=True)
class ElementKinematics:
    Jt: np.ndarray
    Jt_inv: np.ndarray
    J: float
    g_hat: np.ndarray
    inv: Invariants

    @classmethod
    def evaluate(cls, constants: ElementConstants, U_elem: np.ndarray,
                 need: Optional[frozenset] = None, element: int = -1) -> "ElementKinematics":
        need = constants.need if need is None else need
        Jt, Jt_inv = update_jacobian(constants.J0, U_elem, constants.D, element)
        J = volume_ratio(Jt, constants.detJ0)
        g_hat = g_vector(Jt)
        return cls(Jt, Jt_inv, J, g_hat, invariants(g_hat, J, constants, need))
