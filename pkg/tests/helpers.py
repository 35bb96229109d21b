"""Random-state generators and independent oracles shared by the test modules."""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from djtled.element import H8_NATURAL, shape_derivatives
from djtled.forces import element_force
from djtled.kinematics import ElementKinematics
from djtled.materials import MooneyRivlin, NeoHookean, Orthotropic, TransverselyIsotropic, energy, energy_derivatives
from djtled.mesh import Mesh
from djtled.precompute import FibreDirections, element_constants
from djtled.tled import DeformationState, TledConstants, deformation_gradient, second_pk_stress, tled_element_force

MU, KAPPA, RHO = 6567.0, 326210.0, 1060.0

T4_UNIT = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
H8_UNIT = 0.5 * (H8_NATURAL + 1.0)


def unit_vector(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def fibre_pair(rng):
    a = unit_vector(rng)
    b = rng.standard_normal(3)
    b -= (b @ a) * a
    return a, b / np.linalg.norm(b)


def materials(rng=None) -> dict:
    """The four models with the cube-test parameters; random fibres when ``rng`` is given."""
    a, b = fibre_pair(rng) if rng is not None else ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    return {
        "NH": NeoHookean(MU, KAPPA, RHO),
        "TI": TransverselyIsotropic(MU, 2 * MU, KAPPA, tuple(a), RHO),
        "OT": Orthotropic(MU, 2 * MU, 2 * MU, KAPPA, tuple(a), tuple(b), RHO),
        "MR": MooneyRivlin(MU / 2, 3000.0, KAPPA, RHO),
    }


def random_element(rng, kind: str, size: float = 0.01, jitter: float = 0.12) -> np.ndarray:
    """A randomly rotated, scaled and jittered reference element with positive det J0."""
    base = T4_UNIT if kind == "T4" else H8_UNIT
    while True:
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        if np.linalg.det(Q) < 0:
            Q[:, 0] *= -1
        coords = (base + jitter * rng.uniform(-1, 1, base.shape)) @ Q.T
        coords = size * coords * rng.uniform(0.5, 2.0) + rng.uniform(-1, 1, 3)
        J0 = shape_derivatives(kind) @ coords
        if np.linalg.det(J0) > 1e-3 * size**3:
            return coords


def random_displacement(rng, coords: np.ndarray, strain: float = 0.3, noise: float = 0.05) -> np.ndarray:
    """Affine stretch/shear about the centroid plus per-node noise, scaled to the element size."""
    centre = coords.mean(axis=0)
    h = np.max(np.ptp(coords, axis=0))
    A = strain * rng.uniform(-1, 1, (3, 3))
    return (coords - centre) @ A.T + noise * h * rng.uniform(-1, 1, coords.shape)


def disjoint_mesh(elements_coords: np.ndarray, kind: str) -> Mesh:
    """Mesh whose elements share no nodes, so global forces are per-element forces."""
    M, n, _ = elements_coords.shape
    return Mesh(elements_coords.reshape(-1, 3), np.arange(M * n).reshape(M, n), kind)


def admissible_states(rng, kind: str, count: int, strain: float = 0.3, noise: float = 0.05):
    """(coords (count, n, 3), displacements (count, n, 3)) with det Jt > 0 everywhere."""
    D = shape_derivatives(kind)
    coords, disp = [], []
    while len(coords) < count:
        X = random_element(rng, kind)
        U = random_displacement(rng, X, strain, noise)
        J0 = D @ X
        Jt = J0 + D @ U
        if np.linalg.det(Jt) > 0.2 * np.linalg.det(J0):
            coords.append(X)
            disp.append(U)
    return np.array(coords), np.array(disp)


def conventional_invariants(J0: np.ndarray, Jt: np.ndarray, a=None, b=None) -> dict:
    """Invariants straight from C = X^T X with X = Jt^T J0^-T, no package code involved."""
    X = Jt.T @ np.linalg.inv(J0).T
    C = X.T @ X
    C2 = C @ C
    out = {"I1": np.trace(C), "I2": 0.5 * (np.trace(C) ** 2 - np.trace(C2)), "I3": np.linalg.det(C),
           "J": np.linalg.det(X)}
    if a is not None:
        out["I4"] = a @ C @ a
        out["I5"] = a @ C2 @ a
    if b is not None:
        out["I6"] = b @ C @ b
        out["I7"] = b @ C2 @ b
    return out


def central_gradient(fun, U: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of an (n, 3) array."""
    g = np.zeros_like(U)
    for idx in np.ndindex(U.shape):
        up, dn = U.copy(), U.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (fun(up) - fun(dn)) / (2.0 * h)
    return g


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# Test-only energy exercising the I5/I7 terms that none of the shipped materials use:
# psi = c1 (I1bar - 3) + c5/2 (I5bar - 1)^2 + c7/2 (I7bar - 1)^2 + kappa/2 (J - 1)^2
C1, C5, C7 = 0.5 * MU, 3.0 * MU, 2.0 * MU


def i57_energy(C: np.ndarray, a, b) -> float:
    J = np.sqrt(np.linalg.det(C))
    C2 = C @ C
    I1bar = J ** (-2 / 3) * np.trace(C)
    I5bar = J ** (-4 / 3) * (a @ C2 @ a)
    I7bar = J ** (-4 / 3) * (b @ C2 @ b)
    return C1 * (I1bar - 3) + 0.5 * C5 * (I5bar - 1) ** 2 + 0.5 * C7 * (I7bar - 1) ** 2 + 0.5 * KAPPA * (J - 1) ** 2


def i57_derivatives(inv):
    from djtled.materials import EnergyDerivatives

    return EnergyDerivatives(dJ=KAPPA * (inv.J - 1), d1=C1, d5=C5 * (inv.I5bar - 1), d7=C7 * (inv.I7bar - 1))


def right_cauchy_green(J0: np.ndarray, Jt: np.ndarray) -> np.ndarray:
    X = Jt.T @ np.linalg.inv(J0).T
    return X.T @ X


def strain_energy(material, J0, Jt, V0):
    """V0 * psi from C = X^T X, the invariants formed directly from C."""
    C = right_cauchy_green(J0, Jt)
    J = np.sqrt(np.linalg.det(C))
    a = np.asarray(getattr(material, "a", (1, 0, 0)), dtype=float)
    b = np.asarray(getattr(material, "b", (0, 1, 0)), dtype=float)
    inv = SimpleNamespace(J=J, I1bar=J ** (-2 / 3) * np.trace(C),
                          I2bar=J ** (-4 / 3) * 0.5 * (np.trace(C) ** 2 - np.trace(C @ C)),
                          I4bar=J ** (-2 / 3) * (a @ C @ a), I6bar=J ** (-2 / 3) * (b @ C @ b))
    return V0 * energy(material, inv)


def dj_force(material, X, U, kind):
    c = element_constants(X, kind, material.needs, FibreDirections.of(material))
    kin = ElementKinematics.evaluate(c, U)
    return element_force(c, kin, energy_derivatives(material, kin.inv))


def tled_force(material, X, U, kind):
    t = TledConstants.build(X, kind)
    state = DeformationState.of(deformation_gradient(U, t.B0))
    return tled_element_force(state.X, second_pk_stress(material, state), t.B0, t.V0)


# acceptance verdicts, printed by the terminal-summary hook in conftest
VERDICTS: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    VERDICTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail
