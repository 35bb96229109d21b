"""Hyperelastic strain energies in the uncoupled form Psi(I1bar, I2bar, I4bar, I6bar) + Psi(J).

Every material here is a special case of

    c1 (I1bar - 3) + c2 (I2bar - 3) + eta_a/2 (I4bar - 1)^2 + eta_b/2 (I6bar - 1)^2 + kappa/2 (J - 1)^2

which is what the compiled force kernels consume (see ``coefficients``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

# Invariant names as used in dependency sets and invariant records.
I1, I2, I4, I5, I6, I7 = "I1", "I2", "I4", "I5", "I6", "I7"


@dataclass(frozen=True)
class EnergyDerivatives:
    """dPsi/dIkbar for the modified invariants and dPsi/dJ.

    ``None`` marks a structural zero, letting the force kernel skip the term.
    """

    dJ: float
    d1: Optional[float] = None
    d2: Optional[float] = None
    d4: Optional[float] = None
    d5: Optional[float] = None
    d6: Optional[float] = None
    d7: Optional[float] = None


def _unit(v, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"fibre {name} must be a 3-vector")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"fibre {name} must be unit length, |{name}| = {norm!r}")
    return v


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def _non_negative(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise ValueError(f"{k} must be non-negative, got {v}")


@dataclass(frozen=True)
class NeoHookean:
    mu: float
    kappa: float
    rho: float = 1060.0

    name = "NH"
    needs = frozenset({I1})

    def __post_init__(self):
        _positive(mu=self.mu, kappa=self.kappa, rho=self.rho)

    @property
    def shear_modulus(self) -> float:
        return self.mu

    def coefficients(self):
        return self.mu / 2.0, 0.0, 0.0, 0.0, self.kappa


@dataclass(frozen=True)
class TransverselyIsotropic:
    mu: float
    eta_a: float
    kappa: float
    a: tuple = (1.0, 0.0, 0.0)
    rho: float = 1060.0

    name = "TI"
    needs = frozenset({I1, I4})

    def __post_init__(self):
        _positive(mu=self.mu, kappa=self.kappa, rho=self.rho)
        _non_negative(eta_a=self.eta_a)
        object.__setattr__(self, "a", tuple(_unit(self.a, "a")))

    @property
    def shear_modulus(self) -> float:
        return self.mu

    def coefficients(self):
        return self.mu / 2.0, 0.0, self.eta_a, 0.0, self.kappa


@dataclass(frozen=True)
class Orthotropic:
    mu: float
    eta_a: float
    eta_b: float
    kappa: float
    a: tuple = (1.0, 0.0, 0.0)
    b: tuple = (0.0, 1.0, 0.0)
    rho: float = 1060.0

    name = "OT"
    needs = frozenset({I1, I4, I6})

    def __post_init__(self):
        _positive(mu=self.mu, kappa=self.kappa, rho=self.rho)
        _non_negative(eta_a=self.eta_a, eta_b=self.eta_b)
        object.__setattr__(self, "a", tuple(_unit(self.a, "a")))
        object.__setattr__(self, "b", tuple(_unit(self.b, "b")))

    @property
    def shear_modulus(self) -> float:
        return self.mu

    def coefficients(self):
        return self.mu / 2.0, 0.0, self.eta_a, self.eta_b, self.kappa


@dataclass(frozen=True)
class MooneyRivlin:
    c10: float
    c01: float
    kappa: float
    rho: float = 1060.0

    name = "MR"
    needs = frozenset({I1, I2})

    def __post_init__(self):
        _positive(kappa=self.kappa, rho=self.rho)
        _non_negative(c10=self.c10, c01=self.c01)
        if not self.c10 + self.c01 > 0:
            raise ValueError("c10 + c01 must be positive")

    @property
    def shear_modulus(self) -> float:
        return 2.0 * (self.c10 + self.c01)

    def coefficients(self):
        return self.c10, self.c01, 0.0, 0.0, self.kappa


Material = Union[NeoHookean, TransverselyIsotropic, Orthotropic, MooneyRivlin]


def fibres_of(material: Material):
    """(a, b) fibre directions as arrays, ``None`` where the material has none."""
    a = np.array(material.a) if hasattr(material, "a") else None
    b = np.array(material.b) if hasattr(material, "b") else None
    return a, b


def wave_speed(material: Material) -> float:
    """Dilatational wave speed sqrt((kappa + 4 mu / 3) / rho)."""
    return float(np.sqrt((material.kappa + 4.0 * material.shear_modulus / 3.0) / material.rho))


def youngs_modulus(material: Material) -> float:
    mu, kappa = material.shear_modulus, material.kappa
    return 9.0 * kappa * mu / (3.0 * kappa + mu)


def energy(material: Material, inv) -> float:
    """Strain energy density (Pa) at an invariant record with barred invariants and J."""
    c1, c2, eta_a, eta_b, kappa = material.coefficients()
    psi = c1 * (inv.I1bar - 3.0) + 0.5 * kappa * (inv.J - 1.0) ** 2
    if I2 in material.needs:
        psi += c2 * (inv.I2bar - 3.0)
    if I4 in material.needs:
        psi += 0.5 * eta_a * (inv.I4bar - 1.0) ** 2
    if I6 in material.needs:
        psi += 0.5 * eta_b * (inv.I6bar - 1.0) ** 2
    return psi


def energy_derivatives(material: Material, inv) -> EnergyDerivatives:
    c1, c2, eta_a, eta_b, kappa = material.coefficients()
    needs = material.needs
    return EnergyDerivatives(
        dJ=kappa * (inv.J - 1.0),
        d1=c1,
        d2=c2 if I2 in needs else None,
        d4=eta_a * (inv.I4bar - 1.0) if I4 in needs else None,
        d6=eta_b * (inv.I6bar - 1.0) if I6 in needs else None,
    )


def benchmark_material(model: str, mu: float = 6567.0, kappa: float = 326210.0, rho: float = 1060.0) -> Material:
    """Material set used for the cube experiments: eta = 2 mu, C10 = mu/2, C01 = 3000 Pa."""
    model = model.upper()
    if model == "NH":
        return NeoHookean(mu, kappa, rho)
    if model == "TI":
        return TransverselyIsotropic(mu, 2.0 * mu, kappa, (1.0, 0.0, 0.0), rho)
    if model == "OT":
        return Orthotropic(mu, 2.0 * mu, 2.0 * mu, kappa, (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), rho)
    if model == "MR":
        return MooneyRivlin(mu / 2.0, 3000.0, kappa, rho)
    raise ValueError(f"unknown material model {model!r}")
