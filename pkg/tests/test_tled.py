import numpy as np
import pytest

from djtled.errors import InversionError
from djtled.tled import (DeformationState, TledConstants, conventional_invariants, deformation_gradient,
                         second_pk_stress, stress_from_derivatives)
from helpers import admissible_states, fibre_pair, i57_derivatives, i57_energy, materials


def c_gradient(fun, C, h=1e-7):
    """2 d psi / dC with symmetric perturbations."""
    S = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            E = np.zeros((3, 3))
            E[i, j] = E[j, i] = h
            d = (fun(C + E) - fun(C - E)) / (2 * h)
            S[i, j] = S[j, i] = d if i == j else d / 2
    return 2 * S


def test_deformation_gradient_of_affine_motion(rng):
    (X,), _ = admissible_states(rng, "H8", 1)
    A = 0.2 * rng.standard_normal((3, 3))
    t = TledConstants.build(X, "H8")
    np.testing.assert_allclose(deformation_gradient(X @ A.T, t.B0), np.eye(3) + A, atol=1e-12)


@pytest.mark.parametrize("name", ["NH", "TI", "OT", "MR"])
def test_stress_free_reference_and_symmetry(name, rng):
    mat = materials(rng)[name]
    assert np.abs(second_pk_stress(mat, DeformationState.of(np.eye(3)))).max() < 1e-9
    X = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    S = second_pk_stress(mat, DeformationState.of(X))
    np.testing.assert_array_equal(S, S.T)


def test_i5_i7_stress_is_energy_derivative(rng):
    a, b = fibre_pair(rng)
    X = np.eye(3) + 0.25 * rng.standard_normal((3, 3))
    state = DeformationState.of(X)
    inv = conventional_invariants(state, frozenset({"I1", "I5", "I7"}), a, b)
    S = stress_from_derivatives(state, inv, i57_derivatives(inv), a, b)
    np.testing.assert_allclose(S, c_gradient(lambda C: i57_energy(C, a, b), state.C), rtol=1e-6,
                               atol=1e-6 * np.abs(S).max())


def test_inverted_gradient_rejected():
    with pytest.raises(InversionError):
        DeformationState.of(np.diag([1.0, 1.0, -0.5]), element=3)
