
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from djtled.element import shape_derivatives
from djtled.forces import adjacency, element_force, gather, hourglass_energy, hourglass_force
from djtled.kinematics import ElementKinematics
from djtled.materials import energy_derivatives
from djtled.precompute import FibreDirections, element_constants, hourglass_vectors
from djtled.mesh import generate_box
from djtled.tled import TledConstants
from helpers import (admissible_states, central_gradient, dj_force, fibre_pair, i57_derivatives, i57_energy,
                     materials, rel_err, right_cauchy_green, strain_energy, tled_force)

NAMES = ["NH", "TI", "OT", "MR"]


@pytest.mark.parametrize("kind", ["T4", "H8"])
@pytest.mark.parametrize("name", NAMES)
def test_direct_jacobian_matches_conventional(kind, name, rng):
    mat = materials(rng)[name]
    coords, disp = admissible_states(rng, kind, 30)
    for X, U in zip(coords, disp):
        assert rel_err(dj_force(mat, X, U, kind), tled_force(mat, X, U, kind)) < 1e-11


@pytest.mark.parametrize("kind", ["T4", "H8"])
@pytest.mark.parametrize("name", NAMES)
def test_forces_are_energy_gradients(kind, name, rng):
    mat = materials(rng)[name]
    D = shape_derivatives(kind)
    coords, disp = admissible_states(rng, kind, 5)
    for X, U in zip(coords, disp):
        J0 = D @ X
        V0 = TledConstants.build(X, kind).V0
        fd = central_gradient(lambda u: strain_energy(mat, J0, J0 + D @ u, V0), U, 1e-7 * np.ptp(X))
        assert rel_err(dj_force(mat, X, U, kind), fd) < 1e-6


@pytest.mark.parametrize("kind", ["T4", "H8"])
def test_i5_i7_terms_are_energy_gradients(kind, rng):
    a, b = fibre_pair(rng)
    D = shape_derivatives(kind)
    need = frozenset({"I1", "I5", "I7"})
    coords, disp = admissible_states(rng, kind, 5)
    for X, U in zip(coords, disp):
        c = element_constants(X, kind, need, FibreDirections(a, b))
        kin = ElementKinematics.evaluate(c, U)
        f = element_force(c, kin, i57_derivatives(kin.inv))
        fd = central_gradient(lambda u: c.V0 * i57_energy(right_cauchy_green(c.J0, c.J0 + D @ u), a, b), U,
                              1e-7 * np.ptp(X))
        assert rel_err(f, fd) < 1e-6


def test_t4_shortcut_equals_full_product(rng):
    mat = materials(rng)["OT"]
    (X,), (U,) = admissible_states(rng, "T4", 1)
    c = element_constants(X, "T4", mat.needs, FibreDirections.of(mat))
    kin = ElementKinematics.evaluate(c, U)
    d = energy_derivatives(mat, kin.inv)
    np.testing.assert_allclose(element_force(c, kin, d, shortcut=True), element_force(c, kin, d, shortcut=False),
                               rtol=1e-12, atol=1e-18)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["T4", "H8"]), name=st.sampled_from(NAMES))
def test_force_balance_and_objectivity(seed, kind, name):
    rng = np.random.default_rng(seed)
    mat = materials(rng)[name]
    (X,), (U,) = admissible_states(rng, kind, 1)
    f = dj_force(mat, X, U, kind)
    scale = np.abs(f).max()
    x = X + U
    # linear and angular momentum balance of the element
    assert np.abs(f.sum(axis=0)).max() <= 1e-10 * scale
    assert np.abs(np.cross(x, f).sum(axis=0)).max() <= 1e-10 * scale * np.ptp(x)
    # superposed rigid rotation rotates the nodal forces
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    Q *= np.sign(np.linalg.det(Q))
    U_rot = x @ Q.T - X
    np.testing.assert_allclose(dj_force(mat, X, U_rot, kind), f @ Q.T, atol=1e-9 * scale)


@pytest.mark.parametrize("kind", ["T4", "H8"])
def test_reference_state_and_translation_are_force_free(kind, rng):
    mat = materials(rng)["MR"]
    (X,), _ = admissible_states(rng, kind, 1)
    assert np.abs(dj_force(mat, X, np.zeros_like(X), kind)).max() < 1e-9
    assert np.abs(dj_force(mat, X, np.tile(rng.standard_normal(3), (len(X), 1)), kind)).max() < 1e-9


def test_hourglass_force_is_energy_gradient(rng):
    (X,), (U,) = admissible_states(rng, "H8", 1)
    D = shape_derivatives("H8")
    gamma = hourglass_vectors(X, D, np.linalg.inv(D @ X))
    fd = central_gradient(lambda u: hourglass_energy(gamma, u, 7.5), U, 1e-6)
    np.testing.assert_allclose(hourglass_force(gamma, U, 7.5), fd, rtol=1e-7, atol=1e-12)
    # linear fields carry no hourglass force
    affine = X @ rng.standard_normal((3, 3)) + 1.0
    assert np.abs(hourglass_force(gamma, affine, 7.5)).max() < 1e-10


def test_gather_sums_in_element_order():
    mesh = generate_box((1, 1, 1), (2, 1, 1), "H8")
    buffer = np.arange(2 * 8 * 3, dtype=float).reshape(2, 8, 3)
    out = gather(*adjacency(mesh), buffer)
    ref = np.zeros((mesh.n_nodes, 3))
    np.add.at(ref, mesh.elements.ravel(), buffer.reshape(-1, 3))
    np.testing.assert_array_equal(out, ref)
    offsets, elem, _ = adjacency(mesh)
    for n in range(mesh.n_nodes):
        assert list(elem[offsets[n]:offsets[n + 1]]) == sorted(elem[offsets[n]:offsets[n + 1]])
