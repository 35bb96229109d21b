import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from djtled.element import ElementKind, jacobian0, shape_derivatives, volume0
from djtled.errors import MeshError
from helpers import H8_UNIT, T4_UNIT

finite = st.floats(-2.0, 2.0, allow_nan=False)


@pytest.mark.parametrize("kind", ["T4", "H8"])
def test_shape_derivatives_sum_to_zero(kind):
    # partition of unity: sum_a h_a = 1, so derivatives sum to zero
    np.testing.assert_allclose(shape_derivatives(kind).sum(axis=1), 0.0, atol=1e-15)


@pytest.mark.parametrize("kind", ["T4", "H8"])
@given(A=arrays(float, (3, 3), elements=finite), c=arrays(float, 3, elements=finite))
def test_jacobian_reproduces_affine_map(kind, A, c):
    ref = T4_UNIT if kind == "T4" else 2.0 * H8_UNIT - 1.0
    coords = ref @ A.T + c
    J = shape_derivatives(kind) @ coords
    # x = A xi + c  =>  dx_j/dxi_i = A[j, i]
    np.testing.assert_allclose(J, A.T, atol=1e-12)


def test_unit_volumes():
    assert volume0(jacobian0(T4_UNIT, shape_derivatives("T4")), "T4") == pytest.approx(1 / 6)
    assert volume0(jacobian0(H8_UNIT, shape_derivatives("H8")), "H8") == pytest.approx(1.0)


@settings(max_examples=50)
@given(scale=st.floats(0.01, 10.0))
def test_volume_scales_cubically(scale):
    D = shape_derivatives("H8")
    assert volume0(jacobian0(scale * H8_UNIT, D), "H8") == pytest.approx(scale**3, rel=1e-12)


def test_inverted_reference_rejected():
    flipped = T4_UNIT[[0, 2, 1, 3]]
    with pytest.raises(MeshError):
        jacobian0(flipped, shape_derivatives("T4"))


def test_kind_parsing():
    assert ElementKind.parse("h8") is ElementKind.H8
    assert ElementKind.T4.nodes == 4 and ElementKind.H8.vtk_cell_type == 12
    with pytest.raises(ValueError):
        ElementKind.parse("Q4")
