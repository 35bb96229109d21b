import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from djtled.errors import MeshError
from djtled.mesh import (BoundaryConditions, Mesh, PrescribedDisplacement, export_field, fix_nodes, generate_box,
                         load_mesh, nodes_on_plane, read_field, read_mesh, render_mesh)

TET = """djtled-mesh 1
# unit tetrahedron
nodes 4
0 0 0
1 0 0
0 1 0
0 0 1
elements T4 1
0 1 2 3
"""


def test_load_small_mesh():
    mesh = load_mesh(TET)
    assert mesh.n_nodes == 4 and mesh.n_elements == 1 and mesh.n_dofs == 12
    assert mesh.volumes()[0] == pytest.approx(1 / 6)


@settings(max_examples=25, deadline=None)
@given(kind=st.sampled_from(["T4", "H8"]), div=st.tuples(*[st.integers(1, 3)] * 3),
       extent=st.tuples(*[st.floats(1e-3, 10.0)] * 3))
def test_box_round_trip_and_volume(kind, div, extent):
    mesh = generate_box(extent, div, kind)
    assert load_mesh(render_mesh(mesh)) == mesh
    assert mesh.volumes().sum() == pytest.approx(np.prod(extent), rel=1e-10)
    assert np.all(mesh.volumes() > 0)
    assert mesh.n_elements == np.prod(div) * (6 if kind == "T4" else 1)


@pytest.mark.parametrize(
    "text, line",
    [
        (TET.replace("djtled-mesh 1", "mesh 2"), 1),
        (TET.replace("0 0 1\n", "0 0 x\n"), 7),
        (TET.replace("0 1 2 3", "0 1 2"), 9),
        (TET.replace("0 1 2 3", "0 1 2 9"), None),
        (TET + "extra\n", 10),
    ],
)
def test_malformed_mesh_reports_location(text, line):
    with pytest.raises(MeshError) as info:
        load_mesh(text)
    assert info.value.line == line


def test_inverted_element_named():
    with pytest.raises(MeshError) as info:
        load_mesh(TET.replace("0 1 2 3", "0 2 1 3"))
    assert info.value.element == 0


def test_truncated_file():
    with pytest.raises(MeshError, match="unexpected end"):
        load_mesh("\n".join(TET.splitlines()[:5]))


def test_read_mesh_missing_file(tmp_path):
    with pytest.raises(MeshError, match="cannot read"):
        read_mesh(tmp_path / "absent.mesh")


def test_field_export_round_trip(rng):
    mesh = generate_box((1, 2, 3), (2, 1, 1), "H8")
    u = rng.standard_normal((mesh.n_nodes, 3))
    text = export_field(mesh, u)
    assert "CELL_TYPES 2" in text and text.splitlines()[0].startswith("# vtk")
    np.testing.assert_array_equal(read_field(text), u)
    np.testing.assert_array_equal(read_field(export_field(mesh, u.ravel())), u)
    with pytest.raises(ValueError):
        export_field(mesh, u[:-1])


def test_nodes_on_plane():
    mesh = generate_box((1, 1, 2), (2, 2, 2), "H8")
    top = nodes_on_plane(mesh, "z", "max")
    assert len(top) == 9 and np.all(mesh.nodes[top, 2] == 2.0)
    assert len(nodes_on_plane(mesh, 2, 1.0)) == 9
    assert len(nodes_on_plane(mesh, "x", 0.3)) == 0


def test_boundary_condition_validation():
    with pytest.raises(ValueError, match="both fixed and prescribed"):
        BoundaryConditions(fix_nodes([0]), (PrescribedDisplacement((0,), 1, 0.1, 1.0),))
    with pytest.raises(ValueError, match="ramp"):
        BoundaryConditions(prescribed=(PrescribedDisplacement((0,), 1, 0.1, 0.0),))
    bc = BoundaryConditions(fix_nodes([7]))
    with pytest.raises(ValueError):
        bc.check(load_mesh(TET))


def test_prescribed_ramp():
    p = PrescribedDisplacement((0,), 2, 0.5, 2.0)
    assert p.value(0.0) == 0.0 and p.value(1.0) == 0.25 and p.value(5.0) == 0.5


def test_mesh_is_immutable():
    mesh = load_mesh(TET)
    with pytest.raises(ValueError):
        mesh.nodes[0, 0] = 1.0
    with pytest.raises(MeshError):
        Mesh(np.zeros((3, 2)), np.zeros((0, 4), dtype=int), "T4")
