from dataclasses import replace

import numpy as np
import pytest

from djtled.demo import DemoSpec, demo_problem, ellipsoid_mesh, run_demo

SMALL = DemoSpec(spacing=0.02, t_end=1.5)


def test_ellipsoid_mesh_is_valid_and_inside():
    spec = DemoSpec(spacing=0.02)
    mesh = ellipsoid_mesh(spec.semi_axes, spec.spacing)
    assert mesh.kind.value == "T4"
    assert np.all(mesh.volumes() > 0)
    assert np.array_equal(np.unique(mesh.elements), np.arange(mesh.n_nodes))
    lo, hi = mesh.bounds()
    assert np.all(lo >= -np.array(spec.semi_axes) - 1e-12) and np.all(hi <= np.array(spec.semi_axes) + 1e-12)


def test_problem_sets_are_disjoint():
    mesh, bc, patch, base = demo_problem(SMALL)
    assert patch.size and base.size and not np.intersect1d(patch, base).size
    with pytest.raises(ValueError, match="no nodes"):
        demo_problem(replace(SMALL, patch_radius=1e-4, patch_centre=(0.0, 0.0, 0.5)))


@pytest.fixture(scope="module")
def small_run():
    return run_demo(SMALL)


def test_engines_agree_and_constraints_hold(small_run):
    r = small_run
    assert r.rmse < 1e-9
    for U in r.fields.values():
        assert np.all(U[r.base] == 0.0)
        np.testing.assert_array_equal(U[r.patch], np.broadcast_to(SMALL.patch_displacement, (len(r.patch), 3)))
    text = r.report()
    assert "rmse" in text and "nre_histogram" in text


def test_zero_patch_displacement_gives_zero_field():
    r = run_demo(replace(SMALL, patch_displacement=(0.0, 0.0, 0.0), t_end=0.2))
    for U in r.fields.values():
        assert np.all(U == 0.0)
    assert r.rmse == 0.0 and r.histogram is None


def test_response_is_nonlinear(small_run):
    # the patch moves exactly twice as far; the free interior must not scale exactly
    doubled = run_demo(replace(SMALL, patch_displacement=tuple(2 * v for v in SMALL.patch_displacement)),
                       engines=("djtled",))
    free = np.setdiff1d(np.arange(small_run.mesh.n_nodes), np.union1d(small_run.patch, small_run.base))
    once = np.abs(small_run.fields["djtled"][free]).max()
    twice = np.abs(doubled.fields["djtled"][free]).max()
    assert abs(twice / (2 * once) - 1) > 1e-6


def test_outputs_written(tmp_path):
    r = run_demo(replace(SMALL, t_end=0.1), engines=("tled",), field_path=tmp_path / "u.vtk",
                 report_path=tmp_path / "r.txt")
    assert r.rmse is None
    assert (tmp_path / "u.vtk").read_text().startswith("# vtk DataFile")
    assert (tmp_path / "r.txt").read_text() == r.report()
