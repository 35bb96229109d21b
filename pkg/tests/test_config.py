import textwrap

import numpy as np
import pytest

from djtled.config import load_config, parse_config
from djtled.errors import ConfigError
from djtled.materials import MooneyRivlin, Orthotropic
from djtled.mesh import generate_box, render_mesh
from djtled.precompute import critical_dt
from djtled.solver import relaxation_damping

BASE = textwrap.dedent("""
    [mesh]
    generate = box
    extent = 0.1 0.1 0.1
    divisions = 2 2 2
    kind = H8

    [material]
    model = NH
    mu = 6567
    kappa = 326210

    [bc]
    fixed = z min
            x min x
    prescribed = z max z 0.001 0.05

    [time]
    t_end = 0.01
""")


def test_defaults_and_derived_values():
    cfg = parse_config(BASE)
    assert cfg.engine == "djtled" and cfg.threads == 1 and cfg.precision == "double"
    assert cfg.time_step() == pytest.approx(0.8 * critical_dt(cfg.mesh, cfg.material))
    assert cfg.damping() == pytest.approx(relaxation_damping(cfg.mesh, cfg.material))
    bc = cfg.boundary_conditions()
    top = np.flatnonzero(cfg.mesh.nodes[:, 2] == 0.1)
    assert set(bc.prescribed[0].nodes) == set(top)
    # x-min nodes on the top face are prescribed in z but still fixed in x
    assert all((n, 2) not in bc.fixed for n in top)
    assert any((n, 0) in bc.fixed for n in top)


def test_explicit_values():
    text = BASE.replace("t_end = 0.01", "t_end = 0.01\ndt = 1e-5\nalpha = 3\nsafety = 0.5")
    text += "\n[engine]\nname = both\nthreads = 1\nprecision = single\non_inversion = report\n"
    cfg = parse_config(text)
    assert cfg.time_step() == 1e-5 and cfg.damping() == 3.0
    assert cfg.engines() == ("djtled", "tled")
    assert cfg.precision == "single" and cfg.on_inversion == "report"


def test_materials_with_fibres():
    text = BASE.replace("model = NH", "model = OT\neta_a = 100\neta_b = 50\na = 0 0 1\nb = 1, 0, 0")
    assert isinstance(parse_config(text).material, Orthotropic)
    mr = BASE.replace("model = NH\nmu = 6567", "model = MR\nc10 = 3000\nc01 = 1000")
    assert isinstance(parse_config(mr).material, MooneyRivlin)


@pytest.mark.parametrize(
    "change, message",
    [
        (("divisions", "divisons"), "unknown key"),
        (("[time]", "[timing]"), "unknown section"),
        (("t_end = 0.01", "t_end = abc"), "expected numbers"),
        (("kind = H8", "kind = Q8"), "mesh.kind"),
        (("model = NH", "model = XX"), "material.model"),
        (("kappa = 326210", "kappa = -1"), "kappa"),
        (("mu = 6567", "mu = 6567\nc10 = 1"), "do not apply"),
        (("z max z 0.001 0.05", "z max z 0.001"), "prescribed"),
        (("z max z 0.001 0.05", "z 0.03 z 0.001 0.05"), "no nodes"),
        (("fixed = z min", "fixed = w min"), "axis"),
        (("[time]\nt_end = 0.01", "[time]\nt_end = 0.01\nsafety = 1.5"), "safety"),
        (("[mesh]\ngenerate = box", "[mesh]\nfile = x.mesh\ngenerate = box"), "exactly one"),
    ],
)
def test_invalid_configs(change, message):
    old, new = change
    assert old in BASE
    with pytest.raises(ConfigError, match=message):
        parse_config(BASE.replace(old, new))


def test_missing_section():
    with pytest.raises(ConfigError, match=r"\[time\]"):
        parse_config(BASE.split("[time]")[0])


def test_mesh_file_relative_to_config(tmp_path):
    mesh = generate_box((1, 1, 1), (1, 1, 2), "T4")
    (tmp_path / "m.mesh").write_text(render_mesh(mesh))
    text = BASE.split("[material]")[0].replace(
        "generate = box\nextent = 0.1 0.1 0.1\ndivisions = 2 2 2\nkind = H8", "file = m.mesh")
    text += "[material]" + BASE.split("[material]")[1].replace("0.001 0.05", "0.01 0.05")
    (tmp_path / "run.ini").write_text(text + "\n[output]\nfield = out/u.vtk\n")
    cfg = load_config(tmp_path / "run.ini")
    assert cfg.mesh == mesh
    assert cfg.field_path == tmp_path / "out" / "u.vtk"
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.ini")
    (tmp_path / "bad.ini").write_text(text.replace("m.mesh", "absent.mesh"))
    with pytest.raises(ConfigError, match="cannot read mesh"):
        load_config(tmp_path / "bad.ini")
