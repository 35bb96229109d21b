from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from djtled.materials import (MooneyRivlin, NeoHookean, Orthotropic, TransverselyIsotropic, energy,
                              energy_derivatives, benchmark_material, wave_speed, youngs_modulus)
from helpers import materials


def inv_record(J=1.0, I1bar=3.0, I2bar=3.0, I4bar=1.0, I6bar=1.0):
    return SimpleNamespace(J=J, I1bar=I1bar, I2bar=I2bar, I4bar=I4bar, I6bar=I6bar)


@pytest.mark.parametrize("name", ["NH", "TI", "OT", "MR"])
def test_reference_state_is_energy_and_stress_free(name):
    mat = materials()[name]
    inv = inv_record()
    assert energy(mat, inv) == 0.0
    d = energy_derivatives(mat, inv)
    assert d.dJ == 0.0
    assert d.d4 in (None, 0.0) and d.d6 in (None, 0.0)


@pytest.mark.parametrize("name", ["NH", "TI", "OT", "MR"])
@given(J=st.floats(0.5, 1.5), i1=st.floats(3.0, 6.0), i2=st.floats(3.0, 6.0), i4=st.floats(0.3, 3.0),
       i6=st.floats(0.3, 3.0))
def test_derivatives_match_finite_differences(name, J, i1, i2, i4, i6):
    mat = materials()[name]
    base = dict(J=J, I1bar=i1, I2bar=i2, I4bar=i4, I6bar=i6)
    d = energy_derivatives(mat, inv_record(**base))
    h = 1e-6
    for key, attr in (("J", "dJ"), ("I1bar", "d1"), ("I2bar", "d2"), ("I4bar", "d4"), ("I6bar", "d6")):
        up = dict(base, **{key: base[key] + h})
        dn = dict(base, **{key: base[key] - h})
        fd = (energy(mat, inv_record(**up)) - energy(mat, inv_record(**dn))) / (2 * h)
        got = getattr(d, attr)
        assert (0.0 if got is None else got) == pytest.approx(fd, rel=1e-6, abs=1e-6 * mat.kappa)


def test_needs():
    m = materials()
    assert m["NH"].needs == {"I1"}
    assert m["TI"].needs == {"I1", "I4"}
    assert m["OT"].needs == {"I1", "I4", "I6"}
    assert m["MR"].needs == {"I1", "I2"}


def test_moduli():
    nh = benchmark_material("NH")
    mu, kappa = 6567.0, 326210.0
    assert youngs_modulus(nh) == pytest.approx(9 * kappa * mu / (3 * kappa + mu))
    assert wave_speed(nh) == pytest.approx(np.sqrt((kappa + 4 * mu / 3) / 1060.0))
    assert benchmark_material("MR").shear_modulus == pytest.approx(2 * (mu / 2 + 3000.0))


@pytest.mark.parametrize(
    "factory",
    [
        lambda: NeoHookean(-1.0, 1.0),
        lambda: NeoHookean(1.0, 0.0),
        lambda: TransverselyIsotropic(1.0, 1.0, 1.0, (1.0, 1.0, 0.0)),
        lambda: Orthotropic(1.0, 1.0, -1.0, 1.0),
        lambda: MooneyRivlin(0.0, 0.0, 1.0),
        lambda: benchmark_material("XX"),
    ],
)
def test_invalid_parameters(factory):
    with pytest.raises(ValueError):
        factory()
