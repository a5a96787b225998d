import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waverom.errors import DimensionError, ValidationError
from waverom.model import (
    Grid,
    Scenario,
    VelocityModel,
    coarsen_model,
    load_velocity_model,
    save_velocity_model,
    smooth_model,
)


def test_grid_invariants():
    with pytest.raises(ValidationError):
        Grid.make(2, 5.0)
    with pytest.raises(ValidationError):
        Grid.make(10, -1.0)
    with pytest.raises(ValidationError):
        Grid(
            dims=(10,),
            spacing=(1.0,),
            origin=(0.0,),
            pml_layers=((2, 2),),
            reflecting=((True, False),),
        )


def test_grid_snap():
    g = Grid.make((11, 11), 10.0)
    assert g.snap((34.0, 97.0)) == (3, 10)
    assert g.snap((-5.0, 0.0)) == (0, 0)


def test_velocity_model_validation(grid1d):
    with pytest.raises(ValidationError):
        VelocityModel(grid=grid1d, nu=np.zeros(grid1d.dims))
    nu = np.full(grid1d.dims, 2000.0)
    nu[5] = np.inf
    with pytest.raises(ValidationError):
        VelocityModel(grid=grid1d, nu=nu)


def test_load_velocity_roundtrip(tmp_path):
    g = Grid.make((100, 80), (10.0, 12.0), pml_layers=0)
    rng = np.random.default_rng(3)
    m = VelocityModel(grid=g, nu=1500.0 + 1000.0 * rng.random(g.dims))
    path = tmp_path / "model.f32"
    save_velocity_model(m, path)
    loaded = load_velocity_model(path, meta=g)
    assert loaded.nu.size == 8000
    assert np.allclose(loaded.nu, m.nu.astype(np.float32), rtol=0, atol=0)


def test_load_velocity_size_mismatch(tmp_path):
    path = tmp_path / "bad.f32"
    np.zeros(10, dtype="<f4").tofile(path)
    with pytest.raises(DimensionError):
        load_velocity_model(path, meta=Grid.make((5, 4), 1.0, pml_layers=0))


def test_load_velocity_nonpositive(tmp_path):
    g = Grid.make(10, 1.0, pml_layers=0)
    path = tmp_path / "zero.f32"
    arr = np.full(10, 2000.0, dtype="<f4")
    arr[3] = 0.0
    arr.tofile(path)
    with pytest.raises(ValidationError):
        load_velocity_model(path, meta=g)


def test_load_constant_field(tmp_path):
    g = Grid.make(16, 2.0, pml_layers=0)
    path = tmp_path / "const.f32"
    np.full(16, 2000.0, dtype="<f4").tofile(path)
    m = load_velocity_model(path, meta=g)
    assert m.nu.min() == m.nu.max() == 2000.0


def test_smooth_constant_unchanged(homog1d):
    sm = smooth_model(homog1d, 200.0)
    assert np.allclose(sm.nu, homog1d.nu, rtol=0, atol=1e-12)


def test_smooth_width_zero_identity(homog1d):
    sm = smooth_model(homog1d, 0.0)
    assert np.array_equal(sm.nu, homog1d.nu)


def test_smooth_negative_width(homog1d):
    with pytest.raises(ValidationError):
        smooth_model(homog1d, -1.0)


def test_smooth_step_against_dense_convolution(grid1d):
    # Oracle: direct dense convolution with the same renormalized kernel.
    n = grid1d.dims[0]
    h = grid1d.spacing[0]
    nu = np.where(np.arange(n) < n // 2, 1500.0, 2500.0)
    model = VelocityModel(grid=grid1d, nu=nu)
    width = 200.0
    sm = smooth_model(model, width)

    half = int(np.floor(0.5 * width / h))
    offs = np.arange(-half, half + 1)
    w = 0.5 * (1.0 + np.cos(2 * np.pi * offs * h / width))
    w /= w.sum()
    expected = np.empty(n)
    for i in range(n):
        num = den = 0.0
        for o, wk in zip(offs, w):
            j = i + o
            if 0 <= j < n:
                num += wk * nu[j]
                den += wk
        expected[i] = num / den
    assert np.allclose(sm.nu, expected, rtol=1e-13, atol=0)
    # monotone ramp across the step
    mid = slice(n // 2 - half, n // 2 + half)
    assert np.all(np.diff(sm.nu[mid]) >= -1e-12)
    # interior integral preserved
    inner = slice(half, n - half)
    assert np.isclose(sm.nu[inner].sum(), nu[inner].sum(), rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    width=st.floats(min_value=0.0, max_value=400.0),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_smooth_range_preserving(width, seed):
    g = Grid.make(101, 5.0, pml_layers=0)
    rng = np.random.default_rng(seed)
    nu = 1200.0 + 2000.0 * rng.random(101)
    sm = smooth_model(VelocityModel(grid=g, nu=nu), width)
    assert sm.nu.min() >= nu.min() - 1e-9
    assert sm.nu.max() <= nu.max() + 1e-9


def test_coarsen_identity(homog1d):
    assert coarsen_model(homog1d, 1) is homog1d


def test_coarsen_1d_decimation():
    g = Grid.make(401, 5.0, pml_layers=8)
    nu = 1500.0 + np.arange(401.0)
    m = coarsen_model(VelocityModel(grid=g, nu=nu), 4)
    assert m.grid.dims == (101,)
    assert m.grid.spacing == (20.0,)
    assert m.nu[0] == nu[0] and m.nu[-1] == nu[-1]


def test_coarsen_2d_size_reduction():
    g = Grid.make((161, 121), 6.0, pml_layers=8)
    model = VelocityModel(grid=g, nu=np.full((161, 121), 2000.0))
    m = coarsen_model(model, 4)
    # factor-4 decimation per axis: system roughly sixteen times smaller
    assert model.grid.size / m.grid.size > 15.0


def test_coarsen_too_far(homog1d):
    with pytest.raises(ValidationError):
        coarsen_model(homog1d, 250)  # leaves 2 nodes


def test_coarsen_then_prolongate_roundtrip(homog2d):
    from waverom.splitting import prolongate

    rng = np.random.default_rng(5)
    nu = 1500.0 + 500.0 * rng.random(homog2d.grid.dims)
    model = VelocityModel(grid=homog2d.grid, nu=nu)
    coarse = coarsen_model(model, 4)
    back = prolongate(coarse.nu, coarse.grid, model.grid)
    sl = tuple(slice(None, None, 4) for _ in range(2))
    assert np.array_equal(back[sl], coarse.nu)


def test_scenario_validation(homog1d):
    shifts = np.array([1j, 2j])
    with pytest.raises(ValidationError):
        Scenario(
            model=homog1d,
            sources=((5,), (5,)),
            receivers=((5,),),
            shifts=shifts,
            eval_frequencies=shifts,
        )
    with pytest.raises(ValidationError):
        Scenario(
            model=homog1d,
            sources=((5,),),
            receivers=((5,),),
            shifts=np.array([1j, 1j]),
            eval_frequencies=shifts,
        )
    with pytest.raises(ValidationError):
        Scenario(
            model=homog1d,
            sources=((5,),),
            receivers=((5,),),
            shifts=np.array([-1.0 + 0j]),
            eval_frequencies=shifts,
        )
