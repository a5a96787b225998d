import numpy as np
import pytest

from waverom.model import Grid, Scenario, VelocityModel

NU0 = 2000.0


@pytest.fixture
def grid1d():
    return Grid.make(401, 5.0, pml_layers=8)


@pytest.fixture
def homog1d(grid1d):
    return VelocityModel(grid=grid1d, nu=np.full(grid1d.dims, NU0))


@pytest.fixture
def grid2d():
    return Grid.make((61, 45), 10.0, pml_layers=8)


@pytest.fixture
def homog2d(grid2d):
    return VelocityModel(grid=grid2d, nu=np.full(grid2d.dims, NU0))


def siso_scenario(model, src, shifts):
    shifts = np.asarray(shifts, dtype=np.complex128)
    return Scenario(
        model=model,
        sources=(src,),
        receivers=(src,),
        shifts=shifts,
        eval_frequencies=shifts,
        wavelet=None,
    )
