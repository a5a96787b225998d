import numpy as np
import pytest

from waverom.eikonal import TravelTimeField, solve_eikonal
from waverom.errors import DomainError, ValidationError
from waverom.model import Grid, VelocityModel
from waverom.numerics import bessel_k
from waverom.splitting import (
    dispersion_correct,
    dispersion_gamma,
    prolongate,
    reconstruct,
    reconstruction_error,
    split_field_1d,
    split_field_2d,
)

from conftest import NU0


@pytest.fixture
def setup1d(grid1d, homog1d):
    ttf = solve_eikonal(homog1d, (200,))
    h = grid1d.spacing[0]
    s = 1j * 2 * np.pi * NU0 / (40 * h)
    x = grid1d.axis_coords(0)
    u = np.exp(-s * np.abs(x - 200 * h) / NU0) / (2 * s * NU0)
    return homog1d, ttf, s, u


def test_split_1d_zero_s(setup1d):
    model, ttf, s, u = setup1d
    with pytest.raises(DomainError):
        split_field_1d(u, ttf, model, 0.0)


def test_split_1d_pure_outgoing(setup1d):
    model, ttf, s, u = setup1d
    c = 3.7 - 0.4j
    field = np.exp(-s * ttf.times) * c
    pair = split_field_1d(field, ttf, model, s)
    keep = ~pair.mask
    keep[:2] = keep[-2:] = False
    assert np.abs(pair.c_out[keep] - c).max() < 5e-3 * abs(c)
    assert np.abs(pair.c_in[keep]).max() < 5e-3 * abs(c)


def test_split_1d_green_function(setup1d):
    model, ttf, s, u = setup1d
    pair = split_field_1d(u, ttf, model, s)
    keep = np.ones(u.size, bool)
    keep[198:203] = keep[:2] = keep[-2:] = False
    target = 1 / (2 * s * NU0)
    assert np.abs(pair.c_out[keep] - target).max() < 5e-3 * abs(target)
    assert np.abs(pair.c_in[keep]).max() < 5e-3 * abs(target)


def test_split_1d_reconstruction_exact(setup1d):
    model, ttf, s, u = setup1d
    rng = np.random.default_rng(0)
    field = rng.standard_normal(u.size) + 1j * rng.standard_normal(u.size)
    pair = split_field_1d(field, ttf, model, s)
    rec = reconstruct(pair, ttf, s, 1)
    assert np.abs(rec - field).max() <= 1e-12 * np.abs(field).max()


def test_split_1d_linearity(setup1d):
    model, ttf, s, u = setup1d
    rng = np.random.default_rng(1)
    u2 = rng.standard_normal(u.size) + 1j * rng.standard_normal(u.size)
    a, b = 2.0 - 1j, 0.3 + 0.7j
    p1 = split_field_1d(u, ttf, model, s)
    p2 = split_field_1d(u2, ttf, model, s)
    p3 = split_field_1d(a * u + b * u2, ttf, model, s)
    assert np.allclose(p3.c_out, a * p1.c_out + b * p2.c_out, rtol=1e-12, atol=1e-300)
    assert np.allclose(p3.c_in, a * p1.c_in + b * p2.c_in, rtol=1e-12, atol=1e-300)


def test_split_1d_gauge_condition(setup1d):
    # e^{sT} D c_out + e^{-sT} D c_in = 0 within O(h^2) for a smooth field
    model, ttf, s, u = setup1d
    pair = split_field_1d(u, ttf, model, s)
    h = model.grid.spacing[0]
    n = u.size

    def radial_d(c):
        d = np.gradient(c, h)
        return np.sign(np.arange(n) - 200) * d

    g = np.exp(s * ttf.times) * radial_d(pair.c_out) + np.exp(
        -s * ttf.times
    ) * radial_d(pair.c_in)
    keep = np.ones(n, bool)
    keep[195:206] = keep[:3] = keep[-3:] = False
    scale = np.abs(radial_d(u)).max()
    assert np.abs(g[keep]).max() < 2e-2 * scale


@pytest.fixture
def setup2d():
    grid = Grid.make((81, 61), 10.0, pml_layers=0)
    model = VelocityModel(grid=grid, nu=np.full((81, 61), NU0))
    src = (40, 30)
    X, Z = np.meshgrid(grid.axis_coords(0), grid.axis_coords(1), indexing="ij")
    r = np.hypot(X - 400.0, Z - 300.0)
    ttf = TravelTimeField(
        grid=grid, times=np.maximum(r, 1e-9) / NU0, source=src
    )
    lam = 15 * 10.0
    s = 1j * 2 * np.pi * NU0 / lam
    return model, ttf, s, r


def test_split_2d_requires_imaginary(setup2d):
    model, ttf, s, r = setup2d
    u = np.ones(model.grid.dims, dtype=complex)
    with pytest.raises(DomainError):
        split_field_2d(u, ttf, model, 5.0 + 0j)


def test_split_2d_pure_outgoing(setup2d):
    model, ttf, s, r = setup2d
    c = 1.3 + 0.2j
    u = bessel_k(0, s * ttf.times) * c
    pair = split_field_2d(u, ttf, model, s)
    keep = (~pair.mask) & (r > 50.0) & (r < 250.0)
    assert np.abs(pair.c_out[keep] - c).max() < 0.02 * abs(c)
    assert np.abs(pair.c_in[keep]).max() < 0.02 * abs(c)


def test_split_2d_fd_snapshot_amplitudes(setup2d):
    # FD snapshot of the free-space problem against the analytic oracle
    # K_0(s r / nu) / (2 pi nu^2): c_out ~ 1/(2 pi nu^2) constant, c_in ~ 0.
    from waverom.helmholtz import assemble_operator
    from waverom.numerics import factorize

    grid = Grid.make((81, 61), 10.0, pml_layers=8)
    model = VelocityModel(grid=grid, nu=np.full((81, 61), NU0))
    src = (40, 30)
    s = 1j * 2 * np.pi * NU0 / (15 * 10.0)
    op = assemble_operator(model, s)
    u = op.ext.from_unknown(factorize(op.matrix).solve(-op.source_vector(src)))
    ext_model = op.ext.extend_model(model)
    X, Z = np.meshgrid(
        ext_model.grid.axis_coords(0), ext_model.grid.axis_coords(1), indexing="ij"
    )
    enode = op.ext.ext_node(src)
    sx, sz = ext_model.grid.node_coords(enode)
    r = np.hypot(X - sx, Z - sz)
    ttf = TravelTimeField(
        grid=ext_model.grid, times=np.maximum(r, 1e-9) / NU0, source=enode
    )
    pair = split_field_2d(u, ttf, ext_model, s)
    keep = (~pair.mask) & (r > 40.0) & (r < 140.0)
    target = 1.0 / (2 * np.pi * NU0**2)
    assert np.abs(pair.c_out[keep] - target).max() <= 0.05 * target
    assert np.abs(pair.c_in[keep]).max() <= 0.05 * target


def test_split_2d_reconstruction(setup2d):
    model, ttf, s, r = setup2d
    rng = np.random.default_rng(2)
    u = rng.standard_normal(model.grid.dims) + 1j * rng.standard_normal(
        model.grid.dims
    )
    pair = split_field_2d(u, ttf, model, s)
    assert reconstruction_error(pair, u, ttf, s, 2) <= 1e-10


def test_split_2d_conjugate_shift(setup2d):
    model, ttf, s, r = setup2d
    rng = np.random.default_rng(3)
    u = rng.standard_normal(model.grid.dims) + 1j * rng.standard_normal(
        model.grid.dims
    )
    p = split_field_2d(u, ttf, model, s)
    pc = split_field_2d(np.conj(u), ttf, model, np.conj(s))
    assert np.array_equal(pc.c_out, np.conj(p.c_out))
    assert np.array_equal(pc.c_in, np.conj(p.c_in))


def test_dispersion_correct_consistency(homog1d):
    g = homog1d.grid
    x = g.axis_coords(0)
    ttf = TravelTimeField(grid=g, times=np.abs(x - 1000.0) / NU0, source=(200,))
    h = g.spacing[0]
    omega = 1e-3 * NU0 / h  # omega h / nu = 1e-3
    nup, _ = dispersion_correct(homog1d, ttf, 1j * omega)
    assert np.abs(nup[100] / NU0 - 1.0) <= 1e-6


def test_dispersion_correct_10ppw(homog1d):
    g = homog1d.grid
    h = g.spacing[0]
    x = g.axis_coords(0)
    ttf = TravelTimeField(grid=g, times=np.abs(x - 1000.0) / NU0, source=(200,))
    omega = 2 * np.pi * NU0 / (10 * h)
    nup, flagged = dispersion_correct(homog1d, ttf, 1j * omega)
    w = omega * h / NU0
    expected = omega * h / np.sin(w)
    interior = np.ones(g.dims, bool)
    interior[:2] = interior[-2:] = False
    interior[199:202] = False  # source kink
    assert np.abs(nup[interior] - expected).max() <= 1e-12 * expected
    assert np.isclose(expected / NU0, (np.pi / 5) / np.sin(np.pi / 5))


def test_dispersion_nyquist_flagged(homog1d):
    g = homog1d.grid
    h = g.spacing[0]
    x = g.axis_coords(0)
    ttf = TravelTimeField(grid=g, times=np.abs(x - 1000.0) / NU0, source=(200,))
    omega = np.pi * NU0 / h  # 2 ppw
    nup, flagged = dispersion_correct(homog1d, ttf, 1j * omega)
    assert flagged.sum() > 0.9 * g.dims[0]
    assert np.allclose(nup[flagged], NU0)


def test_dispersion_gamma_matches_grid(homog1d):
    g = homog1d.grid
    h = g.spacing[0]
    x = g.axis_coords(0)
    ttf = TravelTimeField(grid=g, times=np.abs(x - 1000.0) / NU0, source=(200,))
    omega = 2 * np.pi * NU0 / (10 * h)
    gamma, flagged = dispersion_gamma(ttf, homog1d, 1j * omega, h)
    expected = 2 * NU0 * np.arcsin(omega * h / (2 * NU0)) / (omega * h)
    assert abs(gamma[100] - expected) < 1e-10
    assert not flagged[100]


def test_prolongate_exactness():
    gc = Grid.make((11, 9), 40.0, pml_layers=0)
    gf = Grid.make((41, 33), 10.0, pml_layers=0)
    x = gc.axis_coords(0)[:, None]
    z = gc.axis_coords(1)[None, :]
    lin = 2.0 * x + 3.0 * z + 1.0 + 0.0 * (x * z)
    fine = prolongate(lin, gc, gf)
    xf = gf.axis_coords(0)[:, None]
    zf = gf.axis_coords(1)[None, :]
    assert np.abs(fine - (2.0 * xf + 3.0 * zf + 1.0)).max() < 1e-10
    const = prolongate(np.ones(gc.dims), gc, gf)
    assert np.array_equal(const, np.ones(gf.dims))


def test_prolongate_sin_error_bound():
    gc = Grid.make(33, 20.0, pml_layers=0)
    gf = Grid.make(65, 10.0, pml_layers=0)
    L = 32 * 20.0
    xc = gc.axis_coords(0)
    xf = gf.axis_coords(0)
    k = 2 * np.pi / L
    vf = prolongate(np.sin(k * xc), gc, gf)
    err = np.abs(vf - np.sin(k * xf)).max()
    assert err <= (k * 20.0) ** 2 / 8.0


def test_prolongate_non_nested():
    gc = Grid.make(11, 30.0, pml_layers=0)
    gf = Grid.make(41, 10.0, pml_layers=0)
    with pytest.raises(ValidationError):
        prolongate(np.ones(11), gc, gf)
