import numpy as np
import pytest

from waverom.errors import DomainError, ValidationError
from waverom.helmholtz import (
    assemble_operator,
    compute_snapshots,
    load_snapshots,
    save_snapshots,
    transfer_function_direct,
)
from waverom.model import Grid, VelocityModel
from waverom.numerics import bessel_k, factorize

from conftest import NU0, siso_scenario


def green1d(x, xs, s, nu):
    return np.exp(-s * np.abs(x - xs) / nu) / (2 * s * nu)


def test_assemble_rejects_negative_re(homog1d):
    with pytest.raises(DomainError):
        assemble_operator(homog1d, -1.0 + 2j)


def test_bilinear_symmetry_exact(homog2d):
    op = assemble_operator(homog2d, 2.0 + 30j)
    d = (op.matrix - op.matrix.T).tocoo()
    assert d.nnz == 0 or np.max(np.abs(d.data)) == 0.0


def test_schwarz_reflection_exact(homog2d):
    s = 1.5 + 40j
    a = assemble_operator(homog2d, s).matrix
    b = assemble_operator(homog2d, np.conj(s)).matrix
    d = (b - a.conj()).tocoo()
    assert d.nnz == 0 or np.max(np.abs(d.data)) == 0.0


def test_real_s_is_positive_definite(homog1d):
    # diffusive limit: real s gives a real SPD matrix (passivity)
    op = assemble_operator(homog1d, 3.0 + 0j)
    A = op.matrix
    assert np.max(np.abs(A.toarray().imag)) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.standard_normal(op.order)
        assert x @ (A @ x) > 0
    factorize(A)  # solve succeeds


def test_1d_green_function_transfer(homog1d):
    # 40 ppw on the imaginary axis
    h = homog1d.grid.spacing[0]
    omega = 2 * np.pi * NU0 / (40 * h)
    s = 1j * omega
    src = (homog1d.grid.dims[0] // 2,)
    sc = siso_scenario(homog1d, src, [s])
    F = transfer_function_direct(sc, homog1d, s)
    expected = -green1d(0.0, 0.0, s, NU0) / NU0**2
    assert abs(F[0, 0] - expected) / abs(expected) < 0.01


def test_transfer_refinement_order(homog1d):
    omega = 2 * np.pi * NU0 / 200.0  # fixed physical frequency
    s = 1j * omega
    errs = []
    for n, h in [(401, 5.0), (801, 2.5), (1601, 1.25)]:
        g = Grid.make(n, h, pml_layers=8)
        m = VelocityModel(grid=g, nu=np.full(n, NU0))
        src = (n // 2,)
        F = transfer_function_direct(siso_scenario(m, src, [s]), m, s)
        expected = -green1d(0.0, 0.0, s, NU0) / NU0**2
        errs.append(abs(F[0, 0] - expected) / abs(expected))
    rate1 = errs[0] / errs[1]
    rate2 = errs[1] / errs[2]
    assert rate1 > 3.0 and rate2 > 3.0  # O(h^2)


def test_pml_decay(homog1d):
    h = homog1d.grid.spacing[0]
    omega = 2 * np.pi * NU0 / (12 * h)  # >= 10 ppw
    op = assemble_operator(homog1d, 1j * omega)
    fact = factorize(op.matrix)
    u = op.ext.from_unknown(fact.solve(-op.source_vector((200,))))
    interior = u[op.ext.interior_slices()]
    assert np.abs(u[0]) <= 1e-3 * np.abs(interior).max()
    assert np.abs(u[-1]) <= 1e-3 * np.abs(interior).max()


def test_2d_green_function(homog2d):
    h = homog2d.grid.spacing[0]
    lam = 15 * h
    s = 1j * 2 * np.pi * NU0 / lam
    src = (30, 22)
    op = assemble_operator(homog2d, s)
    fact = factorize(op.matrix)
    u = op.ext.from_unknown(fact.solve(-op.source_vector(src)))
    ui = u[op.ext.interior_slices()]
    g = homog2d.grid
    X, Z = np.meshgrid(g.axis_coords(0), g.axis_coords(1), indexing="ij")
    r = np.hypot(X - src[0] * h, Z - src[1] * h)
    sel = (r > 3 * h) & (r < 15 * h)
    uex = bessel_k(0, s * r[sel] / NU0) / (2 * np.pi * NU0**2)
    rel = np.abs(ui[sel] - uex) / np.abs(uex)
    assert np.median(rel) < 0.06


def test_reflecting_top_dirichlet():
    g = Grid.make((41, 31), 10.0, pml_layers=8, reflecting_top=True)
    m = VelocityModel(grid=g, nu=np.full((41, 31), NU0))
    op = assemble_operator(m, 1j * 30.0)
    fact = factorize(op.matrix)
    u = op.ext.from_unknown(fact.solve(-op.source_vector((20, 5))))
    ui = u[op.ext.interior_slices()]
    assert np.all(ui[:, 0] == 0.0)


def test_nu_override(homog1d):
    nu2 = np.full(homog1d.grid.dims, 2 * NU0)
    op = assemble_operator(homog1d, 1j * 20.0, nu_override=nu2)
    op2 = assemble_operator(
        VelocityModel(grid=homog1d.grid, nu=nu2), 1j * 20.0
    )
    d = (op.matrix - op2.matrix).tocoo()
    assert d.nnz == 0 or np.max(np.abs(d.data)) == 0.0


def test_snapshots_basic(homog1d):
    h = homog1d.grid.spacing[0]
    om = 2 * np.pi * NU0 / (30 * h)
    sc = siso_scenario(homog1d, (200,), [1j * om])
    snaps = compute_snapshots(sc)
    assert snaps.fields.shape[0] == 1 and snaps.fields.shape[1] == 1
    assert snaps.residuals.max() <= 1e-9


def test_snapshots_block_equals_single(homog1d):
    h = homog1d.grid.spacing[0]
    om = 2 * np.pi * NU0 / (30 * h)
    shifts = [1j * om, 1j * 1.5 * om]
    sc = siso_scenario(homog1d, (150,), shifts).with_sources(((150,), (250,)))
    snaps = compute_snapshots(sc)
    assert snaps.fields.shape[:2] == (2, 2)
    one = compute_snapshots(sc.with_sources(((250,),)))
    assert np.allclose(snaps.fields[:, 1], one.fields[:, 0], atol=0, rtol=1e-12)


def test_snapshots_conjugate_pair(homog1d):
    h = homog1d.grid.spacing[0]
    om = 2 * np.pi * NU0 / (30 * h)
    s = 0.8 + 1j * om
    sc = siso_scenario(homog1d, (200,), [s, np.conj(s)])
    snaps = compute_snapshots(sc)
    d = snaps.fields[1, 0] - np.conj(snaps.fields[0, 0])
    assert np.max(np.abs(d)) <= 1e-12 * np.max(np.abs(snaps.fields[0, 0]))


def test_transfer_reciprocity_2d(homog2d):
    # heterogeneous variant for a non-trivial check
    g = homog2d.grid
    z = g.axis_coords(1)[None, :]
    m = VelocityModel(grid=g, nu=1500.0 + 2.0 * z + 0.0 * homog2d.nu)
    s = 1j * 2 * np.pi * 1500.0 / (15 * g.spacing[0])
    sc = siso_scenario(m, (15, 10), [s]).with_sources(((15, 10), (45, 30)))
    F = transfer_function_direct(sc, m, s)
    assert np.abs(F - F.T).max() <= 1e-10 * np.abs(F).max()


def test_transfer_two_sources_homogeneous(homog1d):
    h = homog1d.grid.spacing[0]
    om = 2 * np.pi * NU0 / (40 * h)
    s = 1j * om
    sc = siso_scenario(homog1d, (150,), [s]).with_sources(((150,), (250,)))
    F = transfer_function_direct(sc, homog1d, s)
    d = 100 * h
    expected = -green1d(d, 0.0, s, NU0) / NU0**2
    assert abs(F[0, 1] - expected) / abs(expected) < 0.02


def test_snapshot_dump_roundtrip(tmp_path, homog1d):
    h = homog1d.grid.spacing[0]
    om = 2 * np.pi * NU0 / (30 * h)
    sc = siso_scenario(homog1d, (200,), [1j * om, 2j * om])
    snaps = compute_snapshots(sc)
    save_snapshots(snaps, tmp_path / "snaps")
    loaded = load_snapshots(tmp_path / "snaps", snaps.ext)
    assert loaded.fields.shape == snaps.fields.shape
    # complex64 dump: relative fidelity limited by single precision
    scale = np.abs(snaps.fields).max()
    assert np.max(np.abs(loaded.fields - snaps.fields)) <= 1e-6 * scale
    assert np.allclose(loaded.shifts, snaps.shifts)
