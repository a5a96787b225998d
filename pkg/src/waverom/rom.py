"""Reduced-order models from rational Krylov snapshot data.

Two modes:

* standard_rks: project onto the real/imaginary parts of the raw
  snapshots (frequency-independent basis).
* pprks: split snapshots into incoming/outgoing amplitudes per phase
  family, SVD-compress the pooled amplitudes, and rebuild a
  frequency-dependent basis  g(+-s T^[r]) .* c_SVD^j  at every
  evaluation frequency, cross-combining all families with all
  compressed vectors.

Either way the reduced operator R_m(s) = V^T Q(s) V inherits bilinear
symmetry and the Schwarz reflection principle from Q.
"""

import csv
import json
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionError,
    RegularizationError,
    ValidationError,
)
from .eikonal import TravelTimeField, solve_eikonal
from .helmholtz import ExtendedGrid, assemble_operator, compute_snapshots
from .model import Grid, VelocityModel, coarsen_model
from .numerics import bessel_k, factorize, orthonormalize, thin_svd
from .splitting import (
    dispersion_gamma,
    prolongate,
    resample_nested,
    split_field_1d,
    split_field_2d,
)
from .util import format_float, parallel_map

DROP_TOL = 1e-10


@dataclass(frozen=True)
class RealBasis:
    """Orthonormal real columns over the unknown vector of one grid."""

    columns: np.ndarray = field(repr=False)
    ext: ExtendedGrid
    rank: int
    n_raw: int
    provenance: tuple = ()

    def project_residual(self, vec):
        """Relative residual of a (complex) vector against the span."""
        V = self.columns
        r = vec - V @ (V.T @ vec)
        return float(np.linalg.norm(r) / np.linalg.norm(vec))


def build_rks(snapshots, drop_tol=DROP_TOL):
    """Real form of the block rational Krylov subspace of a snapshot set."""
    ext = snapshots.ext
    cols = []
    tags = []
    for j in range(snapshots.n_shifts):
        for l in range(snapshots.n_sources):
            u = ext.to_unknown(snapshots.fields[j, l])
            cols.append(u.real)
            tags.append((j, l, "re"))
            cols.append(u.imag)
            tags.append((j, l, "im"))
    V = np.stack(cols, axis=1)
    Q, rank = orthonormalize(V, drop_tol=drop_tol)
    return RealBasis(
        columns=Q, ext=ext, rank=rank, n_raw=V.shape[1], provenance=tuple(tags)
    )


@dataclass(frozen=True)
class CompressedAmplitudes:
    """Pooled left singular vectors of the pairwise-normalized amplitudes.

    Columns of `vectors` live on the flattened extended coarse grid.  Each
    contributing pair [conj(c_in), c_out] was scaled so its two columns
    carry squared norm 2 together, which makes the squared singular values
    sum to twice the pair count.
    """

    vectors: np.ndarray = field(repr=False)
    singular_values: np.ndarray = field(repr=False)
    m_svd: int
    n_pairs: int
    normalizations: tuple = ()

    @property
    def energy(self):
        return float(np.sum(self.singular_values**2))

    @property
    def expected_energy(self):
        return 2.0 * self.n_pairs


def compress_amplitudes(pairs, m_svd=None, energy_tol=None):
    """Contract, pairwise-normalize, and SVD-truncate amplitude pairs.

    Exactly one of m_svd (kept vector count) or energy_tol (discarded
    squared-singular-value fraction) selects the truncation; with neither,
    everything is kept.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("no amplitude pairs to compress")
    shape = pairs[0].c_out.shape
    cols = []
    norms = []
    for pair in pairs:
        if pair.c_out.shape != shape or pair.c_in.shape != shape:
            raise ValidationError("amplitude pairs live on different grids")
        cin = np.conj(pair.c_in).ravel()
        cout = pair.c_out.ravel()
        scale = np.sqrt(0.5 * (np.linalg.norm(cin) ** 2 + np.linalg.norm(cout) ** 2))
        if scale == 0:
            raise ValidationError("zero amplitude pair cannot be normalized")
        cols.append(cin / scale)
        cols.append(cout / scale)
        norms.append(
            {
                "source": int(pair.source_index),
                "shift": complex(pair.shift),
                "family": pair.family,
                "scale": float(scale),
            }
        )
    M = np.stack(cols, axis=1)
    U, sig = thin_svd(M)
    if m_svd is not None:
        keep = min(int(m_svd), sig.size)
    elif energy_tol is not None:
        total = np.sum(sig**2)
        tail = np.cumsum(sig[::-1] ** 2)[::-1] / total
        keep = int(np.argmax(tail <= energy_tol)) if np.any(tail <= energy_tol) else sig.size
        keep = max(keep, 1)
    else:
        keep = sig.size
    return CompressedAmplitudes(
        vectors=U[:, :keep].copy(),
        singular_values=sig,
        m_svd=keep,
        n_pairs=len(pairs),
        normalizations=tuple(norms),
    )


@dataclass(frozen=True)
class PhaseFamilyEntry:
    """One travel-time field participating in the basis cross-combination.

    ttf lives on the extended construction (base) grid; ttf_split is its
    restriction to the extended coarse grid where snapshots are split.
    Evaluating phases from the base-grid field avoids re-interpolating the
    near-source cone of T, whose kinks would otherwise leak O(omega h^2/r)
    phase error into the basis.
    """

    kind: str
    source_index: object  # int for per-source fields, None for shared ones
    ttf: TravelTimeField
    ttf_split: TravelTimeField = None


@lru_cache(maxsize=8)
def _lattice_source_time(ndim):
    """Effective source time of the discrete delta, in units of h/nu.

    Calibrated once per dimensionality by solving a small homogeneous
    problem and inverting g at the source node; used to clamp travel
    times in phase evaluation so K_0(sT) reproduces the finite peak of
    the discrete Green's function.
    """
    if ndim != 2:
        return 0.0
    nu0, h, n = 2000.0, 10.0, 81
    grid = Grid.make((n, n), h, pml_layers=8)
    model = VelocityModel(grid=grid, nu=np.full((n, n), nu0))
    s = 1j * 2 * np.pi * nu0 / (12 * h)  # 12 ppw reference
    op = assemble_operator(model, s)
    fact = factorize(op.matrix)
    src = (n // 2, n // 2)
    u = op.ext.from_unknown(fact.solve(-op.source_vector(src)))
    target = 2 * np.pi * nu0**2 * u[op.ext.ext_node(src)]
    z = s * 0.5 * h / nu0  # Newton start: half a cell
    for _ in range(60):
        f = bessel_k(0, z) - target
        z = z + f / bessel_k(1, z)
    t_eff = (z / s).real
    if not (0.05 * h / nu0 < t_eff < 2.0 * h / nu0):
        t_eff = 0.5 * h / nu0
    return float(t_eff * nu0 / h)


class ReducedModel:
    """Evaluable reduced model: amplitudes + phase recipe + projection data."""

    def __init__(
        self,
        mode,
        coarse_model,
        coarse_ext,
        source_coords,
        shifts,
        families=(),
        amplitudes=None,
        standard_basis=None,
        wavelet=None,
        apply_dispersion=True,
        drop_tol=DROP_TOL,
        receiver_coords=None,
    ):
        if mode not in ("pprks", "standard_rks"):
            raise ValidationError(f"unknown ROM mode '{mode}'")
        self.mode = mode
        self.coarse_model = coarse_model
        self.coarse_ext = coarse_ext
        self.base_ext = None  # set when families live on a finer build grid
        self.source_coords = tuple(tuple(float(c) for c in sc) for sc in source_coords)
        self.receiver_coords = (
            self.source_coords
            if receiver_coords is None
            else tuple(tuple(float(c) for c in rc) for rc in receiver_coords)
        )
        self.shifts = np.asarray(shifts, dtype=np.complex128)
        self.families = tuple(families)
        self.amplitudes = amplitudes
        self.standard_basis = standard_basis
        self.wavelet = wavelet
        self.apply_dispersion = bool(apply_dispersion)
        self.drop_tol = drop_tol
        self._target_cache = {}

    @property
    def n_sources(self):
        return len(self.source_coords)

    def source_nodes(self, grid):
        return tuple(grid.snap(c) for c in self.source_coords)

    def receiver_nodes(self, grid):
        return tuple(grid.snap(c) for c in self.receiver_coords)

    def _target_data(self, target_model):
        key = target_model.grid
        cached = self._target_cache.get(key)
        if cached is not None:
            return cached
        ext_t = ExtendedGrid.wrap(target_model.grid)
        ext_model_t = ext_t.extend_model(target_model)
        data = {"ext": ext_t, "ext_model": ext_model_t}
        if self.mode == "pprks":
            cgrid = self.coarse_ext.as_grid()
            tgrid = ext_t.as_grid()
            bgrid = (self.base_ext or self.coarse_ext).as_grid()
            same = cgrid.dims == tgrid.dims and cgrid.spacing == tgrid.spacing
            amps = []
            for j in range(self.amplitudes.m_svd):
                col = self.amplitudes.vectors[:, j].reshape(self.coarse_ext.ext_dims)
                amps.append(col if same else prolongate(col, cgrid, tgrid))
            data["amp_fields"] = amps
            fam_fields = []
            c0 = _lattice_source_time(target_model.grid.ndim)
            for entry in self.families:
                Tt = resample_nested(entry.ttf.times, bgrid, tgrid)
                ttf_t = TravelTimeField(
                    grid=tgrid,
                    times=np.maximum(Tt, 0.0),
                    source=None,
                    label=entry.ttf.label,
                )
                floor = 0.0
                if target_model.grid.ndim == 2:
                    at_min = np.unravel_index(np.argmin(Tt), Tt.shape)
                    nu_loc = ext_model_t.nu[at_min]
                    floor = c0 * min(target_model.grid.spacing) / nu_loc
                fam_fields.append((entry, ttf_t, floor))
            data["families"] = fam_fields
        else:
            V = self.standard_basis
            cgrid = V.ext.as_grid()
            tgrid = ext_t.as_grid()
            if cgrid.dims == tgrid.dims and cgrid.spacing == tgrid.spacing:
                data["basis"] = V.columns
            else:
                cols = []
                for j in range(V.rank):
                    f = V.ext.from_unknown(V.columns[:, j])
                    cols.append(ext_t.to_unknown(prolongate(f, cgrid, tgrid)))
                Q, rank = orthonormalize(np.stack(cols, axis=1), self.drop_tol)
                data["basis"] = Q
        self._target_cache[key] = data
        return data

    def basis_at(self, s, target_model):
        return assemble_pprks_basis(self, s, target_model)


def assemble_pprks_basis(rm, s, target_model):
    """Frequency-dependent real basis on the target grid at frequency s.

    Forms g(s T^[r]) .* c_SVD^j for every phase family r and compressed
    vector j (plus the conjugate products when Re(s) != 0; for purely
    imaginary s they span the same real space and are omitted), then
    orthonormalizes with rank drop.  Phase arguments carry the
    grid-dispersion slowdown factor when enabled.
    """
    s = complex(s)
    if s.real < 0:
        raise ValidationError("basis assembly needs Re(s) >= 0")
    data = rm._target_data(target_model)
    if rm.mode != "pprks":
        return RealBasis(
            columns=data["basis"],
            ext=data["ext"],
            rank=data["basis"].shape[1],
            n_raw=data["basis"].shape[1],
        )
    ext_t = data["ext"]
    ext_model_t = data["ext_model"]
    ndim = target_model.grid.ndim
    free = ~ext_t.dirichlet_mask
    cols = []
    for entry, ttf_t, floor in data["families"]:
        T = ttf_t.times
        if rm.apply_dispersion and s.imag != 0:
            gamma, _ = dispersion_gamma(
                ttf_t, ext_model_t, s, target_model.grid.spacing
            )
            T = gamma * T
        T_used = np.maximum(T, floor) if floor > 0 else T
        if ndim == 1:
            g_plus = np.exp(-s * T_used)
        else:
            g_plus = bessel_k(0, s * np.maximum(T_used, 1e-300))
        g_plus = g_plus[free]
        g_minus = None
        if s.real != 0:
            if ndim == 1:
                g_minus = np.exp(s * T_used)
            else:
                g_minus = bessel_k(0, -s * np.maximum(T_used, 1e-300))
            g_minus = g_minus[free]
        for amp in data["amp_fields"]:
            v = g_plus * amp[free]
            cols.append(v.real)
            cols.append(v.imag)
            if g_minus is not None:
                w = g_minus * np.conj(amp[free])
                cols.append(w.real)
                cols.append(w.imag)
    raw = np.stack(cols, axis=1)
    Q, rank = orthonormalize(raw, drop_tol=rm.drop_tol)
    return RealBasis(columns=Q, ext=ext_t, rank=rank, n_raw=raw.shape[1])


@dataclass(frozen=True)
class GalerkinResult:
    reduced_operator: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    transfer: np.ndarray = field(repr=False)


def galerkin_solve(op, basis, B, B_receivers=None):
    """Project Q(s) on a real basis and solve for the transfer matrix.

    R_m = V^T Q V,  coefficients = -R_m^{-1} V^T B,  F_m = vol * B_r^T V coeffs
    (delta columns are real, so B^H = B^T; the cell-volume factor matches
    transfer_function_direct so values are comparable across grids).
    B_receivers defaults to the source block (coinciding arrays).  A
    numerically singular R_m raises RegularizationError carrying its
    smallest singular value.
    """
    V = basis.columns if isinstance(basis, RealBasis) else np.asarray(basis)
    if V.shape[0] != op.matrix.shape[0]:
        raise DimensionError("basis does not match operator order")
    if V.shape[1] == 0:
        raise RegularizationError("empty basis", smallest_singular_value=0.0)
    QV = op.matrix @ V
    # contiguous real/imag copies keep the fat products on the BLAS path
    # (a strided .real view would fall back to a slow kernel)
    R = V.T @ np.ascontiguousarray(QV.real) + 1j * (
        V.T @ np.ascontiguousarray(QV.imag)
    )
    rhs = V.T @ np.ascontiguousarray(B.real) + 1j * (
        V.T @ np.ascontiguousarray(B.imag)
    )
    try:
        z = np.linalg.solve(R, -rhs)
    except np.linalg.LinAlgError as exc:
        sig = np.linalg.svd(R, compute_uv=False)
        raise RegularizationError(
            f"reduced operator singular: {exc}",
            smallest_singular_value=float(sig[-1]),
        ) from exc
    resid = np.linalg.norm(R @ z + rhs) / max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(resid) or resid > 1e-6:
        sig = np.linalg.svd(R, compute_uv=False)
        raise RegularizationError(
            f"reduced solve residual {resid:.2e}; basis redundant after rank drop",
            smallest_singular_value=float(sig[-1]),
        )
    B_rec = B if B_receivers is None else B_receivers
    F = op.grid.cell_volume() * ((B_rec.T @ V) @ z)
    return GalerkinResult(reduced_operator=R, coefficients=z, transfer=F)


@dataclass(frozen=True)
class TransferSamples:
    """Transfer matrices over a frequency sweep (NaN rows mark failures)."""

    frequencies: np.ndarray
    values: np.ndarray = field(repr=False)
    errors: tuple = ()

    @property
    def omegas(self):
        return self.frequencies.imag

    def entry(self, i, j):
        return self.values[:, i, j]


def evaluate_rom(rm, frequencies, target_model, jobs=1, source_width=0.0):
    """Evaluate the ROM transfer function over a frequency sweep.

    Per frequency: assemble the target operator, assemble the basis at s,
    Galerkin-project.  Failures are recorded per frequency and the sweep
    continues.  The map is order-preserving, so the parallelism degree
    does not change the artifact.
    """
    frequencies = np.asarray(frequencies, dtype=np.complex128)
    nodes = rm.source_nodes(target_model.grid)
    rec_nodes = rm.receiver_nodes(target_model.grid)

    def one(s):
        try:
            op = assemble_operator(target_model, s)
            basis = assemble_pprks_basis(rm, s, target_model)
            B = op.source_block(nodes, width=source_width)
            B_rec = (
                B
                if rec_nodes == nodes
                else op.source_block(rec_nodes, width=source_width)
            )
            res = galerkin_solve(op, basis, B, B_receivers=B_rec)
            return res.transfer, None
        except Exception as exc:  # per-frequency failures recorded
            return None, f"s={s}: {exc}"

    out = parallel_map(one, frequencies, jobs=jobs)
    n = rm.n_sources
    values = np.full((len(frequencies), len(rec_nodes), n), np.nan + 0j)
    errors = []
    for k, (F, err) in enumerate(out):
        if F is not None:
            values[k] = F
        else:
            errors.append((complex(frequencies[k]), err))
    return TransferSamples(
        frequencies=frequencies, values=values, errors=tuple(errors)
    )


def hermite_check(rm, target_model, shift, rel_step=1e-4, direct_transfer=None):
    """Verify value + first-derivative interpolation at one shift.

    Central finite differences (step rel_step*|shift|) of the reduced and
    full transfer functions are compared entrywise; returns a dict with
    relative value and derivative mismatches.
    """
    from types import SimpleNamespace

    from .helmholtz import transfer_function_direct

    s0 = complex(shift)
    # Step along the imaginary axis: the transfer function is analytic, so
    # the derivative is direction-independent, and this keeps Re(s) >= 0.
    h = 1j * rel_step * abs(s0)
    nodes = rm.source_nodes(target_model.grid)
    pairs = SimpleNamespace(sources=nodes, receivers=nodes)

    def f_direct(s):
        return transfer_function_direct(pairs, target_model, s)

    def f_rom(s):
        op = assemble_operator(target_model, s)
        basis = assemble_pprks_basis(rm, s, target_model)
        return galerkin_solve(op, basis, op.source_block(nodes)).transfer

    F0d, F0m = f_direct(s0), f_rom(s0)
    dFd = (f_direct(s0 + h) - f_direct(s0 - h)) / (2 * h)
    dFm = (f_rom(s0 + h) - f_rom(s0 - h)) / (2 * h)
    val_err = np.max(np.abs(F0m - F0d)) / np.max(np.abs(F0d))
    der_err = np.max(np.abs(dFm - dFd)) / np.max(np.abs(dFd))
    at_shift = any(
        abs(s0 - sj) <= 1e-12 * abs(sj) or abs(s0 - np.conj(sj)) <= 1e-12 * abs(sj)
        for sj in rm.shifts
    )
    return {
        "shift": s0,
        "fd_step": abs(h),
        "value_rel_err": float(val_err),
        "derivative_rel_err": float(der_err),
        "at_interpolation_point": at_shift,
        "note": "" if at_shift else "between interpolation points: no match expected",
    }


def build_reduced_model(
    scenario,
    mode="pprks",
    coarsen=1,
    m_svd=None,
    energy_tol=None,
    aux_times=(),
    apply_dispersion=True,
    jobs=1,
    snapshots=None,
    keep_snapshots=False,
):
    """Full construction stage: snapshots -> (split -> compress) -> model.

    aux_times entries are TravelTimeField objects on the coarse interior
    grid (label auxiliary); each splits every source's snapshots and joins
    the basis cross-combination as its own phase family.
    """
    from .model import Scenario

    base = scenario.model
    coarse = coarsen_model(base, coarsen) if coarsen != 1 else base
    cgrid = coarse.grid
    src_coords = tuple(base.grid.node_coords(nd) for nd in scenario.sources)
    csources = tuple(cgrid.snap(c) for c in src_coords)
    if len(set(csources)) != len(csources):
        raise ValidationError("sources collide after coarsening; move them apart")
    cscenario = Scenario(
        model=coarse,
        sources=csources,
        receivers=csources,
        shifts=scenario.shifts,
        eval_frequencies=scenario.eval_frequencies,
        wavelet=scenario.wavelet,
    )
    if snapshots is None:
        snapshots = compute_snapshots(cscenario, jobs=jobs)
    ext = snapshots.ext
    ext_model = ext.extend_model(coarse)
    ext_base = ExtendedGrid.wrap(base.grid)
    ext_model_base = ext_base.extend_model(base)

    rec_coords = tuple(base.grid.node_coords(nd) for nd in scenario.receivers)
    if mode == "standard_rks":
        basis = build_rks(snapshots)
        rm = ReducedModel(
            mode=mode,
            coarse_model=coarse,
            coarse_ext=ext,
            source_coords=src_coords,
            shifts=scenario.shifts,
            standard_basis=basis,
            wavelet=scenario.wavelet,
            apply_dispersion=False,
            receiver_coords=rec_coords,
        )
        if keep_snapshots:
            rm.snapshots = snapshots
        return rm

    # Travel times are solved on the (finer) construction grid and
    # restricted to the coarse grid for splitting: coincident nodes agree
    # exactly, so phase bookkeeping cancels between the two stages.
    bgrid_ext = ext_base.as_grid()
    cgrid_ext = ext.as_grid()
    families = []
    for r, node in enumerate(scenario.sources):
        ttf_base = solve_eikonal(ext_model_base, ext_base.ext_node(node))
        ttf_split = TravelTimeField(
            grid=cgrid_ext,
            times=resample_nested(ttf_base.times, bgrid_ext, cgrid_ext),
            source=ext.ext_node(csources[r]),
            label=ttf_base.label,
        )
        families.append(
            PhaseFamilyEntry(
                kind="primary", source_index=r, ttf=ttf_base, ttf_split=ttf_split
            )
        )
    aux_entries = []
    for k, aux in enumerate(aux_times):
        ttf_ext = _extend_travel_times(aux, ext, ext_model)
        ttf_base_aux = TravelTimeField(
            grid=bgrid_ext,
            times=resample_nested(ttf_ext.times, cgrid_ext, bgrid_ext),
            source=None,
            label=ttf_ext.label,
        )
        aux_entries.append(
            PhaseFamilyEntry(
                kind=f"auxiliary{k}",
                source_index=None,
                ttf=ttf_base_aux,
                ttf_split=ttf_ext,
            )
        )

    split = split_field_1d if cgrid.ndim == 1 else split_field_2d
    # With dispersion correction on, each snapshot is split against the
    # grid-slowdown-corrected phase of its own shift, so the extracted
    # amplitudes stay smooth even where the coarse grid is only a few
    # points per wavelength; basis evaluation applies the matching factor.
    gamma_cache = {}

    def phase_field(entry, s_j):
        base_field = entry.ttf_split if entry.ttf_split is not None else entry.ttf
        if not apply_dispersion or s_j.imag == 0:
            return base_field
        key = (id(entry), complex(s_j))
        if key not in gamma_cache:
            gam, _ = dispersion_gamma(base_field, ext_model, s_j, cgrid.spacing)
            gamma_cache[key] = TravelTimeField(
                grid=base_field.grid,
                times=gam * base_field.times,
                source=base_field.source,
                label=base_field.label,
            )
        return gamma_cache[key]

    pairs = []
    for j in range(snapshots.n_shifts):
        for l in range(snapshots.n_sources):
            u = snapshots.fields[j, l]
            fams = [families[l]] + aux_entries
            for entry in fams:
                pair = split(
                    u, phase_field(entry, snapshots.shifts[j]), ext_model,
                    snapshots.shifts[j],
                )
                pairs.append(
                    type(pair)(
                        c_out=pair.c_out,
                        c_in=pair.c_in,
                        source_index=l,
                        shift=pair.shift,
                        family=entry.kind,
                        mask=pair.mask,
                    )
                )
    amplitudes = compress_amplitudes(pairs, m_svd=m_svd, energy_tol=energy_tol)
    rm = ReducedModel(
        mode="pprks",
        coarse_model=coarse,
        coarse_ext=ext,
        source_coords=src_coords,
        shifts=scenario.shifts,
        families=tuple(families) + tuple(aux_entries),
        amplitudes=amplitudes,
        wavelet=scenario.wavelet,
        apply_dispersion=apply_dispersion,
        receiver_coords=rec_coords,
    )
    rm.base_ext = ext_base
    if keep_snapshots:
        rm.snapshots = snapshots
        rm.amplitude_pairs = pairs
    return rm


def _extend_travel_times(ttf, ext, ext_model):
    """Pad an interior travel-time field into the PML collar.

    Values continue outward monotonically with the local slowness, which
    keeps the phase factor decaying the way the stretched field does.
    """
    if ttf.times.shape == ext.ext_dims:
        return TravelTimeField(
            grid=ext.as_grid(), times=ttf.times, source=None, label=ttf.label
        )
    if ttf.times.shape != tuple(ext.base.dims):
        raise DimensionError("auxiliary times match neither interior nor extended grid")
    T = np.pad(ttf.times, ext.pad, mode="edge")
    for axis in range(ext.ndim):
        h = ext.base.spacing[axis]
        lo, hi = ext.pad[axis]
        n_ext = ext.ext_dims[axis]
        idx = np.arange(n_ext)
        dist = np.zeros(n_ext)
        if lo:
            dist[:lo] = (lo - idx[:lo]) * h
        if hi:
            dist[n_ext - hi :] = (idx[n_ext - hi :] - (n_ext - 1 - hi)) * h
        shape = [1] * ext.ndim
        shape[axis] = n_ext
        T = T + dist.reshape(shape) / ext_model.nu
    return TravelTimeField(grid=ext.as_grid(), times=T, source=None, label=ttf.label)


def save_transfer_csv(samples, path):
    """CSV rows (omega_rad_per_s, source, receiver, re_f, im_f)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega_rad_per_s", "source", "receiver", "re_f", "im_f"])
        for k, s in enumerate(samples.frequencies):
            n = samples.values.shape[1]
            for i in range(n):
                for j in range(n):
                    v = samples.values[k, i, j]
                    writer.writerow(
                        [
                            format_float(s.imag),
                            i,
                            j,
                            format_float(v.real),
                            format_float(v.imag),
                        ]
                    )


def load_transfer_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append(row)
    omegas = sorted({float(r["omega_rad_per_s"]) for r in rows})
    n = max(int(r["source"]) for r in rows) + 1
    values = np.zeros((len(omegas), n, n), dtype=np.complex128)
    om_index = {w: k for k, w in enumerate(omegas)}
    for r in rows:
        k = om_index[float(r["omega_rad_per_s"])]
        values[k, int(r["source"]), int(r["receiver"])] = complex(
            float(r["re_f"]), float(r["im_f"])
        )
    freqs = 1j * np.asarray(omegas)
    return TransferSamples(frequencies=freqs, values=values)


def save_rom(rm, directory):
    """Serialize a ReducedModel: JSON manifest plus .npy binary blocks."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "mode": rm.mode,
        "source_coords": [list(c) for c in rm.source_coords],
        "receiver_coords": [list(c) for c in rm.receiver_coords],
        "apply_dispersion": rm.apply_dispersion,
        "drop_tol": rm.drop_tol,
        "grid": {
            "dims": list(rm.coarse_model.grid.dims),
            "spacing": list(rm.coarse_model.grid.spacing),
            "origin": list(rm.coarse_model.grid.origin),
            "pml_layers": [list(p) for p in rm.coarse_model.grid.pml_layers],
            "reflecting": [list(r) for r in rm.coarse_model.grid.reflecting],
        },
        "base_grid": None
        if rm.base_ext is None
        else {
            "dims": list(rm.base_ext.base.dims),
            "spacing": list(rm.base_ext.base.spacing),
            "origin": list(rm.base_ext.base.origin),
            "pml_layers": [list(p) for p in rm.base_ext.base.pml_layers],
            "reflecting": [list(r) for r in rm.base_ext.base.reflecting],
        },
        "wavelet": None
        if rm.wavelet is None
        else {
            "kind": rm.wavelet.kind,
            "omega_peak": rm.wavelet.omega_peak,
            "t0": rm.wavelet.t0,
        },
        "families": [
            {"kind": e.kind, "source_index": e.source_index, "label": e.ttf.label}
            for e in rm.families
        ],
    }
    np.save(os.path.join(directory, "shifts.npy"), rm.shifts)
    np.save(os.path.join(directory, "nu_coarse.npy"), rm.coarse_model.nu)
    if rm.mode == "pprks":
        np.save(os.path.join(directory, "amp_vectors.npy"), rm.amplitudes.vectors)
        np.save(
            os.path.join(directory, "singular_values.npy"),
            rm.amplitudes.singular_values,
        )
        manifest["m_svd"] = rm.amplitudes.m_svd
        manifest["n_pairs"] = rm.amplitudes.n_pairs
        for k, e in enumerate(rm.families):
            np.save(os.path.join(directory, f"family_{k:03d}.npy"), e.ttf.times)
    else:
        np.save(os.path.join(directory, "basis.npy"), rm.standard_basis.columns)
    with open(os.path.join(directory, "rom.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_rom(directory):
    from .timedomain import Wavelet

    with open(os.path.join(directory, "rom.json")) as fh:
        manifest = json.load(fh)
    g = manifest["grid"]
    grid = Grid(
        dims=tuple(g["dims"]),
        spacing=tuple(g["spacing"]),
        origin=tuple(g["origin"]),
        pml_layers=tuple(tuple(p) for p in g["pml_layers"]),
        reflecting=tuple(tuple(bool(b) for b in r) for r in g["reflecting"]),
    )
    coarse = VelocityModel(
        grid=grid, nu=np.load(os.path.join(directory, "nu_coarse.npy"))
    )
    ext = ExtendedGrid.wrap(grid)
    shifts = np.load(os.path.join(directory, "shifts.npy"))
    wav = manifest.get("wavelet")
    wavelet = None if wav is None else Wavelet(**wav)
    if manifest["mode"] == "pprks":
        vectors = np.load(os.path.join(directory, "amp_vectors.npy"))
        sing = np.load(os.path.join(directory, "singular_values.npy"))
        amplitudes = CompressedAmplitudes(
            vectors=vectors,
            singular_values=sing,
            m_svd=int(manifest["m_svd"]),
            n_pairs=int(manifest["n_pairs"]),
        )
        bg = manifest.get("base_grid")
        base_ext = None
        if bg is not None:
            base_grid = Grid(
                dims=tuple(bg["dims"]),
                spacing=tuple(bg["spacing"]),
                origin=tuple(bg["origin"]),
                pml_layers=tuple(tuple(p) for p in bg["pml_layers"]),
                reflecting=tuple(tuple(bool(b) for b in r) for r in bg["reflecting"]),
            )
            base_ext = ExtendedGrid.wrap(base_grid)
        fam_grid = (base_ext or ext).as_grid()
        cgrid_ext = ext.as_grid()
        families = []
        for k, fam in enumerate(manifest["families"]):
            times = np.load(os.path.join(directory, f"family_{k:03d}.npy"))
            ttf = TravelTimeField(
                grid=fam_grid, times=times, source=None, label=fam["label"]
            )
            from .splitting import resample_nested as _rs

            ttf_split = TravelTimeField(
                grid=cgrid_ext,
                times=_rs(times, fam_grid, cgrid_ext),
                source=None,
                label=fam["label"],
            )
            families.append(
                PhaseFamilyEntry(
                    kind=fam["kind"],
                    source_index=fam["source_index"],
                    ttf=ttf,
                    ttf_split=ttf_split,
                )
            )
        loaded = ReducedModel(
            mode="pprks",
            coarse_model=coarse,
            coarse_ext=ext,
            source_coords=[tuple(c) for c in manifest["source_coords"]],
            shifts=shifts,
            families=families,
            amplitudes=amplitudes,
            wavelet=wavelet,
            apply_dispersion=manifest["apply_dispersion"],
            drop_tol=manifest["drop_tol"],
            receiver_coords=[tuple(c) for c in manifest.get("receiver_coords", manifest["source_coords"])],
        )
        loaded.base_ext = base_ext
        return loaded
    cols = np.load(os.path.join(directory, "basis.npy"))
    basis = RealBasis(columns=cols, ext=ext, rank=cols.shape[1], n_raw=cols.shape[1])
    return ReducedModel(
        mode="standard_rks",
        coarse_model=coarse,
        coarse_ext=ext,
        source_coords=[tuple(c) for c in manifest["source_coords"]],
        shifts=shifts,
        standard_basis=basis,
        wavelet=wavelet,
        apply_dispersion=False,
        drop_tol=manifest["drop_tol"],
        receiver_coords=[tuple(c) for c in manifest.get("receiver_coords", manifest["source_coords"])],
    )
