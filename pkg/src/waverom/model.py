"""Velocity models, grids, and scenario configuration.

Grids are 1D or 2D with constant spacing per axis.  In 2D, axis 0 is the
horizontal coordinate x and axis 1 is depth z, increasing downward; the
"top" face is the low-z face.  All types are treated as immutable after
construction and can be shared freely between threads.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DimensionError, ValidationError
from .util import read_field_f32, read_sidecar, write_field_f32


@dataclass(frozen=True)
class Grid:
    """Regular node grid with per-face boundary closure.

    pml_layers holds one (low, high) pair of layer counts per axis;
    reflecting holds matching booleans.  A face is either absorbing
    (layers > 0) or reflecting, never both.
    """

    dims: tuple
    spacing: tuple
    origin: tuple
    pml_layers: tuple
    reflecting: tuple

    def __post_init__(self):
        ndim = len(self.dims)
        if ndim not in (1, 2):
            raise ValidationError(f"only 1D/2D grids supported, got {ndim} axes")
        if len(self.spacing) != ndim or len(self.origin) != ndim:
            raise DimensionError("dims, spacing, origin must have equal length")
        for n in self.dims:
            if n < 3:
                raise ValidationError(f"grid extent {n} < 3")
        for h in self.spacing:
            if not (h > 0):
                raise ValidationError(f"grid spacing {h} must be positive")
        if len(self.pml_layers) != ndim or len(self.reflecting) != ndim:
            raise DimensionError("pml_layers/reflecting must give one pair per axis")
        for (lo, hi), (rlo, rhi) in zip(self.pml_layers, self.reflecting):
            for layers, refl in ((lo, rlo), (hi, rhi)):
                if layers < 0:
                    raise ValidationError("pml layer count must be >= 0")
                if layers > 0 and refl:
                    raise ValidationError("a face cannot be both PML and reflecting")

    @staticmethod
    def make(dims, spacing, origin=None, pml_layers=8, reflecting_top=False):
        """Build a grid with a uniform PML count and an optional free surface.

        With reflecting_top in 2D, the low-z face becomes a zero-Dirichlet
        free surface and carries no PML.
        """
        dims = tuple(int(n) for n in np.atleast_1d(dims))
        spacing = tuple(float(h) for h in np.atleast_1d(spacing))
        if len(spacing) == 1 and len(dims) > 1:
            spacing = spacing * len(dims)
        if origin is None:
            origin = (0.0,) * len(dims)
        origin = tuple(float(o) for o in np.atleast_1d(origin))
        pml = [[int(pml_layers), int(pml_layers)] for _ in dims]
        refl = [[False, False] for _ in dims]
        if reflecting_top:
            if len(dims) != 2:
                raise ValidationError("reflecting_top applies to 2D grids")
            pml[1][0] = 0
            refl[1][0] = True
        return Grid(
            dims=dims,
            spacing=spacing,
            origin=origin,
            pml_layers=tuple(tuple(p) for p in pml),
            reflecting=tuple(tuple(r) for r in refl),
        )

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def size(self):
        return int(np.prod(self.dims))

    @property
    def reflecting_top(self):
        return self.ndim == 2 and self.reflecting[1][0]

    def axis_coords(self, axis):
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def node_coords(self, node):
        return tuple(
            self.origin[a] + self.spacing[a] * node[a] for a in range(self.ndim)
        )

    def snap(self, coords):
        """Nearest grid node to a physical coordinate tuple."""
        coords = np.atleast_1d(coords)
        if coords.size != self.ndim:
            raise DimensionError(f"expected {self.ndim} coordinates, got {coords.size}")
        node = []
        for a in range(self.ndim):
            idx = int(round((coords[a] - self.origin[a]) / self.spacing[a]))
            node.append(min(max(idx, 0), self.dims[a] - 1))
        return tuple(node)

    def cell_volume(self):
        return float(np.prod(self.spacing))


@dataclass(frozen=True)
class VelocityModel:
    """Wave speed field nu (m/s) on the nodes of a grid."""

    grid: Grid
    nu: np.ndarray = field(repr=False)

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=np.float64)
        if nu.shape != tuple(self.grid.dims):
            raise DimensionError(
                f"nu shape {nu.shape} does not match grid dims {self.grid.dims}"
            )
        if not np.all(np.isfinite(nu)):
            raise ValidationError("wave speed contains non-finite values")
        if np.any(nu <= 0):
            raise ValidationError("wave speed must be positive everywhere")
        object.__setattr__(self, "nu", nu)

    @property
    def grid_spacing(self):
        return self.grid.spacing

    def with_grid(self, grid):
        return VelocityModel(grid=grid, nu=self.nu)


def load_velocity_model(path, meta=None):
    """Load a velocity model from a flat little-endian float32 file.

    meta may be a Grid; by default grid geometry is read from the JSON
    sidecar next to the file (zero PML, no free surface).
    """
    if meta is None:
        side = read_sidecar(path)
        meta = Grid.make(
            side["dims"], side["spacing"], origin=side["origin"], pml_layers=0
        )
    nu = read_field_f32(path, dims=meta.dims)
    return VelocityModel(grid=meta, nu=nu)


def save_velocity_model(model, path):
    write_field_f32(
        path, model.nu, model.grid.dims, model.grid.spacing, model.grid.origin
    )


def smooth_model(model, window_width):
    """Smooth nu per axis with a normalized Hanning kernel of physical width.

    Near the boundary the kernel is renormalized over its valid support, so
    constants are reproduced exactly.  Width 0 returns the model unchanged.
    """
    if window_width < 0:
        raise ValidationError(f"window width {window_width} must be >= 0")
    nu = model.nu
    for axis in range(model.grid.ndim):
        h = model.grid.spacing[axis]
        half = int(np.floor(0.5 * window_width / h))
        if half < 1:
            continue
        offsets = np.arange(-half, half + 1)
        weights = 0.5 * (1.0 + np.cos(2.0 * np.pi * offsets * h / window_width))
        weights /= weights.sum()
        num = convolve1d(nu, weights, axis=axis, mode="constant", cval=0.0)
        den = convolve1d(
            np.ones_like(nu), weights, axis=axis, mode="constant", cval=0.0
        )
        nu = num / den
    return VelocityModel(grid=model.grid, nu=nu)


def coarsen_model(model, factor):
    """Decimate nodes by an integer factor per axis (no anti-alias filter).

    Keeps nodes 0, f, 2f, ... per axis; spacing is multiplied by the factor,
    so kept nodes coincide with fine nodes.  PML layer counts are divided to
    preserve the physical layer depth.
    """
    factors = np.atleast_1d(factor).astype(int)
    if factors.size == 1:
        factors = np.repeat(factors, model.grid.ndim)
    if factors.size != model.grid.ndim:
        raise DimensionError("need one coarsening factor per axis")
    if np.any(factors < 1):
        raise ValidationError("coarsening factor must be >= 1")
    if np.all(factors == 1):
        return model

    slices = tuple(slice(None, None, int(f)) for f in factors)
    nu = model.nu[slices]
    for n in nu.shape:
        if n < 3:
            raise ValidationError(
                f"coarsening by {tuple(factors)} leaves extent {n} < 3 nodes"
            )
    g = model.grid
    pml = tuple(
        tuple(int(np.ceil(layers / f)) if layers > 0 else 0 for layers in pair)
        for pair, f in zip(g.pml_layers, factors)
    )
    grid = Grid(
        dims=tuple(nu.shape),
        spacing=tuple(h * f for h, f in zip(g.spacing, factors)),
        origin=g.origin,
        pml_layers=pml,
        reflecting=g.reflecting,
    )
    return VelocityModel(grid=grid, nu=nu)


@dataclass(frozen=True)
class Scenario:
    """A full simulation configuration: model, arrays, shifts, wavelet."""

    model: VelocityModel
    sources: tuple
    receivers: tuple
    shifts: np.ndarray = field(repr=False)
    eval_frequencies: np.ndarray = field(repr=False)
    wavelet: object = None

    def __post_init__(self):
        sources = tuple(tuple(int(i) for i in s) for s in self.sources)
        receivers = tuple(tuple(int(i) for i in r) for r in self.receivers)
        if len(set(sources)) != len(sources):
            raise ValidationError("source positions must be pairwise distinct")
        ndim = self.model.grid.ndim
        for node in sources + receivers:
            if len(node) != ndim:
                raise DimensionError("source/receiver node arity mismatch")
            for a, i in enumerate(node):
                if not (0 <= i < self.model.grid.dims[a]):
                    raise ValidationError(f"node {node} outside grid")
        shifts = np.asarray(self.shifts, dtype=np.complex128)
        evals = np.asarray(self.eval_frequencies, dtype=np.complex128)
        if np.any(shifts.real < -1e-15) or np.any(evals.real < -1e-15):
            raise ValidationError("all frequencies must satisfy Re(s) >= 0")
        if len(np.unique(shifts)) != shifts.size:
            raise ValidationError("shifts must be pairwise distinct")
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "receivers", receivers)
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "eval_frequencies", evals)

    @property
    def n_sources(self):
        return len(self.sources)

    def with_sources(self, sources, receivers=None):
        return replace(
            self,
            sources=tuple(sources),
            receivers=tuple(receivers if receivers is not None else sources),
        )

    def with_shifts(self, shifts):
        return replace(self, shifts=np.asarray(shifts, dtype=np.complex128))
