"""Incoming/outgoing field decomposition and phase bookkeeping.

A frequency-domain snapshot u(s) is written as

    u = g(s T) c_out + g(-s T) c_in,

with g(z) = exp(-z) in 1D and g(z) = K_0(z) in 2D, and T the travel-time
field of the chosen phase family.  The amplitude formulas below make the
reconstruction identity hold pointwise by algebra, for any discrete
gradient, so it is checked to near machine precision away from the 2D
source mask where K_0/K_1 are singular.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, ValidationError
from .numerics import bessel_k

SOURCE_MASK_RADIUS = 2  # nodes; K_0, K_1 blow up as T -> 0 at the source


@dataclass(frozen=True)
class PhaseFamily:
    """Phase rule g plus the travel-time field it rides on."""

    dimension: int
    travel_time: object
    kind: str = "primary"

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValidationError("dimension must be 1, 2, or 3")
        if self.dimension == 3:
            raise NotImplementedError("3D phase rule g(z)=exp(-z)/z is not implemented")

    def g(self, z):
        if self.dimension == 1:
            return np.exp(-np.asarray(z, dtype=np.complex128))
        return bessel_k(0, z)


@dataclass(frozen=True)
class AmplitudePair:
    """Outgoing/incoming amplitudes extracted from one snapshot."""

    c_out: np.ndarray = field(repr=False)
    c_in: np.ndarray = field(repr=False)
    source_index: int = 0
    shift: complex = 0j
    family: str = "primary"
    mask: np.ndarray = field(repr=False, default=None)


def _central_gradient(u, spacing, axis):
    """Central differences in the interior, one-sided at the ends."""
    u = np.asarray(u)
    g = np.empty_like(u, dtype=np.result_type(u.dtype, np.float64))
    h = spacing[axis]
    sl = [slice(None)] * u.ndim

    def ax(s_):
        out = list(sl)
        out[axis] = s_
        return tuple(out)

    g[ax(slice(1, -1))] = (u[ax(slice(2, None))] - u[ax(slice(0, -2))]) / (2 * h)
    g[ax(0)] = (u[ax(1)] - u[ax(0)]) / h
    g[ax(-1)] = (u[ax(-1)] - u[ax(-2)]) / h
    return g


def split_field_1d(u, ttf, model, s):
    """One-way decomposition of a 1D field along |x - x_S|."""
    s = complex(s)
    if s == 0:
        raise DomainError("splitting undefined at s = 0")
    grid = model.grid
    if grid.ndim != 1:
        raise DimensionError("split_field_1d needs a 1D grid")
    u = np.asarray(u, dtype=np.complex128)
    T = ttf.times
    nu = model.nu
    src = ttf.source[0] if ttf.source is not None else int(np.argmin(T))

    du = _central_gradient(u, grid.spacing, 0)
    direction = np.sign(np.arange(grid.dims[0]) - src)
    du_r = direction * du  # radial derivative, zero at the source node

    pref = nu / (2.0 * s)
    c_out = pref * np.exp(s * T) * (s * u / nu - du_r)
    c_in = pref * np.exp(-s * T) * (s * u / nu + du_r)
    mask = np.zeros(grid.dims, dtype=bool)
    mask[src] = True
    return AmplitudePair(c_out=c_out, c_in=c_in, shift=s, mask=mask)


def source_mask(grid, src, radius=SOURCE_MASK_RADIUS):
    idx = np.indices(grid.dims)
    d2 = sum((idx[a] - src[a]) ** 2 for a in range(grid.ndim))
    return d2 <= radius**2


def _fill_from_ring(values, mask, grid):
    """Overwrite masked nodes with the nearest unmasked value."""
    if not mask.any():
        return values
    out = values.copy()
    free = np.argwhere(~mask)
    free_xy = free * np.asarray(grid.spacing)
    for node in np.argwhere(mask):
        d2 = np.sum((free_xy - node * np.asarray(grid.spacing)) ** 2, axis=1)
        nearest = free[np.argmin(d2)]
        out[tuple(node)] = values[tuple(nearest)]
    return out


def split_field_2d(u, ttf, model, s):
    """One-way decomposition of a 2D field along the travel-time gradient.

    The source node and its neighborhood (radius SOURCE_MASK_RADIUS in
    index space) are masked and refilled from the nearest valid ring,
    since T -> 0 makes the Bessel kernels singular there.
    """
    s = complex(s)
    if s.imag == 0:
        raise DomainError("2D splitting needs Im(s) != 0 (sign factor undefined)")
    grid = model.grid
    if grid.ndim != 2:
        raise DimensionError("split_field_2d needs a 2D grid")
    u = np.asarray(u, dtype=np.complex128)
    T = ttf.times
    nu = model.nu
    src = (
        tuple(ttf.source)
        if ttf.source is not None
        else tuple(np.unravel_index(np.argmin(T), T.shape))
    )

    mask = source_mask(grid, src)
    # Clamp T inside the mask so kernel evaluation stays finite; those
    # values are replaced from the ring below.
    t_free_min = T[~mask].min()
    T_safe = np.where(mask, np.maximum(T, 0.5 * t_free_min), T)

    grad_T = [_central_gradient(T, grid.spacing, a) for a in range(2)]
    grad_u = [_central_gradient(u, grid.spacing, a) for a in range(2)]
    flux = grad_T[0] * grad_u[0] + grad_T[1] * grad_u[1]
    w = (nu**2 / s) * flux

    sgn = 1.0 if s.imag > 0 else -1.0
    amp = (s * T_safe) / (sgn * 1j * np.pi)
    e_plus = np.exp(s * T_safe)
    e_minus = np.exp(-s * T_safe)
    # K(-sT) = e^{sT} kve(-sT), K(sT) = e^{-sT} kve(sT): pair the scaled
    # kernels with the opposite exponentials so nothing overflows.
    c_out = amp * e_plus * (
        bessel_k(1, -s * T_safe, scaled=True) * u
        - bessel_k(0, -s * T_safe, scaled=True) * w
    )
    c_in = amp * e_minus * (
        bessel_k(1, s * T_safe, scaled=True) * u
        + bessel_k(0, s * T_safe, scaled=True) * w
    )
    c_out = _fill_from_ring(c_out, mask, grid)
    c_in = _fill_from_ring(c_in, mask, grid)
    return AmplitudePair(c_out=c_out, c_in=c_in, shift=s, mask=mask)


def reconstruct(pair, ttf, s, dimension):
    """Evaluate g(sT) c_out + g(-sT) c_in for a decomposition."""
    s = complex(s)
    T = ttf.times
    if dimension == 1:
        return np.exp(-s * T) * pair.c_out + np.exp(s * T) * pair.c_in
    mask = pair.mask if pair.mask is not None else np.zeros(T.shape, bool)
    T_safe = np.where(mask, np.maximum(T, max(T[~mask].min() * 0.5, 1e-300)), T)
    term_out = np.exp(-s * T_safe) * bessel_k(0, s * T_safe, scaled=True)
    term_in = np.exp(s * T_safe) * bessel_k(0, -s * T_safe, scaled=True)
    return term_out * pair.c_out + term_in * pair.c_in


def reconstruction_error(pair, u, ttf, s, dimension):
    """Max relative reconstruction mismatch away from the source mask."""
    rec = reconstruct(pair, ttf, s, dimension)
    keep = ~pair.mask if pair.mask is not None else np.ones(u.shape, bool)
    scale = np.abs(np.asarray(u)[keep]).max()
    return float(np.abs((rec - u)[keep]).max() / scale)


def dispersion_correct(model, ttf, s):
    """Effective wave speed seen by central differences of exp(-s T).

    Solves  e^{2sT} sum_a (D_a e^{-sT})^2 = s^2 / nu'^2  for nu' per node,
    with squares taken without conjugation.  For a homogeneous model this
    reduces to nu' = s h / sinh(s h / nu), i.e. omega h / sin(omega h / nu)
    on the imaginary axis.  Nodes where the relation degenerates (local
    Nyquist) are flagged and keep nu.

    Returns (nu_prime, flagged_mask).
    """
    s = complex(s)
    if s == 0:
        raise DomainError("dispersion correction undefined at s = 0")
    grid = model.grid
    T = ttf.times
    rel = np.zeros(grid.dims, dtype=np.complex128)
    for axis in range(grid.ndim):
        h = grid.spacing[axis]
        sl = [slice(None)] * grid.ndim

        def ax(s_):
            out = list(sl)
            out[axis] = s_
            return tuple(out)

        d_plus = np.zeros_like(T)
        d_minus = np.zeros_like(T)
        d_plus[ax(slice(0, -1))] = np.diff(T, axis=axis)
        d_plus[ax(-1)] = d_plus[ax(-2)]
        d_minus[ax(slice(1, None))] = np.diff(T, axis=axis)
        d_minus[ax(0)] = d_minus[ax(1)]
        # e^{sT} D_c e^{-sT} written with local increments only.
        term = (np.exp(-s * d_plus) - np.exp(s * d_minus)) / (2.0 * h)
        rel = rel + term * term

    scale = np.abs(s) / model.nu
    flagged = np.abs(rel) < (1e-8 * scale) ** 2
    nu_prime = np.where(
        flagged, model.nu.astype(np.complex128), s / np.sqrt(np.where(flagged, 1.0, rel))
    )
    # Pick the branch with positive real part (nu' -> nu as h -> 0).
    nu_prime = np.where(nu_prime.real < 0, -nu_prime, nu_prime)
    return nu_prime, flagged


def dispersion_gamma(ttf, model, s, target_spacing):
    """Per-node phase-slowdown factor matching a target grid's stencil.

    Finds gamma >= 0 such that the forward-difference Laplacian of the
    target grid sees exp(-s gamma T) as a wave with the true local
    slowness:  sum_a (4/h_a^2) sin^2(omega gamma p_a h_a / 2) = omega^2/nu^2
    with p_a the central-difference gradient of T.  Where the relation is
    unreachable (beyond the target stencil's resolvable band) gamma = 1 and
    the node is flagged.
    """
    s = complex(s)
    omega = abs(s.imag)
    grid = ttf.grid
    if omega == 0.0:
        return np.ones(grid.dims), np.zeros(grid.dims, dtype=bool)
    T = ttf.times
    grads = [
        np.abs(_central_gradient(T, grid.spacing, a)) for a in range(grid.ndim)
    ]
    hs = np.atleast_1d(target_spacing).astype(float)
    if hs.size == 1:
        hs = np.repeat(hs, grid.ndim)
    target = (omega / model.nu) ** 2

    def lhs(gamma):
        total = np.zeros(grid.dims)
        for a in range(grid.ndim):
            arg = 0.5 * omega * gamma * grads[a] * hs[a]
            total += (4.0 / hs[a] ** 2) * np.sin(arg) ** 2
        return total

    # Bisection cap: largest gamma keeping every axis argument <= pi/2.
    cap = np.full(grid.dims, np.inf)
    for a in range(grid.ndim):
        with np.errstate(divide="ignore"):
            cap = np.minimum(
                cap, np.where(grads[a] > 0, np.pi / (omega * grads[a] * hs[a]), np.inf)
            )
    solvable = np.isfinite(cap) & (lhs(np.where(np.isfinite(cap), cap, 1.0)) >= target)
    flagged = ~solvable

    lo = np.zeros(grid.dims)
    hi = np.where(solvable, np.where(np.isfinite(cap), cap, 1.0), 1.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        too_low = lhs(mid) < target
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    gamma = np.where(solvable, 0.5 * (lo + hi), 1.0)
    return gamma, flagged


def resample_nested(values, grid_from, grid_to):
    """Move a field between nested grids: prolongate, decimate, or copy.

    Decimation picks the coincident nodes (exact); refinement is the
    linear/bilinear prolongation.
    """
    if tuple(grid_from.dims) == tuple(grid_to.dims) and tuple(
        grid_from.spacing
    ) == tuple(grid_to.spacing):
        return np.asarray(values)
    if grid_to.spacing[0] < grid_from.spacing[0]:
        return prolongate(values, grid_from, grid_to)
    values = np.asarray(values)
    slices = []
    for axis in range(grid_from.ndim):
        ratio = grid_to.spacing[axis] / grid_from.spacing[axis]
        f = int(round(ratio))
        if abs(ratio - f) > 1e-9 or f < 1:
            raise ValidationError(f"axis {axis}: non-integer decimation ratio {ratio}")
        if abs(grid_from.origin[axis] - grid_to.origin[axis]) > 1e-9 * grid_from.spacing[axis]:
            raise ValidationError(f"axis {axis}: origins differ, not nested")
        if (grid_to.dims[axis] - 1) * f + 1 != grid_from.dims[axis]:
            raise ValidationError(f"axis {axis}: extents not nested for decimation")
        slices.append(slice(None, None, f))
    return values[tuple(slices)]


def prolongate(values, coarse_grid, fine_grid):
    """Linear/bilinear interpolation from a nested coarse grid.

    Coarse nodes must coincide with fine nodes (equal origin, integer
    spacing ratio, matching extents); coincident nodes are reproduced
    exactly.
    """
    values = np.asarray(values)
    if values.shape != tuple(coarse_grid.dims):
        raise DimensionError("field does not match the coarse grid")
    if coarse_grid.ndim != fine_grid.ndim:
        raise DimensionError("grid dimensionality mismatch")
    out = values
    for axis in range(coarse_grid.ndim):
        hc, hf = coarse_grid.spacing[axis], fine_grid.spacing[axis]
        ratio = hc / hf
        f = int(round(ratio))
        if abs(ratio - f) > 1e-9 or f < 1:
            raise ValidationError(
                f"axis {axis}: spacing ratio {ratio} is not a positive integer"
            )
        if abs(coarse_grid.origin[axis] - fine_grid.origin[axis]) > 1e-9 * hf:
            raise ValidationError(f"axis {axis}: grid origins differ, not nested")
        n_c = coarse_grid.dims[axis]
        n_f = fine_grid.dims[axis]
        if (n_c - 1) * f + 1 != n_f:
            raise ValidationError(
                f"axis {axis}: {n_c} coarse nodes cannot span {n_f} fine nodes at ratio {f}"
            )
        if f == 1:
            continue
        idx_f = np.arange(n_f)
        q, r = np.divmod(idx_f, f)
        q_next = np.minimum(q + 1, n_c - 1)
        lo = np.take(out, q, axis=axis)
        hi = np.take(out, q_next, axis=axis)
        wshape = [1] * out.ndim
        wshape[axis] = n_f
        wt = (r / f).reshape(wshape)
        out = lo * (1.0 - wt) + hi * wt
    return out
