"""First-arrival travel times by first-order fast marching.

The marching front expands monotonically from the source; the solver
records the acceptance order so causality can be asserted afterwards.
Source initialization seeds the immediate neighbor ring with exact
homogeneous-medium times computed from the wave speed at the source,
which removes most of the well-known point-source error.
"""

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError
from .util import read_field_f32, read_sidecar, write_field_f32

LABEL_PRIMARY = "primary"
LABEL_AUXILIARY = "auxiliary"


@dataclass(frozen=True)
class TravelTimeField:
    """Travel times (s) on grid nodes for one source / phase family."""

    grid: object
    times: np.ndarray = field(repr=False)
    source: tuple = None
    label: str = LABEL_PRIMARY
    accept_order: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.shape != tuple(self.grid.dims):
            raise DimensionError("travel time field does not match grid dims")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValidationError("travel times must be finite and >= 0")
        object.__setattr__(self, "times", t)


def solve_eikonal(model, source):
    """Fast-marching solution of |grad T| = 1/nu from one source node."""
    grid = model.grid
    ndim = grid.ndim
    dims = tuple(grid.dims)
    source = tuple(int(i) for i in source)
    for a, i in enumerate(source):
        if not (0 <= i < dims[a]):
            raise ValidationError(f"source node {source} outside grid")

    slowness = 1.0 / model.nu
    h = grid.spacing
    T = np.full(dims, np.inf)
    KNOWN, TRIAL, FAR = 2, 1, 0
    status = np.zeros(dims, dtype=np.int8)
    order = []
    heap = []
    counter = 0

    def neighbors(node):
        for a in range(ndim):
            for step in (-1, 1):
                j = node[a] + step
                if 0 <= j < dims[a]:
                    yield node[:a] + (j,) + node[a + 1 :]

    def update_value(node):
        # Axis-wise upwind minima, then the largest consistent quadratic root.
        w = slowness[node]
        axis_t = []
        axis_h = []
        for a in range(ndim):
            best = np.inf
            for step in (-1, 1):
                j = node[a] + step
                if 0 <= j < dims[a]:
                    nb = node[:a] + (j,) + node[a + 1 :]
                    if status[nb] == KNOWN and T[nb] < best:
                        best = T[nb]
            if np.isfinite(best):
                axis_t.append(best)
                axis_h.append(h[a])
        if not axis_t:
            return np.inf
        pairs = sorted(zip(axis_t, axis_h))
        while pairs:
            a2 = sum(1.0 / hh**2 for _, hh in pairs)
            b2 = -2.0 * sum(tt / hh**2 for tt, hh in pairs)
            c2 = sum(tt**2 / hh**2 for tt, hh in pairs) - w**2
            disc = b2 * b2 - 4.0 * a2 * c2
            if disc >= 0.0:
                root = (-b2 + disc**0.5) / (2.0 * a2)
                if root >= pairs[-1][0]:
                    return root
            pairs.pop()  # drop the largest upwind time and retry
        return np.inf

    # Exact local-homogeneous times on the source and its neighbor ring.
    nu_src = model.nu[source]
    seeds = [source]
    if ndim == 1:
        ring = [(-1,), (1,)]
    else:
        ring = [
            (dx, dz)
            for dx in (-1, 0, 1)
            for dz in (-1, 0, 1)
            if (dx, dz) != (0, 0)
        ]
    T[source] = 0.0
    for off in ring:
        node = tuple(i + d for i, d in zip(source, off))
        if all(0 <= node[a] < dims[a] for a in range(ndim)):
            dist = np.sqrt(sum((d * h[a]) ** 2 for a, d in enumerate(off)))
            T[node] = dist / nu_src
            seeds.append(node)
    for node in sorted(seeds, key=lambda nd: T[nd]):
        status[node] = KNOWN
        order.append(node)
    for node in seeds:
        for nb in neighbors(node):
            if status[nb] != KNOWN:
                val = update_value(nb)
                if val < T[nb]:
                    T[nb] = val
                    counter += 1
                    heapq.heappush(heap, (val, counter, nb))
                    status[nb] = TRIAL

    while heap:
        val, _, node = heapq.heappop(heap)
        if status[node] == KNOWN:
            continue
        status[node] = KNOWN
        T[node] = val
        order.append(node)
        for nb in neighbors(node):
            if status[nb] == KNOWN:
                continue
            cand = update_value(nb)
            if cand < T[nb]:
                T[nb] = cand
                counter += 1
                heapq.heappush(heap, (cand, counter, nb))
                status[nb] = TRIAL

    if not np.all(np.isfinite(T)):
        raise ValidationError("fast marching left unreachable nodes")
    flat_order = np.array(
        [np.ravel_multi_index(nd, dims) for nd in order], dtype=np.int64
    )
    return TravelTimeField(
        grid=grid,
        times=T,
        source=source,
        label=LABEL_PRIMARY,
        accept_order=flat_order,
    )


def save_travel_times(ttf, path):
    write_field_f32(path, ttf.times, ttf.grid.dims, ttf.grid.spacing, ttf.grid.origin)


def load_auxiliary_times(path, grid=None, source=None):
    """Load a user-supplied travel-time field and label it auxiliary.

    No eikonal residual is checked; negative entries are rejected.
    """
    if grid is None:
        from .model import Grid

        side = read_sidecar(path)
        grid = Grid.make(
            side["dims"], side["spacing"], origin=side["origin"], pml_layers=0
        )
    times = read_field_f32(path, dims=grid.dims)
    if np.any(times < 0):
        raise ValidationError(f"{path}: auxiliary travel times contain negatives")
    return TravelTimeField(
        grid=grid,
        times=times,
        source=tuple(source) if source is not None else None,
        label=LABEL_AUXILIARY,
    )
