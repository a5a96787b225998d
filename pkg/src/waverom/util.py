"""Small shared helpers: binary field I/O and a deterministic parallel map."""

import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DimensionError, ValidationError


def write_field_f32(path, values, dims, spacing, origin):
    """Write a real field as flat little-endian float32 plus a JSON sidecar.

    Row-major node order; the sidecar carries {dims, spacing, origin}.
    """
    arr = np.asarray(values, dtype="<f4")
    if arr.size != int(np.prod(dims)):
        raise DimensionError(
            f"field has {arr.size} nodes, dims {tuple(dims)} require {int(np.prod(dims))}"
        )
    arr.ravel(order="C").tofile(path)
    sidecar = {
        "dims": [int(n) for n in dims],
        "spacing": [float(h) for h in spacing],
        "origin": [float(o) for o in origin],
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=1)


def read_field_f32(path, dims=None):
    """Read a flat float32 field; dims from the sidecar unless given."""
    if dims is None:
        meta = read_sidecar(path)
        dims = meta["dims"]
    raw = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(dims))
    if raw.size != expected:
        raise DimensionError(
            f"{path}: payload has {raw.size} float32 values, dims {tuple(dims)} require {expected}"
        )
    return raw.reshape(tuple(dims), order="C").astype(np.float64)


def sidecar_path(path):
    return str(path) + ".json"


def read_sidecar(path):
    with open(sidecar_path(path)) as fh:
        meta = json.load(fh)
    for key in ("dims", "spacing", "origin"):
        if key not in meta:
            raise ValidationError(f"{sidecar_path(path)}: sidecar missing '{key}'")
    return meta


def parallel_map(fn, items, jobs=1):
    """Order-preserving map over items, optionally on a thread pool.

    Results are gathered in input order, so jobs=1 and jobs=k produce
    identical output sequences.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def format_float(x):
    """Shortest round-trip decimal form, for byte-stable CSV output."""
    return repr(float(x))
