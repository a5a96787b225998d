"""Bundled test scenarios and scenario configuration files.

Scenario configs are TOML: model/grid, source-receiver arrays, shift
placement, wavelet, and evaluation sweep.  The bundled velocity profiles
are analytic functions of position, so the same physical medium can be
sampled on any grid (construction, projection, and reference grids see
one model).
"""

import os
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .eikonal import TravelTimeField, save_travel_times
from .errors import ValidationError
from .model import Grid, Scenario, VelocityModel, load_velocity_model
from .timedomain import Wavelet
from .util import ensure_dir, write_field_f32

BUNDLED = ("homog1d", "layers1d", "smooth2d", "rough2d", "cavity2d")


def _tanh_step(z, depth, width):
    return 0.5 * (1.0 + np.tanh((z - depth) / (0.25 * width)))


def profile_homog1d(x):
    return np.full_like(np.asarray(x, dtype=float), 2000.0)


LAYERS1D_INTERFACES = (400.0, 900.0, 1400.0)
LAYERS1D_SPEEDS = (1600.0, 2200.0, 1800.0, 2600.0)


def profile_layers1d(x):
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(LAYERS1D_INTERFACES, x, side="right")
    return np.asarray(LAYERS1D_SPEEDS)[idx]


def profile_smooth2d(x, z):
    """Smooth layered section with a mild lateral gradient."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nu = 1500.0 * np.ones(np.broadcast_shapes(x.shape, z.shape))
    for depth, jump in ((170.0, 420.0), (360.0, 520.0), (550.0, 580.0)):
        nu = nu + jump * _tanh_step(z, depth, 320.0)
    nu = nu + 120.0 * (x / 1000.0) * (0.4 + 0.6 * _tanh_step(z, 280.0, 400.0))
    return nu


def profile_rough2d(x, z):
    """Unsmoothed variant: hard layer jumps, same gross structure."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nu = 1500.0 * np.ones(np.broadcast_shapes(x.shape, z.shape))
    for depth, jump in ((170.0, 420.0), (360.0, 520.0), (550.0, 580.0)):
        nu = nu + jump * (z >= depth)
    nu = nu + 120.0 * (x / 1000.0)
    return nu


CAVITY_X = 480.0
CAVITY_HALF_WIDTH = 36.0
CAVITY_TOP = 60.0
CAVITY_BOTTOM = 420.0
CAVITY_SPEED = 700.0


def profile_cavity2d(x, z):
    """Slow vertical channel embedded in a smooth background."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nu = 1800.0 + 1.1 * z + 0.0 * x
    inside = (
        (np.abs(x - CAVITY_X) <= CAVITY_HALF_WIDTH)
        & (z >= CAVITY_TOP)
        & (z <= CAVITY_BOTTOM)
    )
    return np.where(inside, CAVITY_SPEED, nu)


def cavity_channel_times(grid):
    """Synthetic along-channel travel time for the cavity scenario.

    Integrates the channel slowness along the channel axis from the
    channel mouth and continues outward with the background slowness;
    deliberately not a first-arrival field.
    """
    x = grid.axis_coords(0)[:, None]
    z = grid.axis_coords(1)[None, :]
    nu_bg = 1800.0 + 1.1 * z + 0.0 * x
    along = np.where(
        z < CAVITY_TOP,
        (CAVITY_TOP - z) / nu_bg,
        np.where(
            z <= CAVITY_BOTTOM,
            (z - CAVITY_TOP) / CAVITY_SPEED,
            (CAVITY_BOTTOM - CAVITY_TOP) / CAVITY_SPEED + (z - CAVITY_BOTTOM) / nu_bg,
        ),
    )
    lateral = np.maximum(np.abs(x - CAVITY_X) - CAVITY_HALF_WIDTH, 0.0) / nu_bg
    times = along + lateral
    return TravelTimeField(
        grid=grid, times=np.maximum(times, 0.0), source=None, label="auxiliary"
    )


def sample_profile(name, grid):
    """Sample a bundled velocity profile on a grid."""
    if name in ("homog1d", "layers1d"):
        fn = profile_homog1d if name == "homog1d" else profile_layers1d
        return VelocityModel(grid=grid, nu=fn(grid.axis_coords(0)))
    fn = {
        "smooth2d": profile_smooth2d,
        "rough2d": profile_rough2d,
        "cavity2d": profile_cavity2d,
    }[name]
    x = grid.axis_coords(0)[:, None]
    z = grid.axis_coords(1)[None, :]
    return VelocityModel(grid=grid, nu=fn(x, z))


_DEFAULTS = {
    "homog1d": dict(
        dims=(801,),
        spacing=(2.5,),
        pml_layers=8,
        reflecting_top=False,
        sources=((600.0,), (1400.0,)),
        wavelet=("ricker", 8.0),
        shift_count=8,
        band_fraction=0.5,
        eval_count=240,
        coarsen=1,
        time_window=1.6,
    ),
    "layers1d": dict(
        dims=(801,),
        spacing=(2.5,),
        pml_layers=8,
        reflecting_top=False,
        sources=((300.0,), (1700.0,)),
        wavelet=("ricker", 10.0),
        shift_count=12,
        band_fraction=0.5,
        eval_count=320,
        coarsen=1,
        time_window=2.4,
    ),
    "smooth2d": dict(
        dims=(161, 121),
        spacing=(6.0, 6.0),
        pml_layers=32,
        reflecting_top=True,
        sources=((120.0, 24.0), (360.0, 24.0), (600.0, 24.0), (840.0, 24.0)),
        receivers=((192.0, 24.0), (432.0, 24.0), (672.0, 24.0), (912.0, 24.0)),
        wavelet=("modulated_gaussian", 12.0),
        shift_count=20,
        band_fraction=0.5,
        eval_count=96,
        coarsen=4,
        time_window=1.8,
    ),
    "rough2d": dict(
        dims=(161, 121),
        spacing=(6.0, 6.0),
        pml_layers=32,
        reflecting_top=True,
        sources=((120.0, 24.0), (360.0, 24.0), (600.0, 24.0), (840.0, 24.0)),
        receivers=((192.0, 24.0), (432.0, 24.0), (672.0, 24.0), (912.0, 24.0)),
        wavelet=("modulated_gaussian", 12.0),
        shift_count=20,
        band_fraction=0.5,
        eval_count=96,
        coarsen=4,
        time_window=1.8,
    ),
    "cavity2d": dict(
        dims=(121, 81),
        spacing=(8.0, 8.0),
        pml_layers=16,
        reflecting_top=True,
        sources=((480.0, 32.0), (256.0, 32.0), (480.0, 256.0)),
        wavelet=("modulated_gaussian", 10.0),
        shift_count=16,
        band_fraction=0.5,
        eval_count=280,
        coarsen=2,
        time_window=3.2,
    ),
}


def bundled_grid(name, **overrides):
    cfg = dict(_DEFAULTS[name])
    cfg.update(overrides)
    return Grid.make(
        cfg["dims"],
        cfg["spacing"],
        pml_layers=cfg["pml_layers"],
        reflecting_top=cfg["reflecting_top"],
    )


def bundled_scenario(name, **overrides):
    """In-memory Scenario for a bundled case (no files involved).

    Returns (scenario, extras) where extras carries the coarsening factor,
    band edge, and for cavity2d the auxiliary channel times.
    """
    if name not in BUNDLED:
        raise ValidationError(f"unknown scenario '{name}', have {BUNDLED}")
    cfg = dict(_DEFAULTS[name])
    cfg.update(overrides)
    grid = bundled_grid(name, **overrides)
    model = sample_profile(name, grid)
    kind, peak_hz = cfg["wavelet"]
    wavelet = Wavelet(kind=kind, omega_peak=2 * np.pi * peak_hz)
    band_top = cfg.get("band_top", cfg["band_fraction"] * wavelet.cutoff)
    m = cfg["shift_count"]
    shifts = 1j * band_top * np.arange(1, m + 1) / m
    n_eval = cfg["eval_count"]
    omega_max = cfg.get("omega_max", 2.0 * band_top)
    evals = 1j * omega_max * np.arange(1, n_eval + 1) / n_eval
    sources = tuple(grid.snap(c) for c in cfg["sources"])
    receivers = (
        tuple(grid.snap(c) for c in cfg["receivers"])
        if "receivers" in cfg
        else sources
    )
    scenario = Scenario(
        model=model,
        sources=sources,
        receivers=receivers,
        shifts=shifts,
        eval_frequencies=evals,
        wavelet=wavelet,
    )
    extras = {
        "name": name,
        "coarsen": cfg["coarsen"],
        "band_top": band_top,
        "omega_max": omega_max,
        "time_window": cfg["time_window"],
        "aux_times": (),
    }
    if name == "cavity2d":
        coarse_grid = bundled_grid(
            name,
            dims=tuple((n - 1) // cfg["coarsen"] + 1 for n in cfg["dims"]),
            spacing=tuple(h * cfg["coarsen"] for h in cfg["spacing"]),
            pml_layers=max(cfg["pml_layers"] // cfg["coarsen"], 1),
        )
        extras["aux_times"] = (cavity_channel_times(coarse_grid),)
    return scenario, extras


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed scenario file: the Scenario plus build-stage settings."""

    scenario: Scenario
    coarsen: int = 1
    smooth_window_m: float = 0.0
    aux_time_paths: tuple = ()
    band_top: float = 0.0
    omega_max: float = 0.0
    time_window: float = 0.0
    base_dir: str = "."
    extras: dict = field(default_factory=dict)


def load_scenario(path):
    """Read a scenario TOML file into a ScenarioConfig."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    base_dir = os.path.dirname(os.path.abspath(path))

    mdl = doc.get("model", {})
    vel_path = os.path.join(base_dir, mdl["velocity"])
    from .util import read_sidecar

    side = read_sidecar(vel_path)
    grid = Grid.make(
        side["dims"],
        side["spacing"],
        origin=side["origin"],
        pml_layers=int(mdl.get("pml_layers", 8)),
        reflecting_top=bool(mdl.get("reflecting_top", False)),
    )
    model = load_velocity_model(vel_path, meta=grid)
    if float(mdl.get("smooth_window_m", 0.0)) > 0:
        from .model import smooth_model

        model = smooth_model(model, float(mdl["smooth_window_m"]))

    wav = doc.get("wavelet", {})
    wavelet = Wavelet(
        kind=wav.get("kind", "ricker"),
        omega_peak=2 * np.pi * float(wav["peak_hz"]),
        t0=wav.get("t0"),
    )

    sh = doc.get("shifts", {})
    m = int(sh.get("count", 10))
    band_top = float(sh.get("band_top_rad_s", 0.0)) or float(
        sh.get("band_fraction", 0.5)
    ) * wavelet.cutoff
    shifts = 1j * band_top * np.arange(1, m + 1) / m

    ev = doc.get("evaluation", {})
    n_eval = int(ev.get("count", 200))
    omega_max = float(ev.get("omega_max_rad_s", 0.0)) or float(
        ev.get("band_multiple", 2.0)
    ) * band_top
    evals = 1j * omega_max * np.arange(1, n_eval + 1) / n_eval
    time_window = float(ev.get("time_window_s", 2.0))

    arrays = doc.get("arrays", {})
    sources = tuple(grid.snap(tuple(c)) for c in arrays["sources"])
    rec_spec = arrays.get("receivers", "coincide")
    receivers = (
        sources
        if rec_spec == "coincide"
        else tuple(grid.snap(tuple(c)) for c in rec_spec)
    )

    scenario = Scenario(
        model=model,
        sources=sources,
        receivers=receivers,
        shifts=shifts,
        eval_frequencies=evals,
        wavelet=wavelet,
    )
    aux = doc.get("auxiliary", {})
    aux_paths = tuple(
        os.path.join(base_dir, p) for p in aux.get("times", ())
    )
    return ScenarioConfig(
        scenario=scenario,
        coarsen=int(mdl.get("coarsen", 1)),
        smooth_window_m=float(mdl.get("smooth_window_m", 0.0)),
        aux_time_paths=aux_paths,
        band_top=band_top,
        omega_max=omega_max,
        time_window=time_window,
        base_dir=base_dir,
        extras=doc.get("extras", {}),
    )


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def write_scenario_files(name, directory, **overrides):
    """Materialize a bundled scenario as velocity + TOML (+ aux times).

    Returns the path of the scenario file.
    """
    ensure_dir(directory)
    cfg = dict(_DEFAULTS[name])
    cfg.update(overrides)
    grid = bundled_grid(name, **overrides)
    model = sample_profile(name, grid)
    vel_name = f"{name}_velocity.f32"
    write_field_f32(
        os.path.join(directory, vel_name),
        model.nu,
        grid.dims,
        grid.spacing,
        grid.origin,
    )
    kind, peak_hz = cfg["wavelet"]
    doc = {
        "model": {
            "velocity": vel_name,
            "pml_layers": cfg["pml_layers"],
            "reflecting_top": cfg["reflecting_top"],
            "coarsen": cfg["coarsen"],
            "smooth_window_m": 0.0,
        },
        "arrays": {
            "sources": [list(c) for c in cfg["sources"]],
            "receivers": [list(c) for c in cfg["receivers"]]
            if "receivers" in cfg
            else "coincide",
        },
        "shifts": {"count": cfg["shift_count"], "band_fraction": cfg["band_fraction"]},
        "wavelet": {"kind": kind, "peak_hz": peak_hz},
        "evaluation": {
            "count": cfg["eval_count"],
            "band_multiple": 2.0,
            "time_window_s": cfg["time_window"],
        },
    }
    if name == "cavity2d":
        coarsen = cfg["coarsen"]
        coarse_grid = bundled_grid(
            name,
            dims=tuple((n - 1) // coarsen + 1 for n in cfg["dims"]),
            spacing=tuple(h * coarsen for h in cfg["spacing"]),
            pml_layers=max(cfg["pml_layers"] // coarsen, 1),
        )
        aux = cavity_channel_times(coarse_grid)
        aux_name = f"{name}_channel_times.f32"
        save_travel_times(aux, os.path.join(directory, aux_name))
        doc["auxiliary"] = {"times": [aux_name]}

    lines = []
    for section, table in doc.items():
        lines.append(f"[{section}]")
        for key, val in table.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    path = os.path.join(directory, f"{name}.toml")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
    return path
