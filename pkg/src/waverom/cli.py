"""Command-line driver: build ROMs, evaluate sweeps, synthesize traces,
run studies, dump analytic oracles.

Commands
  build        snapshots -> split -> compress -> serialized ROM
  evaluate     ROM + frequency grid -> transfer CSV
  trace        transfer CSV + wavelet -> trace CSV (optional SVG)
  study        convergence | svd | twogrid -> CSV tables
  oracle1d     analytic layered transfer dump for 1D scenarios

All numeric artifacts are CSV with a header row; runs are deterministic
for a fixed config and seed (parallel reductions keep a fixed order), and
`build`/`evaluate` reuse serialized intermediates when present.
"""

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .eikonal import load_auxiliary_times
from .errors import StageError, ValidationError, WaveromError
from .helmholtz import (
    ExtendedGrid,
    load_snapshots,
    save_snapshots,
    transfer_function_direct,
)
from .model import coarsen_model
from .numerics import thin_svd
from .rom import (
    build_reduced_model,
    compress_amplitudes,
    evaluate_rom,
    load_rom,
    load_transfer_csv,
    save_rom,
    save_transfer_csv,
)
from .scenarios import load_scenario, write_scenario_files
from .timedomain import save_traces_csv, synthesize_traces
from .util import ensure_dir, format_float, parallel_map
from .verify import mimo_average_error, overall_time_error, refine_model, reference_sweep


@dataclass
class RunConfig:
    """Execution settings shared by all commands."""

    config_path: str
    out_dir: str = "out"
    jobs: int = 1
    mode: str = "pprks"
    m_svd: int = None
    coarsen: int = None
    plots: bool = False
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.jobs < 1:
            raise ValidationError("parallelism degree must be >= 1")


def _load(cfg):
    sc = load_scenario(cfg.config_path)
    coarsen = cfg.coarsen if cfg.coarsen is not None else sc.coarsen
    return sc, coarsen


def _aux_fields(sc, coarsen):
    if not sc.aux_time_paths:
        return ()
    return tuple(load_auxiliary_times(p) for p in sc.aux_time_paths)


def cmd_build(cfg):
    sc, coarsen = _load(cfg)
    out = ensure_dir(cfg.out_dir)
    snap_dir = os.path.join(out, "snapshots")
    snapshots = None
    if os.path.exists(os.path.join(snap_dir, "snapshots.json")):
        coarse = coarsen_model(sc.scenario.model, coarsen)
        snapshots = load_snapshots(snap_dir, ExtendedGrid.wrap(coarse.grid))
        print(f"[build] reusing {snapshots.n_shifts * snapshots.n_sources} snapshots")
    rm = build_reduced_model(
        sc.scenario,
        mode=cfg.mode if cfg.mode in ("pprks", "standard_rks") else
        ("standard_rks" if cfg.mode == "rks" else "pprks"),
        coarsen=coarsen,
        m_svd=cfg.m_svd,
        aux_times=_aux_fields(sc, coarsen),
        jobs=cfg.jobs,
        snapshots=snapshots,
        keep_snapshots=True,
    )
    if snapshots is None and hasattr(rm, "snapshots"):
        save_snapshots(rm.snapshots, snap_dir)
    rom_dir = os.path.join(out, "rom")
    save_rom(rm, rom_dir)
    if rm.mode == "pprks":
        print(
            f"[build] ROM written to {rom_dir}: {rm.amplitudes.m_svd} SVD vectors, "
            f"{len(rm.families)} phase families, {rm.shifts.size} shifts"
        )
    else:
        print(
            f"[build] ROM written to {rom_dir}: rank {rm.standard_basis.rank} "
            f"real basis, {rm.shifts.size} shifts"
        )
    return 0


def cmd_evaluate(cfg):
    sc, _ = _load(cfg)
    out = ensure_dir(cfg.out_dir)
    rom_dir = cfg.params.get("rom") or os.path.join(out, "rom")
    rm = load_rom(rom_dir)
    sweep = evaluate_rom(
        rm, sc.scenario.eval_frequencies, sc.scenario.model, jobs=cfg.jobs
    )
    path = os.path.join(out, "transfer.csv")
    save_transfer_csv(sweep, path)
    n_fail = len(sweep.errors)
    print(f"[evaluate] {sweep.frequencies.size} frequencies -> {path}"
          + (f" ({n_fail} failed)" if n_fail else ""))
    for s, msg in sweep.errors:
        print(f"[evaluate]   failed {s}: {msg}")
    return 0


def _default_times(sc):
    omega_max = sc.omega_max
    dt = (2 * np.pi / omega_max) / 8.0
    n = int(np.ceil(sc.time_window / dt)) + 1
    return np.linspace(0.0, sc.time_window, n)


def cmd_trace(cfg):
    sc, _ = _load(cfg)
    out = ensure_dir(cfg.out_dir)
    sweep_path = cfg.params.get("sweep") or os.path.join(out, "transfer.csv")
    sweep = load_transfer_csv(sweep_path)
    times = _default_times(sc)
    traces = synthesize_traces(
        sweep.frequencies.imag, sweep.values, sc.scenario.wavelet, times
    )
    path = os.path.join(out, "traces.csv")
    save_traces_csv(traces, path)
    print(f"[trace] {traces.values.shape[0]}x{traces.values.shape[1]} traces -> {path}")
    if cfg.plots:
        _plot_traces(traces, os.path.join(out, "traces.svg"))
    return 0


def _plot_traces(traces, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("[trace] matplotlib unavailable; skipping plots")
        return
    n_s, n_r, _ = traces.values.shape
    fig, ax = plt.subplots(figsize=(8, 4))
    for i in range(n_s):
        for j in range(n_r):
            ax.plot(traces.times, np.real(traces.values[i, j]), lw=0.8,
                    label=f"s{i}-r{j}" if n_s * n_r <= 8 else None)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("trace")
    if n_s * n_r <= 8:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    print(f"[trace] plot -> {path}")


def cmd_study(cfg, which):
    sc, coarsen = _load(cfg)
    out = ensure_dir(cfg.out_dir)
    if which == "convergence":
        return _study_convergence(cfg, sc, coarsen, out)
    if which == "svd":
        return _study_svd(cfg, sc, coarsen, out)
    if which == "twogrid":
        return _study_twogrid(cfg, sc, coarsen, out)
    raise StageError("study", f"unknown study '{which}'")


def _reference_traces(sc, omegas, times, jobs):
    ref_model = refine_model(sc.scenario.model, 2)
    coords = [sc.scenario.model.grid.node_coords(nd) for nd in sc.scenario.sources]
    sweep = reference_sweep(coords, coords, ref_model, omegas, jobs=jobs)
    return sweep, synthesize_traces(omegas, sweep.values, sc.scenario.wavelet, times)


def _study_convergence(cfg, sc, coarsen, out):
    from .verify import convergence_study

    scenario = sc.scenario
    omegas = scenario.eval_frequencies.imag
    times = _default_times(sc)
    ref_sweep, ref_traces = _reference_traces(sc, omegas, times, cfg.jobs)
    m_max = scenario.shifts.size
    m_values = sorted({0, 1, 2} | set(range(4, m_max + 1, 2)))
    methods = ("rks", "pprks") if cfg.mode == "both" else (cfg.mode,)
    path = os.path.join(out, "study_convergence.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "method", "overall_time_error"])
        for method in methods:
            rows = convergence_study(
                scenario,
                method,
                m_values,
                ref_traces,
                omegas,
                times,
                coarsen=coarsen if method == "pprks" else 1,
                m_svd=cfg.m_svd,
                jobs=cfg.jobs,
            )
            for row in rows:
                err = row["error"]
                writer.writerow(
                    [row["m"], method, format_float(err) if err is not None else "nan"]
                )
                note = row.get("note", "")
                print(f"[study] {method} m={row['m']}: "
                      + (f"err={err:.4e}" if err is not None else f"failed ({note})"))
    print(f"[study] convergence table -> {path}")
    return 0


def _study_svd(cfg, sc, coarsen, out):
    scenario = sc.scenario
    rm = build_reduced_model(
        scenario,
        mode="pprks",
        coarsen=coarsen,
        aux_times=_aux_fields(sc, coarsen),
        jobs=cfg.jobs,
        keep_snapshots=True,
    )
    sig_amp = rm.amplitudes.singular_values
    snaps = rm.snapshots
    cols = []
    for j in range(snaps.n_shifts):
        for l in range(snaps.n_sources):
            u = snaps.ext.to_unknown(snaps.fields[j, l])
            cols.append(u / np.linalg.norm(u))
    _, sig_snap = thin_svd(np.stack(cols, axis=1))
    path = os.path.join(out, "study_svd.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "sigma_amplitude_over_s1", "sigma_snapshot_over_s1"])
        n = max(sig_amp.size, sig_snap.size)
        for k in range(n):
            a = sig_amp[k] / sig_amp[0] if k < sig_amp.size else ""
            b = sig_snap[k] / sig_snap[0] if k < sig_snap.size else ""
            writer.writerow(
                [k, format_float(a) if a != "" else "", format_float(b) if b != "" else ""]
            )
    n_amp = int(np.sum(sig_amp > 0.01 * sig_amp[0]))
    n_snap = int(np.sum(sig_snap > 0.01 * sig_snap[0]))
    print(
        f"[study] svd: {n_amp} amplitude / {n_snap} snapshot singular values > 0.01*s1 "
        f"(pool {sig_amp.size} / {sig_snap.size}) -> {path}"
    )
    return 0


def _study_twogrid(cfg, sc, coarsen, out):
    scenario = sc.scenario
    omegas = scenario.eval_frequencies.imag
    ref_sweep, _ = _reference_traces(sc, omegas, _default_times(sc), cfg.jobs)
    rm = build_reduced_model(
        scenario,
        mode="pprks",
        coarsen=coarsen,
        m_svd=cfg.m_svd,
        aux_times=_aux_fields(sc, coarsen),
        jobs=cfg.jobs,
    )
    sweep_rom = evaluate_rom(rm, 1j * omegas, scenario.model, jobs=cfg.jobs)
    coarse = coarsen_model(scenario.model, coarsen)
    coords = [scenario.model.grid.node_coords(nd) for nd in scenario.sources]
    sweep_coarse = reference_sweep(coords, coords, coarse, omegas, jobs=cfg.jobs)
    omega_max = float(omegas.max())
    err_rom = mimo_average_error(ref_sweep, sweep_rom, omega_max)
    err_coarse = mimo_average_error(ref_sweep, sweep_coarse, omega_max)
    path = os.path.join(out, "study_twogrid.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega_rad_per_s", "err_pprks_fine", "err_coarse_fd"])
        for k, om in enumerate(omegas):
            writer.writerow(
                [format_float(om), format_float(err_rom.err[k]), format_float(err_coarse.err[k])]
            )
    wins = np.mean(err_rom.err < err_coarse.err)
    print(f"[study] twogrid: PPRKS beats coarse FD at {100 * wins:.1f}% of frequencies -> {path}")
    return 0


def cmd_oracle1d(cfg):
    from .verify import analytic_1d_layered, LayeredModel1D

    sc, _ = _load(cfg)
    scenario = sc.scenario
    if scenario.model.grid.ndim != 1:
        raise StageError("oracle1d", "analytic oracle needs a 1D scenario")
    model = scenario.model
    layered = _layered_from_samples(model)
    out = ensure_dir(cfg.out_dir)
    path = os.path.join(out, "oracle_transfer.csv")
    coords = [model.grid.node_coords(nd)[0] for nd in scenario.sources]
    rec = [model.grid.node_coords(nd)[0] for nd in scenario.receivers]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega_rad_per_s", "source", "receiver", "re_u", "im_u"])
        for s in scenario.eval_frequencies:
            for i, xs in enumerate(coords):
                sol = analytic_1d_layered(layered, xs, rec[0], s)
                vals = sol.evaluate(np.asarray(rec))
                for j, v in enumerate(vals):
                    writer.writerow(
                        [format_float(s.imag), i, j, format_float(v.real), format_float(v.imag)]
                    )
    print(f"[oracle1d] analytic transfer -> {path}")
    return 0


def _layered_from_samples(model):
    from .verify import LayeredModel1D

    nu = model.nu
    x = model.grid.axis_coords(0)
    jumps = np.nonzero(np.abs(np.diff(nu)) > 1e-9 * nu.max())[0]
    if jumps.size > 12:
        raise StageError("oracle1d", "velocity profile is not piecewise constant")
    interfaces = [0.5 * (x[k] + x[k + 1]) for k in jumps]
    speeds = [float(nu[0])] + [float(nu[k + 1]) for k in jumps]
    return LayeredModel1D(
        interfaces=tuple(interfaces),
        speeds=tuple(speeds),
        x_min=float(x[0]),
        x_max=float(x[-1]),
    )


def cmd_scaffold(cfg, name):
    path = write_scenario_files(name, cfg.out_dir)
    print(f"[scaffold] scenario files -> {path}")
    return 0


def execute(cfg, command, **params):
    """Run one command; returns the process exit status."""
    cfg.params.update(params)
    np.random.seed(cfg.seed)
    try:
        if command == "build":
            return cmd_build(cfg)
        if command == "evaluate":
            return cmd_evaluate(cfg)
        if command == "trace":
            return cmd_trace(cfg)
        if command.startswith("study"):
            return cmd_study(cfg, cfg.params.get("which", ""))
        if command == "oracle1d":
            return cmd_oracle1d(cfg)
        if command == "scaffold":
            return cmd_scaffold(cfg, cfg.params.get("name", ""))
        print(f"unknown command '{command}'", file=sys.stderr)
        return 2
    except WaveromError as exc:
        stage = getattr(exc, "stage", command)
        print(f"[{stage}] error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected failure, still stage-tagged
        print(f"[{command}] error: {exc}", file=sys.stderr)
        return 1


def _add_common(p):
    p.add_argument("--config", required=True, help="scenario TOML file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--mode", default="pprks", choices=["rks", "pprks", "both"])
    p.add_argument("--msvd", type=int, default=None, help="kept SVD vectors")
    p.add_argument("--coarsen", type=int, default=None, help="grid coarsening factor")
    p.add_argument("--plots", action="store_true", help="emit SVG plots")
    p.add_argument("--seed", type=int, default=0)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="waverom",
        description="Frequency-domain wave-equation model reduction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build", "evaluate", "trace", "oracle1d"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "evaluate":
            p.add_argument("--rom", default=None, help="ROM directory")
        if name == "trace":
            p.add_argument("--sweep", default=None, help="transfer CSV path")
    p = sub.add_parser("study")
    p.add_argument("which", choices=["convergence", "svd", "twogrid"])
    _add_common(p)
    p = sub.add_parser("scaffold")
    p.add_argument("name", help="bundled scenario name")
    p.add_argument("--out", default="out")

    args = parser.parse_args(argv)
    if args.command == "scaffold":
        cfg = RunConfig(config_path="", out_dir=args.out)
        return execute(cfg, "scaffold", name=args.name)
    cfg = RunConfig(
        config_path=args.config,
        out_dir=args.out,
        jobs=args.jobs,
        mode=args.mode,
        m_svd=args.msvd,
        coarsen=args.coarsen,
        plots=args.plots,
        seed=args.seed,
    )
    params = {}
    if args.command == "study":
        params["which"] = args.which
    if args.command == "evaluate" and args.rom:
        params["rom"] = args.rom
    if args.command == "trace" and args.sweep:
        params["sweep"] = args.sweep
    return execute(cfg, args.command, **params)


if __name__ == "__main__":
    sys.exit(main())
