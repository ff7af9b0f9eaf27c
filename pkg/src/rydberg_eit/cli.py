"""Command-line front end: ``rydberg-eit <subcommand> [options]``.

Every run writes its outputs plus ``manifest.json`` into ``--out``.  Exit
codes: 0 success, 2 usage error, 3 invalid configuration or parameters,
4 numerical or validation failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytic_filter import (EmptyInputError, InputSpec, coherent_intensity,
                              filter_kernel, fock_intensity, fwhm, partial_entry_kernel, peak_time,
                              photon_grid)
from .config import (ConfigError, content_hash, file_hash, load_section, parse_floats, parse_ints,
                     parse_mode, parse_weights, write_csv, write_json, write_matrix_csv)
from .core import DegenerateModeError, FrameError, MediumParams, NumericalError, ParameterError, make_mode
from .kernel import Kernel, write_kernel_csv, write_summary_json
from .spectral import ValidationError, eigen_numeric, write_eigenvectors_csv, write_spectrum_json
from .storage import DEFAULT_PULSE_DURATION, efficiency_sweep
from .subtractor import (SubtractorParams, relative_l2, remaining_photon_kernel, spectrum_match,
                         subtract_analytic, subtract_simulate)
from .twophoton import INTERACTIONS, SimConfig, plan, run

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
THREADS_ENV = "RYDBERG_SIM_THREADS"
INPUT_KEYS = ("fock", "coherent", "mixture")

# canonical figure setups; command-line options override individual entries
FIGURES = {
    "2a": {"kind": "fock", "values": [1, 4, 16], "mode": "gaussian:sigma=1,center=0", "points": 2000},
    "2b": {"kind": "coherent", "values": [1.0, 4.0, 16.0], "mode": "gaussian:sigma=1,center=0", "points": 2000},
    "3a": {"od": [200.0], "vg": 0.05, "zb": 2.0, "lp": 0.8, "nx": 64, "snapshots": 4},
    "3b": {"od": [25.0, 50.0, 100.0, 200.0], "vg": 0.05, "zb": 2.0, "lp": 0.8, "nx": 64, "snapshots": 0},
    "3c": {"nbar": [1.0, 2.0, 3.0, 5.0, 7.0, 10.0], "od": [10.0, 100.0, 1000.0],
           "pulse_duration": DEFAULT_PULSE_DURATION},
}


# ---------------------------------------------------------------- helpers


def _input_spec(cfg, mode) -> InputSpec:
    if cfg.get("fock") is not None:
        return InputSpec.fock(int(cfg["fock"]), mode)
    if cfg.get("coherent") is not None:
        return InputSpec.coherent(float(cfg["coherent"]), mode)
    if cfg.get("mixture") is not None:
        return InputSpec.mixture(parse_weights(cfg["mixture"]), mode)
    raise ConfigError("choose an input state with --fock, --coherent or --mixture")


def _sim_config(od, vg, zb, lp, nx, length=1.0, courant=1.0, interaction="full_v6",
                regularization=None, t_end=None, snapshot_every=0, series_every=16) -> SimConfig:
    params = MediumParams.from_optical_depth(od, length, vg, zb)
    mode = make_mode("parabolic", T=lp / vg)
    return SimConfig(params, mode, nx=nx, courant=courant, interaction=interaction,
                     regularization=regularization, t_end=t_end, snapshot_every=snapshot_every,
                     series_every=series_every)


def _series_rows(tr):
    return zip(tr.times, tr.trace, tr.purity, tr.two_photon_norm, tr.vacuum, tr.reference_trace)


SERIES_HEADER = ["t", "trace", "purity", "two_photon_norm", "vacuum", "analytic_trace"]


def _analytic_ss_error(tr, cfg: SimConfig) -> float:
    # final ss against the single-photon-entry closed form in the good-EIT limit
    p = cfg.params
    ref = partial_entry_kernel(2, cfg.end_time, p, cfg.mode, tr.grid)
    ss = tr.final_density.ss
    return relative_l2(ss, ref.values / (1.0 + p.group_velocity), tr.grid.trapezoid_weights())


# ---------------------------------------------------------------- subcommands
#
# Each command is a pair (resolve, execute): resolve turns parsed options into
# a JSON-able config plus a plan for --dry-run; execute writes the outputs and
# returns their paths.


def resolve_filter(a):
    cfg = {k: getattr(a, k) for k in ("fock", "coherent", "mixture", "mode", "points")}
    spec = _input_spec(cfg, parse_mode(a.mode))
    return cfg, {"input": spec.kind, "grid_points": a.points + 1,
                 "outputs": ["kernel.csv", "summary.json", "intensity.csv"]}


def run_filter(cfg, out: Path):
    mode = parse_mode(cfg["mode"])
    spec = _input_spec(cfg, mode)
    k = filter_kernel(spec, photon_grid(mode, cfg["points"]))
    x = k.points
    rows = zip(x, k.diagonal(), mode(-x) ** 2)
    return [write_kernel_csv(k, out / "kernel.csv"),
            write_summary_json(k, out / "summary.json", hermiticity_defect=k.hermiticity_defect()),
            write_csv(out / "intensity.csv", ["x", "phi_xx", "input_h2"], rows)]


def resolve_spectrum(a):
    cfg = {k: getattr(a, k) for k in ("fock", "coherent", "mixture", "mode", "points", "count")}
    if a.count < 1:
        raise ConfigError("--count must be positive")
    _input_spec(cfg, parse_mode(a.mode))
    return cfg, {"grid_points": a.points + 1, "count": a.count,
                 "outputs": ["spectrum.json", "eigenvectors.csv"]}


def run_spectrum(cfg, out: Path):
    mode = parse_mode(cfg["mode"])
    k = filter_kernel(_input_spec(cfg, mode), photon_grid(mode, cfg["points"]))
    dec = eigen_numeric(k, cfg["count"])
    return [write_spectrum_json(dec, out / "spectrum.json"),
            write_eigenvectors_csv(dec, out / "eigenvectors.csv", cfg["count"])]


SIM_KEYS = ("od", "vg", "zb", "lp", "length", "nx", "courant", "interaction", "regularization",
            "t_end", "snapshot_every", "series_every")


def resolve_simulate(a):
    cfg = {k: getattr(a, k) for k in SIM_KEYS}
    return cfg, plan(_sim_config(**cfg))


def run_simulate(cfg, out: Path):
    sc = _sim_config(**cfg)
    tr = run(sc)
    paths = [write_csv(out / "series.csv", SERIES_HEADER, _series_rows(tr))]
    paths += _write_snapshots(tr, out)
    summary = {"efficiency": tr.efficiency, "purity": tr.final_purity,
               "analytic_ss_l2_error": _analytic_ss_error(tr, sc),
               "diagnostics": tr.diagnostics,
               "series": {h: col for h, col in zip(SERIES_HEADER, np.array(list(_series_rows(tr))).T)}}
    paths.append(write_json(out / "summary.json", summary))
    return paths


def _write_snapshots(tr, out: Path):
    paths = []
    for i, snap in enumerate(tr.snapshots):
        paths.append(write_matrix_csv(out / f"abs_EE_t{i:03d}.csv", tr.grid.points, snap["abs_EE"]))
        paths.append(write_matrix_csv(out / f"ss_t{i:03d}.csv", tr.grid.points, snap["ss"]))
    paths.append(write_csv(out / "snapshot_times.csv", ["index", "t"],
                           ((i, s["time"]) for i, s in enumerate(tr.snapshots))))
    return paths


def resolve_subtract(a):
    cfg = {k: getattr(a, k) for k in ("fock", "coherent", "mixture", "mode", "points", "count",
                                      "gamma", "snapshot_times")}
    mode = parse_mode(a.mode)
    spec = _input_spec(cfg, mode)
    out = {"input": spec.kind, "outputs": ["summary.json", "remaining_kernel.csv"]}
    if a.gamma is not None:
        if spec.kind != "fock" or spec.N != 2:
            raise ConfigError("the absorber simulation takes a two-photon Fock input (--fock 2)")
        p = SubtractorParams(a.gamma, mode)
        parse_floats(a.snapshot_times)
        out.update(gamma_T=p.sharpness, medium_length=p.length, regime_warning=p.regime_warning())
        out["outputs"] += ["simulated_kernel.csv", "series.csv", "EE_t*.csv", "ee_t*.csv"]
    return cfg, out


def run_subtract(cfg, out: Path):
    mode = parse_mode(cfg["mode"])
    spec = _input_spec(cfg, mode)
    res = subtract_analytic(spec, photon_grid(mode, cfg["points"]))
    fk = filter_kernel(spec, photon_grid(mode, cfg["points"]))
    match = spectrum_match(fk, res, cfg["count"])
    paths = []
    summary = {"vacuum_weight": res.vacuum_weight, "absorbed_probability": res.absorbed_probability,
               "sector_weights": res.sector_weights, "notes": res.notes,
               "spectrum_match": match.summary()}
    if res.kernel is not None:
        summary["remaining"] = res.kernel.summary()
        paths.append(write_kernel_csv(res.kernel, out / "remaining_kernel.csv"))
    if res.photons_remain:
        summary["purity"] = res.purity()
    if cfg["gamma"] is not None:
        p = SubtractorParams(cfg["gamma"], mode)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tr = subtract_simulate(p, snapshot_times=parse_floats(cfg["snapshot_times"]))
        k = tr.kernel()
        ref = remaining_photon_kernel(mode, tr.grid).values
        summary["simulation"] = {"trace": k.trace(), "purity": k.purity(),
                                 "l2_error_vs_sharp_limit": relative_l2(tr.ee, ref, tr.grid.weights()),
                                 "diagnostics": tr.diagnostics}
        paths.append(write_kernel_csv(k, out / "simulated_kernel.csv"))
        paths.append(write_csv(out / "series.csv", ["t", "trace", "two_photon_norm"],
                               zip(tr.times, tr.trace, tr.two_photon_norm)))
        for i, (t, (EE, ee)) in enumerate(sorted(tr.snapshots.items())):
            x = tr.lab_points(t)
            paths.append(write_matrix_csv(out / f"EE_t{i:03d}.csv", x, EE))
            paths.append(write_matrix_csv(out / f"ee_t{i:03d}.csv", x, ee))
    paths.append(write_json(out / "summary.json", summary))
    return paths


def resolve_efficiency(a):
    cfg = {"nbar": parse_floats(a.nbar), "od": parse_floats(a.od), "pulse_duration": a.pulse_duration,
           "mode": a.mode}
    parse_mode(a.mode)
    if min(cfg["nbar"], default=0) <= 0 or min(cfg["od"], default=0) <= 0:
        raise ConfigError("--nbar and --od need positive values")
    return cfg, {"points": len(cfg["nbar"]) * len(cfg["od"]), "outputs": ["efficiency.csv"]}


EFFICIENCY_HEADER = ["nbar", "od_b", "eta_store", "eta_retrieve", "eta"]


def run_efficiency(cfg, out: Path):
    rows = efficiency_sweep(cfg["nbar"], cfg["od"], parse_mode(cfg["mode"]), cfg["pulse_duration"])
    return [write_csv(out / "efficiency.csv", EFFICIENCY_HEADER,
                      ([r.row()[h] for h in EFFICIENCY_HEADER] for r in rows))]


def resolve_figure(a):
    fig = dict(FIGURES[a.figure])
    if a.figure in ("2a", "2b"):
        vals = a.N if a.figure == "2a" else a.nbar
        if vals is not None:
            fig["values"] = parse_ints(vals) if a.figure == "2a" else parse_floats(vals)
        if a.points is not None:
            fig["points"] = a.points
        parse_mode(fig["mode"])
        planned = {"profiles": len(fig["values"])}
    elif a.figure in ("3a", "3b"):
        if a.od is not None:
            fig["od"] = parse_floats(a.od)
        if a.nx is not None:
            fig["nx"] = a.nx
        planned = {"runs": [plan(_figure_sim(fig, od)) for od in fig["od"]]}
    else:
        if a.nbar is not None:
            fig["nbar"] = parse_floats(a.nbar)
        if a.od is not None:
            fig["od"] = parse_floats(a.od)
        planned = {"points": len(fig["nbar"]) * len(fig["od"])}
    return {"figure": a.figure, **fig}, planned


def _figure_sim(fig, od, snapshot_every=0):
    return _sim_config(od, fig["vg"], fig["zb"], fig["lp"], fig["nx"], snapshot_every=snapshot_every)


def run_figure(cfg, out: Path):
    fig = cfg["figure"]
    if fig in ("2a", "2b"):
        return _figure_2(cfg, out)
    if fig == "3a":
        sc = _figure_sim(cfg, cfg["od"][0])
        if cfg["snapshots"]:
            sc = _figure_sim(cfg, cfg["od"][0], max(1, sc.steps // cfg["snapshots"]))
        tr = run(sc)
        return _write_snapshots(tr, out) + [write_csv(out / "series.csv", SERIES_HEADER, _series_rows(tr))]
    if fig == "3b":
        rows, paths = [], []
        for od in cfg["od"]:
            sc = _figure_sim(cfg, od)
            tr = run(sc)
            paths.append(write_csv(out / f"series_od{od:g}.csv", SERIES_HEADER, _series_rows(tr)))
            rows.append((od, tr.efficiency, tr.final_purity, _analytic_ss_error(tr, sc),
                         float(tr.reference_trace[-1]), 2.0 / 3.0))
        paths.append(write_csv(out / "sweep.csv", ["od", "efficiency", "purity", "ss_l2_error",
                                                   "analytic_efficiency", "analytic_purity"], rows))
        return paths
    rows = efficiency_sweep(cfg["nbar"], cfg["od"], pulse_duration=cfg["pulse_duration"])
    return [write_csv(out / "efficiency.csv", EFFICIENCY_HEADER,
                      ([r.row()[h] for h in EFFICIENCY_HEADER] for r in rows))]


def _figure_2(cfg, out: Path):
    mode = parse_mode(cfg["mode"])
    x = photon_grid(mode, cfg["points"]).points
    fock = cfg["figure"] == "2a"
    paths, rows = [], []
    for v in cfg["values"]:
        phi = fock_intensity(v, mode, x) if fock else coherent_intensity(v, mode, x)
        tag = f"N{v}" if fock else f"nbar{v:g}"
        paths.append(write_csv(out / f"intensity_{tag}.csv", ["x", "phi_xx", "input_h2"],
                               zip(x, phi, mode(-x) ** 2)))
        rows.append((v, fwhm(x, phi), peak_time(x, phi)))
    paths.append(write_csv(out / "profile_summary.csv", ["N" if fock else "nbar", "fwhm", "peak"], rows))
    return paths


COMMANDS = {
    "filter": (resolve_filter, run_filter),
    "spectrum": (resolve_spectrum, run_spectrum),
    "simulate": (resolve_simulate, run_simulate),
    "subtract": (resolve_subtract, run_subtract),
    "efficiency": (resolve_efficiency, run_efficiency),
    "reproduce-figure": (resolve_figure, run_figure),
}


# ---------------------------------------------------------------- parser


def _add_common(p):
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--config", help="INI file; options in the [<subcommand>] section become defaults")
    p.add_argument("--dry-run", action="store_true", help="validate and print the plan without computing")


def _add_input(p, mode_default="parabolic:T=1"):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fock", type=int, metavar="N", help="Fock input with N photons")
    g.add_argument("--coherent", type=float, metavar="NBAR", help="coherent input with mean photon number")
    g.add_argument("--mixture", metavar="M:W,...", help="diagonal mixture, e.g. 1:0.5,2:0.5")
    p.add_argument("--mode", default=mode_default,
                   help="temporal mode, parabolic:T=.. or gaussian:sigma=..,center=..")
    p.add_argument("--points", type=int, default=2000, help="grid intervals")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydberg-eit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("filter", help="output kernel of the single-photon filter")
    _add_input(p)
    _add_common(p)

    p = sub.add_parser("spectrum", help="eigen-decomposition of the filter output")
    _add_input(p)
    p.add_argument("--count", type=int, default=10)
    _add_common(p)

    p = sub.add_parser("simulate", help="two-photon propagation through the medium")
    p.add_argument("--od", type=float, default=200.0, help="optical depth")
    p.add_argument("--vg", type=float, default=0.05, help="group velocity (units of c)")
    p.add_argument("--zb", type=float, default=2.0, help="blockade radius")
    p.add_argument("--lp", type=float, default=0.8, help="compressed pulse length; sets T = lp / vg")
    p.add_argument("--length", type=float, default=1.0, help="medium length")
    p.add_argument("--nx", type=int, default=256, help="cells per medium length")
    p.add_argument("--courant", type=float, default=1.0)
    p.add_argument("--interaction", choices=INTERACTIONS, default="full_v6")
    p.add_argument("--regularization", type=float, default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--series-every", type=int, default=16)
    _add_common(p)

    p = sub.add_parser("subtract", help="single-photon subtractor output")
    _add_input(p)
    p.add_argument("--count", type=int, default=10, help="eigenvalues compared with the filter")
    p.add_argument("--gamma", type=float, default=None, help="also simulate the absorber at this rate")
    p.add_argument("--snapshot-times", default="", help="comma-separated snapshot times")
    _add_common(p)

    p = sub.add_parser("efficiency", help="single-photon source efficiency sweep")
    p.add_argument("--nbar", default="1,2,3,5,7,10")
    p.add_argument("--od", default="10,100,1000")
    p.add_argument("--pulse-duration", type=float, default=DEFAULT_PULSE_DURATION)
    p.add_argument("--mode", default="parabolic:T=1")
    _add_common(p)

    p = sub.add_parser("reproduce-figure", help="data behind one of the figures")
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--N", help="Fock photon numbers (2a)")
    p.add_argument("--nbar", help="mean photon numbers (2b, 3c)")
    p.add_argument("--od", help="optical depths (3a, 3b, 3c)")
    p.add_argument("--nx", type=int, help="cells per medium length (3a, 3b)")
    p.add_argument("--points", type=int, help="grid intervals (2a, 2b)")
    _add_common(p)
    return parser


def _apply_config(parser, argv):
    """Second parse with the INI section installed as defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    items = load_section(args.config, args.command)
    actions = {a.dest: a for a in sub._actions}
    if any(f"--{k}" in argv or any(t.startswith(f"--{k}=") for t in argv) for k in INPUT_KEYS):
        items = {k: v for k, v in items.items() if k not in INPUT_KEYS}
    defaults = {}
    for key, value in items.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise ConfigError(f"{args.config}: unknown option {key!r} for {args.command}")
        if isinstance(action, argparse._StoreTrueAction):
            value = value.strip().lower() in ("1", "true", "yes", "on")
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


@contextlib.contextmanager
def thread_limit():
    """Cap numba and BLAS worker threads from ``RYDBERG_SIM_THREADS``."""
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        yield None
        return
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    import numba
    from threadpoolctl import threadpool_limits

    old = numba.get_num_threads()
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    try:
        with threadpool_limits(limits=n):
            yield n
    finally:
        numba.set_num_threads(old)


def _manifest(args, argv, cfg, out: Path, paths, started, finished) -> dict:
    return {
        "subcommand": args.command,
        "version": __version__,
        "argv": list(argv),
        "config": cfg,
        "config_hash": content_hash({"subcommand": args.command, "config": cfg}),
        "inputs": [str(Path(args.config).resolve())] if args.config else [],
        "output_dir": str(out.resolve()),
        "outputs": [{"path": p.relative_to(out).as_posix(), "sha256": file_hash(p), "bytes": p.stat().st_size}
                    for p in sorted(paths)],
        "started": started,
        "finished": finished,
    }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def dispatch(argv) -> int:
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = _apply_config(parser, argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        resolve, execute = COMMANDS[args.command]
        with thread_limit():
            cfg, planned = resolve(args)
            if args.dry_run:
                print(json.dumps({"subcommand": args.command, "config": cfg, "plan": planned},
                                 indent=2, sort_keys=True, default=_json_default))
                return 0
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            started, t0 = _now(), time.perf_counter()
            paths = [Path(p) for p in execute(cfg, out)]
            write_json(out / "manifest.json", _manifest(args, argv, cfg, out, paths, started, _now()))
            print(f"{args.command}: wrote {len(paths)} files to {out} in {time.perf_counter() - t0:.1f} s")
        return 0
    except (NumericalError, ValidationError) as exc:
        print(f"rydberg-eit: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParameterError, EmptyInputError, DegenerateModeError, FrameError) as exc:
        print(f"rydberg-eit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rydberg-eit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Kernel):
        return obj.summary()
    raise TypeError(type(obj).__name__)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return dispatch(list(argv))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
