"""Command-line front end.

Subcommands: simulate | analyze | transport | fit-hc2 | fit-resonance |
fit-sigma | render.  Exit codes are a stable scripting contract:
0 success, 1 usage error, 2 data/parse error, 3 numerical failure.

All randomness flows from the config seed (or --seed override); outputs
are byte-identical across repeated runs and across --threads values.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import analysis, fitting, render, solver, transport
from .config import ConfigError, RunConfig, load_config
from .fields import (DataFormatError, GridSpec, gaussian_field,
                     read_snapshot_csv, write_snapshot_csv)
from .thermo import GibbsModel, NoSpinodalRegionError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_SNAP_RE = re.compile(r"^snap_t(.+)\.csv$")


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _resolve_threads(value: int | None) -> int:
    """--threads, else SPINODALKIT_THREADS, else 1.  The cap never changes
    results; it only bounds worker counts where modules parallelize."""
    if value is None:
        raw = os.environ.get("SPINODALKIT_THREADS", "1")
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"SPINODALKIT_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"thread count must be >= 1, got {value}")
    return value


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    _resolve_threads(args.threads)
    out = _out_dir(cfg)
    spec = GridSpec(cfg.nx, cfg.ny, cfg.h)
    init = gaussian_field(spec, cfg.mean, cfg.variance, cfg.seed)
    params = solver.SolverParams(
        D=cfg.D, kappa=cfg.kappa, dt=cfg.dt, n_steps=cfg.n_steps,
        snapshot_times=cfg.snapshot_times, diag_stride=cfg.diag_stride,
        force_dt=args.force_dt)
    model = GibbsModel()
    try:
        result = solver.run(init, params, model)
    except solver.StabilityError as err:
        if err.partial is not None:
            for t, snap in err.partial.snapshots.items():
                write_snapshot_csv(snap, out / solver.snapshot_filename(t))
            solver.write_diagnostics_csv(out / "diagnostics.csv",
                                         err.partial.diagnostics)
        if err.last_stable is not None:
            write_snapshot_csv(err.last_stable, out / "snap_last_stable.csv")
            print(f"wrote last stable field to {out / 'snap_last_stable.csv'}",
                  file=sys.stderr)
        raise
    for t, snap in sorted(result.snapshots.items()):
        write_snapshot_csv(snap, out / solver.snapshot_filename(t))
    solver.write_diagnostics_csv(out / "diagnostics.csv", result.diagnostics)
    print(f"simulate: {len(result.snapshots)} snapshots, {result.n_steps} steps "
          f"(dt={result.dt:g}) -> {out}")
    return EXIT_OK


def _snapshot_paths(in_path: Path) -> list[tuple[float, Path]]:
    if in_path.is_dir():
        found = []
        for p in sorted(in_path.iterdir()):
            m = _SNAP_RE.match(p.name)
            if m:
                try:
                    found.append((float(m.group(1)), p))
                except ValueError:
                    continue
        if not found:
            raise DataFormatError(f"{in_path}: no snap_t*.csv files found")
        return sorted(found)
    m = _SNAP_RE.match(in_path.name)
    t = float(m.group(1)) if m else 0.0
    return [(t, in_path)]


def _cmd_analyze(args) -> int:
    cfg = _load_run_config(args)
    _resolve_threads(args.threads)
    out = _out_dir(cfg)
    rows = []
    for t, path in _snapshot_paths(Path(args.in_path)):
        f = read_snapshot_csv(path)
        rows.append(analysis.analyze_field(f, t, x_c=cfg.x_c,
                                           sigma_ti=cfg.sigma_ti,
                                           sigma_al=cfg.sigma_al))
    report = out / "report.csv"
    analysis.write_report_csv(report, rows)
    print(f"analyze: {len(rows)} snapshots -> {report}")
    return EXIT_OK


def _cmd_transport(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    records = transport.read_transport_csv(args.in_path)
    derived = [transport.derive_transport(r) for r in records]
    report = out / "transport_report.csv"
    transport.write_transport_report_csv(report, derived)
    for d in derived:
        e = d.electrons
        print(f"{d.record.label}: n_e={e.n_e:.4g} m^-3  L_k={d.L_k:.4g} H/sq  "
              f"l={e.l:.4g} m  kF*l={e.kF_l:.4g}")
    print(f"transport: {len(derived)} films -> {report}")
    return EXIT_OK


def _write_fit_outputs(result, out: Path, stem: str) -> int:
    path = out / f"{stem}.csv"
    fitting.write_fit_csv(path, result)
    print(fitting.fit_report_text(result))
    print(f"fit: report -> {path}")
    return EXIT_OK if result.converged else EXIT_NUMERIC


def _cmd_fit_hc2(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    T, muH = fitting.read_xy_csv(args.in_path, ("T_K", "muH_T"))
    if args.model == "gl":
        result = fitting.fit_gl_hc2(T, muH)
    else:
        if args.tc is None:
            print("spinodalkit fit-hc2: --tc is required for --model powerlaw",
                  file=sys.stderr)
            return EXIT_USAGE
        result = fitting.fit_powerlaw_hc2(T, muH, args.tc)
    return _write_fit_outputs(result, out, f"fit_hc2_{args.model}")


def _cmd_fit_resonance(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    f, s21 = fitting.read_s21_csv(args.in_path)
    if (np.abs(s21) == 0).any():
        raise DataFormatError(f"{args.in_path}: |S21| = 0 sample cannot be inverted")
    result = fitting.fit_resonance(f, 1.0 / s21)
    return _write_fit_outputs(result, out, "fit_resonance")


def _cmd_fit_sigma(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    T, sigma = fitting.read_xy_csv(args.in_path, ("T_K", "sigma"))
    regimes = fitting.fit_conductivity_regimes(T, sigma)
    path = out / "fit_sigma.csv"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("window,abscissa,slope,intercept,r_squared\n")
        hi, lo = regimes.high_T, regimes.low_T
        fh.write(f"high_T,T,{hi.slope!r},{hi.intercept!r},{hi.r_squared!r}\n")
        fh.write(f"low_T,sqrt_T,{lo.slope!r},{lo.intercept!r},{lo.r_squared!r}\n")
    print(f"high-T window {regimes.high_window}: sigma = {hi.slope:.6g}*T + "
          f"{hi.intercept:.6g}  (R^2={hi.r_squared:.6f})")
    print(f"low-T window {regimes.low_window}: sigma = {lo.slope:.6g}*sqrt(T) + "
          f"{lo.intercept:.6g}  (R^2={lo.r_squared:.6f})")
    print(f"fit: report -> {path}")
    return EXIT_OK


def _cmd_render(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    targets = _snapshot_paths(Path(args.in_path))
    for _, path in targets:
        f = read_snapshot_csv(path)
        dest = out / (path.stem + ".ppm")
        render.render_ppm(f, dest)
        print(f"render: {path} -> {dest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spinodalkit",
                     description="Spinodal-decomposition simulator and "
                                 "superconducting transport analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, *, config=False, infile=False, seed=False,
            force_dt=False):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        if config:
            p.add_argument("--config", help="INI-style run configuration")
        if infile:
            p.add_argument("--in", dest="in_path", required=True,
                           help="input file (or snapshot directory)")
        p.add_argument("--out", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=_positive_int,
                       help="worker cap (results are thread-count independent)")
        if force_dt:
            p.add_argument("--force-dt", action="store_true",
                           help="bypass the dt stability ceiling")
        return p

    add("simulate", _cmd_simulate, "run the phase-field solver",
        config=True, seed=True, force_dt=True)
    add("analyze", _cmd_analyze, "microstructure report from snapshots",
        config=True, infile=True)
    add("transport", _cmd_transport, "derive carrier/superconducting parameters",
        infile=True)
    p_hc2 = add("fit-hc2", _cmd_fit_hc2, "fit an Hc2(T) trace", infile=True)
    p_hc2.add_argument("--model", choices=("gl", "powerlaw"), default="gl")
    p_hc2.add_argument("--tc", type=float,
                       help="fixed T_c for the power-law model (K)")
    add("fit-resonance", _cmd_fit_resonance, "fit a complex S21 trace",
        infile=True)
    add("fit-sigma", _cmd_fit_sigma, "fit conductivity temperature regimes",
        infile=True)
    add("render", _cmd_render, "convert snapshots to PPM images", infile=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, FileNotFoundError, IsADirectoryError,
            PermissionError) as err:
        print(f"spinodalkit {args.command}: {err}", file=sys.stderr)
        return EXIT_DATA
    except (solver.StabilityError, analysis.LinearSolveError,
            analysis.NoStructureError, fitting.SingularFitError,
            NoSpinodalRegionError, np.linalg.LinAlgError) as err:
        print(f"spinodalkit {args.command}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"spinodalkit {args.command}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"spinodalkit {args.command}: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
