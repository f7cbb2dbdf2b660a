"""Command-line entry point: ``nanomorph {simulate,estimate,fit,quench,presets}``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure
(non-convergence, infeasible parameters), 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import grid as _grid
from . import physics as _physics
from . import stats as _stats
from .config import PRESETS, ConfigError, RunConfig, lambda_hat_of, load_preset, parse_text
from .fit import minimum_contrast_search
from .marks import MarkedPoints, mark_correlation, write_mark_correlation
from .micro import InfeasibleError
from .pipeline import simulate_morphology

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

ESTIMATE_STATS = ("scd", "chords", "fractions", "pcf", "markcorr")


class InputError(OSError):
    """Unreadable or malformed input file."""


def format_eta(eta: float) -> str:
    """Quenching efficiency with 4 significant digits."""
    if eta == 0:
        return "0.0000"
    return f"{eta:#.4g}"


def _load_config(args) -> RunConfig:
    if args.config and getattr(args, "preset", None):
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from None
        values = parse_text(text)
    elif getattr(args, "preset", None):
        values = dict(load_preset(args.preset).values)
    else:
        values = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        values.update(parse_text(item))
    if args.seed is not None:
        values["seed"] = args.seed
    return RunConfig(values)


def _read_grid(path) -> _grid.VoxelGrid:
    try:
        return _grid.read_mvg(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read grid {path}: {exc}") from None


def _read_spheres(path) -> MarkedPoints:
    try:
        return MarkedPoints.from_csv(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read spheres {path}: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory: {exc}") from None
    return out


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["nan" if isinstance(v, float) and np.isnan(v) else
                        repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    morph = simulate_morphology(cfg)
    paths = morph.write(out)
    (out / "config.txt").write_text(cfg.to_text())
    print(f"volume_fraction={_grid.volume_fraction(morph.final)!r}")
    for name, p in paths.items():
        print(f"{name}={p}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    wanted = [s.strip() for s in args.stats.split(",") if s.strip()]
    bad = [s for s in wanted if s not in ESTIMATE_STATS]
    if bad:
        raise ConfigError(f"unknown statistics {bad}; choose from {', '.join(ESTIMATE_STATS)}")
    if not args.grid and not args.spheres:
        raise ConfigError("estimate needs --grid and/or --spheres")
    needs_spheres = {"pcf", "markcorr"} & set(wanted)
    if needs_spheres and not args.spheres:
        raise ConfigError(f"{', '.join(sorted(needs_spheres))} require --spheres")
    cfg = _load_config(args)
    out = _out_dir(args)
    spheres = _read_spheres(args.spheres) if args.spheres else None
    if args.grid:
        mask = _read_grid(args.grid).data
    elif {"scd", "chords", "fractions"} & set(wanted):
        mask = _grid.rasterize_spheres(spheres.spheres(), cfg.window)
    else:
        mask = None
    dims = mask.shape if mask is not None else cfg.window

    if "scd" in wanted:
        try:
            _stats.spherical_contact_edf(mask).to_csv(out / "scd.csv")
        except ValueError as exc:
            print(f"scd skipped: {exc}", file=sys.stderr)
    if "chords" in wanted:
        for axis in "xyz":
            _stats.chord_length_edf(mask, axis).to_csv(out / f"chord_{axis}.csv")
    if "fractions" in wanted:
        vc = _grid.connected_fraction(mask)
        vm = _grid.monotone_connected_fraction(mask) if mask.shape[2] > 1 else float("nan")
        _write_rows(out / "fractions.csv", ["volume_fraction", "connected", "monotone"],
                    [[_grid.volume_fraction(mask), vc, vm]])
        print(f"volume_fraction={_grid.volume_fraction(mask)!r}")
        print(f"connected_fraction={vc!r}")
        print(f"monotone_connected_fraction={vm!r}")
    if "pcf" in wanted:
        r = np.arange(args.dr, args.rmax + 0.5 * args.dr, args.dr)
        curves = []
        z = np.floor(spheres.positions[:, 2]).astype(int)
        for zi in np.unique(z):
            pts = spheres.positions[z == zi, :2]
            if len(pts) >= 2:
                curves.append(_stats.pair_correlation_2d(pts, dims[:2], r)[1])
        g = np.nanmean(curves, axis=0) if curves else np.full(len(r), np.nan)
        _write_rows(out / "pcf.csv", ["r", "g"], zip(r, g))
    if "markcorr" in wanted:
        r = np.arange(args.dr, args.rmax + 0.5 * args.dr, args.dr)
        r, kappa = mark_correlation(spheres, r)
        write_mark_correlation(out / "markcorr.csv", r, kappa)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    target = _read_grid(args.grid)
    out = _out_dir(args)
    lam = lambda_hat_of(cfg)
    targets = _stats.summarize(target.data, lambda_hat=lam)
    lattice = cfg.lattice()
    if not lattice.vertices():
        raise ConfigError("fit lattice has no admissible vertex")
    res = minimum_contrast_search(lattice, targets, cfg.gamma(), cfg.weights(), target.shape,
                                  cfg.seed, lambda_hat=lam, n_jobs=args.threads,
                                  displacement=cfg.get("macro.displacement"))
    res.write_table(out / "fit_table.csv")
    (out / "fit_report.txt").write_text(res.report())
    sys.stdout.write(res.report())
    return EXIT_OK


def cmd_quench(args) -> int:
    cfg = _load_config(args)
    g = _read_grid(args.grid)
    if "window.voxel_size_nm" not in cfg.values:
        # no explicit voxel size: take it from the grid header
        cfg = cfg.set("window.voxel_size_nm", float(g.voxel_size))
    dp = cfg.diffusion()
    if g.data.all():
        raise ConfigError("grid has no polymer phase")
    field = _physics.solve_exciton_field(g.data, dp)
    eta = _physics.quenching_efficiency(field)
    if args.field:
        try:
            _physics.write_mef(args.field, field, dp.voxel_size)
        except OSError as exc:
            raise InputError(f"cannot write field: {exc}") from None
    print(format_eta(eta))
    return EXIT_OK


def cmd_presets(args) -> int:
    if not args.name:
        for name in PRESETS:
            print(name)
        return EXIT_OK
    text = load_preset(args.name).to_text()
    if args.out:
        out = _out_dir(args)
        (out / f"{args.name}.cfg").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value run configuration")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64 bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")

    ap = argparse.ArgumentParser(prog="nanomorph", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a morphology")
    p.add_argument("--preset", choices=PRESETS, help="start from a shipped preset")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="summary statistics of a grid")
    p.add_argument("--grid", help="MVG1 grid")
    p.add_argument("--spheres", help="sphere CSV (x,y,z,r)")
    p.add_argument("--stats", default="scd,chords,fractions",
                   help=f"comma-separated subset of {','.join(ESTIMATE_STATS)}")
    p.add_argument("--rmax", type=float, default=60.0, help="largest lag for pcf/markcorr")
    p.add_argument("--dr", type=float, default=1.0, help="lag spacing for pcf/markcorr")
    p.add_argument("--preset", choices=PRESETS)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", parents=[common], help="minimum-contrast grid search")
    p.add_argument("--grid", required=True, help="target MVG1 grid")
    p.add_argument("--preset", choices=PRESETS)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("quench", parents=[common], help="exciton quenching efficiency")
    p.add_argument("--grid", required=True, help="MVG1 grid")
    p.add_argument("--field", help="write the exciton field as MEF1")
    p.add_argument("--preset", choices=PRESETS)
    p.set_defaults(func=cmd_quench)

    p = sub.add_parser("presets", parents=[common], help="list or print shipped presets")
    p.add_argument("name", nargs="?", choices=PRESETS)
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _physics.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
