"""Command-line front end.

Exit codes: 0 ok, 2 config/usage error, 3 infeasible, 4 numerical failure.
Log verbosity comes from ``NFISAC_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .ao import InfeasibleScenario, feasibility_precheck
from .baselines import MismatchInfeasible, Scheme, scaled
from .channel import build_channel_set
from .config import SWEEP_VARIABLES, ConfigError, bundled_path, parse_config, sweep_values
from .experiments import (FAILURES, PolarGrid, combined_grid, parse_schemes, range_cut, run_scheme, run_sweep,
                          uplink_grid, write_grid_csv, write_range_cut_csv, write_results_csv, ResultRow)
from .scenario import watt2dbm

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("nfisac")


class UsageError(ValueError):
    pass


def _load(args):
    path = args.config
    if not Path(path).exists() and not path.endswith(".toml"):
        path = bundled_path(path)   # allow bundled names such as "paper_fig5"
    return parse_config(path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    cfg = _load(args)
    schemes = parse_schemes(args.scheme or "FD")
    if len(schemes) != 1:
        raise UsageError("solve takes a single --scheme")
    scheme = schemes[0]
    out = _out_dir(args)
    res = run_scheme(cfg, scheme)
    obj = watt2dbm(res.objective_watts) if res.objective_watts > 0 else -np.inf
    wall = sum(r.wall_ms for run in res.runs for r in run.trace.records)
    row = ResultRow(scheme.value, None, float(obj), True, res.iterations, float(res.worst_slack), wall)
    write_results_csv(out / "results.csv", [row], timing=args.timing)
    items = []
    for s, run in enumerate(res.runs):
        prefix = f"slot{s + 1}." if len(res.runs) > 1 else ""
        bf = run.beamformers if res.scale in (None, 1.0) else scaled(run.beamformers, res.scale)
        items += [(prefix + name, a) for name, a in mio.beamformer_items(bf)]
    mio.save_matrices(out / "beamformers.txt", items,
                      header=f"scheme {scheme.value}; objective {obj:.6f} dBm\n"
                             "f: downlink beams, S/s: sensing covariances/vectors, w: uplink rx, u: sensing rx")
    res.runs[0].trace.write_csv(out / "trace.csv")
    for s, run in enumerate(res.runs[1:], start=2):
        run.trace.write_csv(out / f"trace_slot{s}.csv")
    print(f"{scheme.value}: {obj:.4f} dBm in {res.iterations} AO iterations, worst slack {res.worst_slack:.2e}")
    return EXIT_OK


def cmd_beampattern(args) -> int:
    cfg = _load(args)
    grid = PolarGrid.parse(args.grid) if args.grid else PolarGrid.default()
    out = _out_dir(args)
    res = run_scheme(cfg, Scheme.FD)
    bf = res.runs[0].beamformers
    sc = cfg.scenario
    which = {"combined", "uplink", "range-cut"} if args.which == "all" else {args.which}
    if "combined" in which and sc.M:
        write_grid_csv(out / "combined.csv", combined_grid(sc, bf, grid))
    if "uplink" in which and sc.L:
        write_grid_csv(out / "uplink.csv", uplink_grid(sc, bf, grid))
    if "range-cut" in which and sc.M:
        write_range_cut_csv(out / "range_cut.csv", range_cut(sc, bf, args.angle, grid.range_m))
    print(f"beampatterns written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    variable = args.variable or (cfg.sweep.variable if cfg.sweep else None)
    values = sweep_values(args.values) if args.values else (cfg.sweep.values if cfg.sweep else None)
    if not variable or not values:
        raise UsageError("sweep needs --variable and --values (or a [sweep] section in the config)")
    if variable not in SWEEP_VARIABLES:
        raise UsageError(f"unknown sweep variable {variable!r}; choose from {', '.join(SWEEP_VARIABLES)}")
    out = _out_dir(args)
    rows = run_sweep(cfg, variable, values, parse_schemes(args.scheme), workers=args.workers)
    write_results_csv(out / "results.csv", rows, timing=args.timing)
    failed = [r for r in rows if not r.feasible]
    for r in failed:
        print(f"{r.scheme} @ {variable}={r.sweep_value:g}: {r.error}", file=sys.stderr)
    print(f"{len(rows)} rows written to {out / 'results.csv'} ({len(failed)} failed)")
    return EXIT_OK


def cmd_precheck(args) -> int:
    cfg = _load(args)
    report = feasibility_precheck(cfg.scenario, build_channel_set(cfg.scenario))
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfisac", description="Near-field full-duplex ISAC beamforming optimizer.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, help="TOML config path or bundled config name")
        if out:
            sp.add_argument("--out", default="out", help="output directory (default: out)")

    s = sub.add_parser("solve", help="run one scheme and write results, beamformers and trace")
    common(s)
    s.add_argument("--scheme", default="FD", help="FD, HD, CommOnly or FarField (default FD)")
    s.add_argument("--timing", action="store_true", help="fill the wall_ms column (breaks byte-identical output)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("beampattern", help="solve, then write beampattern grids")
    common(b)
    b.add_argument("--which", choices=["combined", "uplink", "range-cut", "all"], default="all")
    b.add_argument("--grid", help="tmin:tmax:step,rmin:rmax:step in degrees and meters "
                                  "(write --grid=-90:... when tmin is negative)")
    b.add_argument("--angle", type=float, default=0.0, help="angle of the range cut in degrees (default 0)")
    b.set_defaults(func=cmd_beampattern)

    w = sub.add_parser("sweep", help="compare schemes across a swept parameter")
    common(w)
    w.add_argument("--variable", help=f"one of {', '.join(SWEEP_VARIABLES)}")
    w.add_argument("--values", help="comma list or start:stop:step (stop inclusive)")
    w.add_argument("--scheme", help="comma list of schemes (default: all four)")
    w.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    w.add_argument("--timing", action="store_true", help="fill the wall_ms column (breaks byte-identical output)")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("precheck", help="report uplink SINR caps and near-field violations")
    common(c, out=False)
    c.set_defaults(func=cmd_precheck)
    return p


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("NFISAC_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, FAILURES):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleScenario, MismatchInfeasible) as exc:
        binding = getattr(exc, "binding", [])
        print(f"infeasible: {exc}", file=sys.stderr)
        if binding:
            print("binding constraints: " + ", ".join(binding), file=sys.stderr)
        return EXIT_INFEASIBLE
    except FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
