"""Figure-style experiments: beampattern grids, scheme comparisons and sweeps.

Nothing here plots.  Every function returns arrays or rows that the CLI
writes as CSV; any external plotter can draw them.
"""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from . import baselines
from .ao import InfeasibleScenario, NumericalFailure
from .baselines import BaselineResult, MismatchInfeasible, Scheme
from .channel import build_channel_set, near_field_responses
from .config import ExperimentConfig, apply_sweep_value, from_dict
from .metrics import BeamformerSet, transmit_covariance
from .scenario import Scenario, watt2dbm
from .transmit import DegenerateBeam, TransmitDesignError

log = logging.getLogger(__name__)

GAIN_FLOOR_DB = -300.0
RESULT_HEADER = ["scheme", "sweep_value", "objective_dbm", "feasible", "iterations", "worst_slack", "wall_ms"]


# ---------------------------------------------------------------------------
# grids and beampatterns
# ---------------------------------------------------------------------------

def _axis(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0 or stop < start:
        raise ValueError(f"bad axis {start}:{stop}:{step}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 10)


@dataclass(frozen=True)
class PolarGrid:
    theta_deg: np.ndarray
    range_m: np.ndarray

    @classmethod
    def default(cls) -> "PolarGrid":
        return cls(_axis(-90.0, 90.0, 0.5), _axis(1.0, 15.0, 0.05))

    @classmethod
    def parse(cls, spec: str) -> "PolarGrid":
        """``"tmin:tmax:tstep,rmin:rmax:rstep"`` (degrees, meters)."""
        try:
            th, r = spec.split(",")
            t0, t1, ts = (float(v) for v in th.split(":"))
            r0, r1, rs = (float(v) for v in r.split(":"))
        except ValueError:
            raise ValueError(f"bad grid {spec!r}; expected tmin:tmax:step,rmin:rmax:step") from None
        if not (-90 <= t0 <= t1 <= 90) or r0 <= 0:
            raise ValueError(f"grid {spec!r} outside -90..90 deg or non-positive range")
        return cls(_axis(t0, t1, ts), _axis(r0, r1, rs))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.theta_deg), len(self.range_m)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (range, angle-in-radians), theta-major."""
        t, r = np.meshgrid(np.deg2rad(self.theta_deg), self.range_m, indexing="ij")
        return r.ravel(), t.ravel()


def _chunks(n: int, size: int = 8192):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def combined_patterns(scenario: Scenario, bf: BeamformerSet, ranges, angles) -> np.ndarray:
    """Expected combined gain per target at the given points, shape ``(M, G)``."""
    r_x = transmit_covariance(bf)
    ranges, angles = np.broadcast_arrays(np.asarray(ranges, float), np.asarray(angles, float))
    ranges, angles = ranges.ravel(), angles.ravel()
    out = np.empty((len(bf.rx_sensing), ranges.size))
    for sl in _chunks(ranges.size):
        a_t = near_field_responses(scenario.tx, ranges[sl], angles[sl])
        a_r = a_t if scenario.rx == scenario.tx else near_field_responses(scenario.rx, ranges[sl], angles[sl])
        tx = np.maximum(np.einsum("gi,ij,gj->g", a_t.conj(), r_x, a_t).real, 0.0)
        for m, u in enumerate(bf.rx_sensing):
            out[m, sl] = np.abs(a_r @ u.conj()) ** 2 * tx
    return out


def uplink_patterns(scenario: Scenario, bf: BeamformerSet, ranges, angles) -> np.ndarray:
    """``|w_l^H a_r(r, theta)|^2`` per uplink user, shape ``(L, G)``."""
    ranges, angles = np.broadcast_arrays(np.asarray(ranges, float), np.asarray(angles, float))
    ranges, angles = ranges.ravel(), angles.ravel()
    out = np.empty((len(bf.rx_uplink), ranges.size))
    for sl in _chunks(ranges.size):
        a_r = near_field_responses(scenario.rx, ranges[sl], angles[sl])
        for l, w in enumerate(bf.rx_uplink):
            out[l, sl] = np.abs(a_r @ w.conj()) ** 2
    return out


def to_db(gain, reference: float | None = None) -> np.ndarray:
    """Gain in dB relative to ``reference`` (default: its own maximum)."""
    gain = np.asarray(gain, dtype=float)
    ref = float(np.max(gain)) if reference is None else reference
    if not ref > 0:
        return np.full(gain.shape, GAIN_FLOOR_DB)
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(gain / ref), GAIN_FLOOR_DB)


@dataclass
class PatternGrid:
    """Named patterns on a polar grid, each of shape ``grid.shape``."""

    grid: PolarGrid
    patterns: dict[str, np.ndarray]   # linear gains

    def db(self, name: str) -> np.ndarray:
        return to_db(self.patterns[name])

    def angular_profile_db(self, name: str) -> np.ndarray:
        """Peak over range for every angle, dB relative to the grid maximum."""
        return to_db(self.patterns[name].max(axis=1))


def combined_grid(scenario: Scenario, bf: BeamformerSet, grid: PolarGrid | None = None) -> PatternGrid:
    grid = grid or PolarGrid.default()
    r, t = grid.points()
    per_m = combined_patterns(scenario, bf, r, t).reshape(len(bf.rx_sensing), *grid.shape)
    pats = {f"target{m}": p for m, p in enumerate(per_m)}
    pats["sum"] = per_m.sum(axis=0)
    return PatternGrid(grid, pats)


def uplink_grid(scenario: Scenario, bf: BeamformerSet, grid: PolarGrid | None = None) -> PatternGrid:
    grid = grid or PolarGrid.default()
    r, t = grid.points()
    per_l = uplink_patterns(scenario, bf, r, t).reshape(len(bf.rx_uplink), *grid.shape)
    return PatternGrid(grid, {f"uplink{l}": p for l, p in enumerate(per_l)})


@dataclass
class RangeCut:
    angle_deg: float
    range_m: np.ndarray
    patterns: dict[str, np.ndarray]

    def db(self, name: str = "sum") -> np.ndarray:
        return to_db(self.patterns[name])


def range_cut(scenario: Scenario, bf: BeamformerSet, angle_deg: float = 0.0,
              ranges: np.ndarray | None = None) -> RangeCut:
    ranges = PolarGrid.default().range_m if ranges is None else np.asarray(ranges, float)
    per_m = combined_patterns(scenario, bf, ranges, np.deg2rad(angle_deg))
    pats = {f"target{m}": p for m, p in enumerate(per_m)}
    pats["sum"] = per_m.sum(axis=0)
    return RangeCut(angle_deg, ranges, pats)


def pattern_peaks(values_db: np.ndarray, prominence_db: float) -> tuple[np.ndarray, np.ndarray]:
    """Local maxima of a 1-D dB curve with at least ``prominence_db`` prominence.

    The ends of the curve count as maxima when they rise above their
    neighbour, so a pattern still climbing at the grid edge is not missed.
    Returns (indices, prominences).
    """
    padded = np.concatenate([[-np.inf], np.asarray(values_db, float), [-np.inf]])
    idx, props = find_peaks(padded, prominence=prominence_db)
    return idx - 1, props["prominences"]


def write_grid_csv(path, pg: PatternGrid) -> None:
    names = list(pg.patterns)
    dbs = [pg.db(n) for n in names]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r_m", "theta_deg", *[f"gain_db_{n}" for n in names]])
        for i, th in enumerate(pg.grid.theta_deg):
            for j, r in enumerate(pg.grid.range_m):
                wr.writerow([f"{r:.4f}", f"{th:.4f}", *[f"{d[i, j]:.6f}" for d in dbs]])


def write_range_cut_csv(path, cut: RangeCut) -> None:
    names = list(cut.patterns)
    dbs = [cut.db(n) for n in names]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r_m", "theta_deg", *[f"gain_db_{n}" for n in names]])
        for j, r in enumerate(cut.range_m):
            wr.writerow([f"{r:.4f}", f"{cut.angle_deg:.4f}", *[f"{d[j]:.6f}" for d in dbs]])


# ---------------------------------------------------------------------------
# schemes and sweeps
# ---------------------------------------------------------------------------

@dataclass
class ResultRow:
    scheme: str
    sweep_value: float | None
    objective_dbm: float
    feasible: bool
    iterations: int
    worst_slack: float
    wall_ms: float | None = None
    error: str = ""

    def cells(self, timing: bool = False) -> list[str]:
        return [
            self.scheme,
            "" if self.sweep_value is None else f"{self.sweep_value:g}",
            f"{self.objective_dbm:.6f}" if np.isfinite(self.objective_dbm) else ("-inf" if self.feasible else "nan"),
            "true" if self.feasible else "false",
            str(self.iterations),
            f"{self.worst_slack:.3e}" if np.isfinite(self.worst_slack) else "nan",
            f"{self.wall_ms:.1f}" if timing and self.wall_ms is not None else "",
        ]


def write_results_csv(path, rows: list[ResultRow], timing: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(RESULT_HEADER)
        for row in rows:
            wr.writerow(row.cells(timing))


def parse_schemes(spec: str | None) -> list[Scheme]:
    if not spec:
        return list(Scheme)
    lookup = {s.value.lower(): s for s in Scheme}
    out = []
    for name in spec.split(","):
        key = name.strip().lower()
        if key not in lookup:
            raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(s.value for s in Scheme)}")
        out.append(lookup[key])
    return out


def run_scheme(cfg: ExperimentConfig, scheme: Scheme) -> BaselineResult:
    """One scheme on the config's scenario; raises on infeasible/numerical trouble."""
    sc = cfg.scenario
    channels = build_channel_set(sc)
    if scheme is Scheme.FD:
        return baselines.run_fd(sc, cfg.ao, channels)
    if scheme is Scheme.HD:
        return baselines.run_hd(sc, cfg.ao, channels)
    if scheme is Scheme.COMM_ONLY:
        return baselines.run_comm_only(sc, cfg.ao, channels)
    return baselines.run_far_field(sc, cfg.ao, channels, protocol=cfg.far_field.protocol,
                                   reoptimize_rx=cfg.far_field.reoptimize_rx)


FAILURES = (InfeasibleScenario, MismatchInfeasible, NumericalFailure, TransmitDesignError, DegenerateBeam,
            np.linalg.LinAlgError)


def result_row(cfg: ExperimentConfig, scheme: Scheme, sweep_value: float | None = None) -> ResultRow:
    t0 = time.perf_counter()
    try:
        res = run_scheme(cfg, scheme)
    except FAILURES as exc:
        log.warning("%s at %s: %s", scheme.value, sweep_value, exc)
        return ResultRow(scheme.value, sweep_value, np.nan, False, 0, np.nan,
                         1e3 * (time.perf_counter() - t0), f"{type(exc).__name__}: {exc}")
    obj = watt2dbm(res.objective_watts) if res.objective_watts > 0 else -np.inf
    return ResultRow(scheme.value, sweep_value, float(obj), True, res.iterations, float(res.worst_slack),
                     1e3 * (time.perf_counter() - t0))


def _sweep_task(args):
    raw, variable, value, scheme_value = args
    cfg = from_dict(apply_sweep_value(raw, variable, value))
    return result_row(cfg, Scheme(scheme_value), value)


def run_sweep(cfg: ExperimentConfig, variable: str, values, schemes: list[Scheme] | None = None,
              workers: int = 1) -> list[ResultRow]:
    """Rows ordered by scheme, then sweep value, regardless of completion order."""
    schemes = schemes or list(Scheme)
    tasks = [(cfg.raw, variable, float(v), s.value) for s in schemes for v in values]
    for v in values:   # fail fast on bad values before spawning workers
        from_dict(apply_sweep_value(cfg.raw, variable, float(v)))
    if workers <= 1:
        return [_sweep_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_task, tasks))
