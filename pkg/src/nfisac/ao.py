"""Alternating optimization of receive filters and transmit covariances."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .channel import ChannelSet
from .metrics import BeamformerSet, transmit_covariance
from .receive import RxDesignInputs, optimal_sensing_rx, optimal_uplink_rx
from .scenario import Scenario, dbm2watt, lin2db, watt2dbm
from .transmit import (DESIGN_SDP_SETTINGS, DesignInputs, ExtractionReport, RankOneExtraction,
                       TransmitDesignError, TransmitSolution, extract_rank_one, solve_transmit,
                       verify_extraction)

log = logging.getLogger(__name__)


class InfeasibleScenario(RuntimeError):
    """The SINR requirements cannot be met; ``binding`` names the culprits."""

    def __init__(self, message: str, binding: list[str] | None = None):
        super().__init__(message)
        self.binding = binding or []


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class AoSettings:
    epsilon: float = 1e-4
    max_iterations: int = 50
    init_power_dbm: float = 30.0
    sdp: sdp.SdpSettings = DESIGN_SDP_SETTINGS

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class AoRecord:
    iteration: int
    objective: float          # watts
    worst_slack: float        # min over rows of -(row value)/(1+|b|) in the SDP
    status: str
    sdp_iterations: int
    wall_ms: float


@dataclass
class AoTrace:
    records: list[AoRecord] = field(default_factory=list)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def is_monotone(self, rel: float = 1e-6) -> bool:
        p = self.objectives
        return bool(np.all(p[1:] <= p[:-1] * (1.0 + rel) + 1e-300))

    def write_csv(self, path_or_file):
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["iteration", "objective_dBm", "worst_slack", "status"])
            for r in self.records:
                obj = f"{watt2dbm(r.objective):.9f}" if r.objective > 0 else "-inf"
                wr.writerow([r.iteration, obj, f"{r.worst_slack:.6e}", r.status])
        finally:
            if own:
                fh.close()


@dataclass
class AoResult:
    beamformers: BeamformerSet
    trace: AoTrace
    objective: float
    converged: bool
    extraction: RankOneExtraction
    report: ExtractionReport
    transmit: TransmitSolution | None

    @property
    def status(self) -> str:
        return "Converged" if self.converged else "MaxIterations"

    @property
    def iterations(self) -> int:
        return len(self.trace.records)

    @property
    def objective_dbm(self) -> float:
        return float(watt2dbm(self.objective)) if self.objective > 0 else -np.inf


def initialize(inputs: DesignInputs, settings: AoSettings = AoSettings()) -> BeamformerSet:
    """Matched-filter transmit beams sharing ``init_power`` equally."""
    ch = inputs.channels
    n = ch.n_tx
    beams = [h / np.linalg.norm(h) for h in ch.downlink]
    sens = [np.outer(a, a.conj()) / np.vdot(a, a).real for a in ch.target_tx[:inputs.M]]
    count = len(beams) + len(sens)
    if count == 0:
        return BeamformerSet(n_tx=n)
    scale = float(dbm2watt(settings.init_power_dbm)) / count
    return BeamformerSet(
        tx_users=[np.sqrt(scale) * f for f in beams],
        tx_sensing_cov=[scale * s for s in sens],
        n_tx=n,
    )


def receive_step(inputs: DesignInputs, r_x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    rx_in = RxDesignInputs(inputs.channels, r_x, inputs.powers)
    w = [optimal_uplink_rx(l, rx_in) for l in range(inputs.L)]
    u = [optimal_sensing_rx(m, rx_in) for m in range(inputs.M)]
    return w, u


def _worst_row_slack(ts: TransmitSolution) -> float:
    prob = ts.formulation.problem
    if not prob.constraints:
        return 0.0
    vals = prob.constraint_values(ts.F + ts.S)
    scale = np.array([max(abs(c.b), 1e-300) for c in prob.constraints])
    return float(np.min(-vals / scale))


def _zero_power_solution(inputs: DesignInputs, w, u) -> TransmitSolution:
    """No transmit variables: only the uplink rows remain, evaluated at R = 0."""
    from .transmit import formulate
    form = formulate(inputs, w, u)
    sol = sdp.solve(form.problem)
    if not sol.ok:
        raise TransmitDesignError(sol.status, [form.label(i) for i in np.flatnonzero(
            form.problem.constraint_values([]) > 0)], sol, sol.message)
    return TransmitSolution([], [], 0.0, sol.status, form, sol)


def run_inputs(inputs: DesignInputs, settings: AoSettings = AoSettings()) -> AoResult:
    """Run the AO loop on prepared design inputs."""
    n = inputs.channels.n_tx
    bf0 = initialize(inputs, settings)
    r_x = transmit_covariance(bf0)
    trace = AoTrace()
    prev = None
    converged = False
    ts = None
    w = u = None
    for it in range(1, settings.max_iterations + 1):
        t0 = time.perf_counter()
        w, u = receive_step(inputs, r_x)
        try:
            ts = _transmit(inputs, w, u, settings, first=(it == 1))
        except TransmitDesignError as exc:
            if it == 1 and exc.status is sdp.SdpStatus.INFEASIBLE:
                names = exc.binding or ["unknown constraint"]
                raise InfeasibleScenario(f"SINR targets unreachable; binding: {', '.join(names)}", names) from exc
            if exc.status is sdp.SdpStatus.INFEASIBLE:
                raise InfeasibleScenario(f"transmit step infeasible at iteration {it}: {exc}", exc.binding) from exc
            raise NumericalFailure(str(exc)) from exc
        obj = ts.objective
        trace.records.append(AoRecord(it, obj, _worst_row_slack(ts), ts.status.value,
                                      ts.sdp_solution.iterations, 1e3 * (time.perf_counter() - t0)))
        log.info("AO iteration %d: %.6f dBm", it, watt2dbm(obj) if obj > 0 else -np.inf)
        r_x = ts.r_x if ts.F or ts.S else np.zeros((n, n), dtype=complex)
        if prev is not None:
            change = abs(obj - prev) / prev if prev > 0 else (0.0 if obj == 0 else np.inf)
            if change < settings.epsilon:
                converged = True
                break
        prev = obj

    extraction = extract_rank_one(ts.F, ts.S, inputs.channels)
    report = verify_extraction(extraction, inputs, w, u)
    bf = extraction.beamformers(w, u)
    return AoResult(bf, trace, ts.objective, converged, extraction, report, ts)


def _transmit(inputs, w, u, settings, first):
    if inputs.K + inputs.M == 0:
        return _zero_power_solution(inputs, w, u)
    try:
        return solve_transmit(inputs, w, u, settings.sdp)
    except TransmitDesignError as exc:
        infeasible = exc.status is sdp.SdpStatus.INFEASIBLE
        if first and infeasible:
            raise
        # a late infeasible verdict may be a tolerance artifact: look closer; a stall
        # means the precision floor was hit: accept the standard tolerances instead
        retry = settings.sdp.tightened() if infeasible else settings.sdp.relaxed()
        log.warning("transmit step failed (%s); retrying with %s tolerances", exc,
                    "tightened" if infeasible else "standard")
        return solve_transmit(inputs, w, u, retry)


def run(scenario: Scenario, channels: ChannelSet, settings: AoSettings = AoSettings(),
        sense: bool = True) -> AoResult:
    return run_inputs(DesignInputs.from_scenario(scenario, channels, sense), settings)


@dataclass
class PrecheckReport:
    uplink_caps: np.ndarray            # interference-free uplink SINR caps (linear)
    uplink_flags: list[str]
    near_field_flags: list[str]
    rayleigh_distance: float

    @property
    def ok(self) -> bool:
        return not self.uplink_flags

    def lines(self) -> list[str]:
        out = [f"rayleigh distance: {self.rayleigh_distance:.3f} m"]
        for l, cap in enumerate(self.uplink_caps):
            out.append(f"uplink[{l}] interference-free SINR cap: {lin2db(cap):.2f} dB")
        out += [f"FLAG {f}" for f in self.uplink_flags + self.near_field_flags]
        return out


def feasibility_precheck(scenario: Scenario, channels: ChannelSet) -> PrecheckReport:
    pw = scenario.powers
    caps = np.array([p * np.vdot(h, h).real / pw.noise_bs for p, h in zip(pw.uplink_tx, channels.uplink)])
    flags = [f"uplink[{l}] threshold {lin2db(t):.2f} dB exceeds cap {lin2db(c):.2f} dB"
             for l, (t, c) in enumerate(zip(scenario.tau_ul, caps)) if t > c]
    nf = [f"{name} beyond the Rayleigh distance" for name in scenario.beyond_rayleigh()]
    return PrecheckReport(caps, flags, nf, max(scenario.tx.rayleigh_distance, scenario.rx.rayleigh_distance))
