"""Comparison schemes: half-duplex TDD, communication-only and far-field design."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .ao import AoResult, AoSettings, run_inputs
from .channel import ChannelSet, build_channel_set
from .metrics import BeamformerSet, all_sinrs, transmit_covariance
from .receive import RxDesignInputs, optimal_sensing_rx, optimal_uplink_rx
from .scenario import PowerLevels, Scenario
from .transmit import DesignInputs


class Scheme(str, enum.Enum):
    FD = "FD"
    HD = "HD"
    COMM_ONLY = "CommOnly"
    FAR_FIELD = "FarField"


class MismatchInfeasible(RuntimeError):
    """No uniform power scaling makes the far-field design work on the true channels."""


@dataclass
class BaselineResult:
    scheme: Scheme
    objective_watts: float
    feasible: bool = True
    per_slot: tuple[float, float] | None = None
    iterations: int = 0
    worst_slack: float = np.nan
    diagnostics: list[str] = field(default_factory=list)
    runs: list[AoResult] = field(default_factory=list)
    scale: float | None = None     # far-field stage-2 power factor


def hd_threshold(tau_fd):
    """Half-duplex threshold giving the same rate in half the time."""
    tau_fd = np.asarray(tau_fd, dtype=float)
    if np.any(tau_fd < 0):
        raise ValueError("threshold must be non-negative")
    out = (1.0 + tau_fd) ** 2 - 1.0
    return float(out) if out.ndim == 0 else out


def run_fd(scenario: Scenario, settings: AoSettings = AoSettings(), channels: ChannelSet | None = None) -> BaselineResult:
    channels = channels or build_channel_set(scenario)
    res = run_inputs(DesignInputs.from_scenario(scenario, channels), settings)
    return BaselineResult(Scheme.FD, res.objective, iterations=res.iterations,
                          worst_slack=res.report.worst_slack, runs=[res])


def hd_slot_inputs(scenario: Scenario, channels: ChannelSet) -> tuple[DesignInputs, DesignInputs]:
    pw = scenario.powers
    dl = DesignInputs(
        channels=channels.subset(uplink=False),
        powers=PowerLevels(np.zeros(0), pw.noise_dl, pw.noise_bs),
        tau_dl=hd_threshold(scenario.tau_dl) if scenario.K else np.zeros(0),
        tau_ul=np.zeros(0),
        tau_sensing=scenario.tau_sensing,
    )
    ul = DesignInputs(
        channels=channels.subset(downlink=False),
        powers=PowerLevels(pw.uplink_tx, np.zeros(0), pw.noise_bs),
        tau_dl=np.zeros(0),
        tau_ul=hd_threshold(scenario.tau_ul) if scenario.L else np.zeros(0),
        tau_sensing=scenario.tau_sensing,
    )
    return dl, ul


def run_hd(scenario: Scenario, settings: AoSettings = AoSettings(), channels: ChannelSet | None = None) -> BaselineResult:
    channels = channels or build_channel_set(scenario)
    dl_in, ul_in = hd_slot_inputs(scenario, channels)
    r1 = run_inputs(dl_in, settings)
    r2 = run_inputs(ul_in, settings)
    return BaselineResult(
        Scheme.HD, 0.5 * (r1.objective + r2.objective), per_slot=(r1.objective, r2.objective),
        iterations=r1.iterations + r2.iterations,
        worst_slack=min(r1.report.worst_slack, r2.report.worst_slack), runs=[r1, r2])


def run_comm_only(scenario: Scenario, settings: AoSettings = AoSettings(),
                  channels: ChannelSet | None = None) -> BaselineResult:
    channels = channels or build_channel_set(scenario)
    res = run_inputs(DesignInputs.from_scenario(scenario, channels, sense=False), settings)
    return BaselineResult(Scheme.COMM_ONLY, res.objective, iterations=res.iterations,
                          worst_slack=res.report.worst_slack, runs=[res])


def scaled(bf: BeamformerSet, t: float) -> BeamformerSet:
    """Every transmit quantity multiplied by power factor ``t``."""
    return replace(
        bf,
        tx_users=[np.sqrt(t) * f for f in bf.tx_users],
        tx_sensing_cov=[t * s for s in bf.tx_sensing_cov],
        tx_sensing_vec=None if bf.tx_sensing_vec is None else [np.sqrt(t) * s for s in bf.tx_sensing_vec],
        tx_residual=None if bf.tx_residual is None else t * bf.tx_residual,
    )


def _evaluate(scenario: Scenario, channels: ChannelSet, bf: BeamformerSet, t: float,
              reoptimize_rx: bool) -> dict[str, np.ndarray]:
    bft = scaled(bf, t)
    if reoptimize_rx:
        rx_in = RxDesignInputs(channels, transmit_covariance(bft), scenario.powers)
        bft = replace(bft, rx_uplink=[optimal_uplink_rx(l, rx_in) for l in range(scenario.L)],
                      rx_sensing=[optimal_sensing_rx(m, rx_in) for m in range(scenario.M)])
    sinr = all_sinrs(channels, bft, scenario.powers)
    return {
        "downlink": sinr["downlink"] / scenario.tau_dl - 1.0,
        "uplink": sinr["uplink"] / scenario.tau_ul - 1.0,
        "sensing": sinr["sensing"] / scenario.tau_sensing - 1.0,
    }


def mismatch_scale(scenario: Scenario, channels: ChannelSet, bf: BeamformerSet, *, reoptimize_rx: bool = False,
                   tol_db: float = 1e-3, cap_db: float = 40.0, rel_tol: float = 1e-9) -> float:
    """Smallest power factor ``t >= 1`` meeting every SINR on ``channels``.

    Downlink and sensing SINRs grow with ``t`` while uplink SINRs shrink, so
    the feasible set is an interval; bisection runs on the growing group and
    the shrinking group is checked at the result.
    """
    def grows_ok(t):
        s = _evaluate(scenario, channels, bf, t, reoptimize_rx)
        return min(np.min(s["downlink"], initial=np.inf), np.min(s["sensing"], initial=np.inf)) >= -rel_tol

    def uplink_ok(t):
        s = _evaluate(scenario, channels, bf, t, reoptimize_rx)
        return np.min(s["uplink"], initial=np.inf) >= -rel_tol

    lo, hi = 0.0, cap_db
    if not grows_ok(10 ** (lo / 10)):
        if not grows_ok(10 ** (hi / 10)):
            raise MismatchInfeasible(f"downlink/sensing SINRs stay below threshold up to +{cap_db:g} dB")
        while hi - lo > tol_db:
            mid = 0.5 * (lo + hi)
            if grows_ok(10 ** (mid / 10)):
                hi = mid
            else:
                lo = mid
        lo = hi
    t = 10 ** (lo / 10)
    if not uplink_ok(t):
        raise MismatchInfeasible(f"uplink SINR falls below threshold at the required scale {lo:.3f} dB")
    return t


def run_far_field(scenario: Scenario, settings: AoSettings = AoSettings(), channels: ChannelSet | None = None,
                  protocol: str = "mismatch", reoptimize_rx: bool = False) -> BaselineResult:
    """Design on planar-wave channels.

    ``protocol="mismatch"`` then rescales the design until it works on the
    true near-field channels; ``protocol="ff-world"`` reports the power the
    far-field model believes it needs.
    """
    if protocol not in ("mismatch", "ff-world"):
        raise ValueError(f"unknown far-field protocol {protocol!r}")
    ff_channels = build_channel_set(scenario, model="far")
    res = run_inputs(DesignInputs.from_scenario(scenario, ff_channels), settings)
    if protocol == "ff-world":
        return BaselineResult(Scheme.FAR_FIELD, res.objective, iterations=res.iterations,
                              worst_slack=res.report.worst_slack, runs=[res], scale=1.0)
    channels = channels or build_channel_set(scenario)
    t = mismatch_scale(scenario, channels, res.beamformers, reoptimize_rx=reoptimize_rx)
    slack = _evaluate(scenario, channels, res.beamformers, t, reoptimize_rx)
    worst = min(float(np.min(v, initial=np.inf)) for v in slack.values())
    return BaselineResult(Scheme.FAR_FIELD, t * res.objective, iterations=res.iterations,
                          worst_slack=worst, runs=[res], scale=t)
