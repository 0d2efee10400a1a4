"""Relaxed transmit design and rank-one beamformer recovery.

With the receive filters fixed, the transmit problem becomes an SDP in the
lifted downlink covariances ``F_k`` and the sensing covariances ``S_m``.  Each
SINR requirement turns into one linear row:

* downlink k   : interference + noise - Tr(H_k F_k) / tau_k <= 0
* uplink l     : other users + Tr(R A^H W_l A) + noise - p_l Tr(H_l W_l) / tau_l <= 0
* sensing m    : users + Tr(R B_m^H U_m B_m) + noise - Tr(R G_m^H U_m G_m) / tau_m <= 0

where ``R = sum F_k + sum S_m``.  After solving, rank-one downlink beams are
read off the relaxed solution without changing the transmit covariance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .channel import ChannelSet
from .metrics import BeamformerSet, all_sinrs
from .scenario import PowerLevels, Scenario

#: Settings tight enough that AO objective noise stays well below 1e-6 relative.
DESIGN_SDP_SETTINGS = sdp.SdpSettings(tol_gap=1e-9, tol_feas=1e-9, max_iterations=100)


class DegenerateBeam(ValueError):
    """A relaxed downlink covariance carries no power toward its own user."""


class TransmitDesignError(RuntimeError):
    def __init__(self, status: sdp.SdpStatus, binding: list[str], solution: sdp.SdpSolution | None,
                 message: str = ""):
        text = message or f"transmit SDP ended with status {status.value}"
        if binding:
            text += "; binding: " + ", ".join(binding)
        super().__init__(text)
        self.status = status
        self.binding = binding
        self.solution = solution


@dataclass
class DesignInputs:
    """Everything the transmit step needs besides the receive filters.

    ``sense=False`` drops the sensing covariances and the sensing rows; the
    targets still shape ``A`` and so still interfere with the uplink.
    """

    channels: ChannelSet
    powers: PowerLevels
    tau_dl: np.ndarray
    tau_ul: np.ndarray
    tau_sensing: np.ndarray
    sense: bool = True

    @classmethod
    def from_scenario(cls, scenario: Scenario, channels: ChannelSet, sense: bool = True) -> "DesignInputs":
        return cls(channels, scenario.powers, scenario.tau_dl, scenario.tau_ul, scenario.tau_sensing, sense)

    @property
    def K(self) -> int:
        return len(self.channels.downlink)

    @property
    def L(self) -> int:
        return len(self.channels.uplink)

    @property
    def M(self) -> int:
        return len(self.channels.targets) if self.sense else 0


@dataclass
class SdrFormulation:
    problem: sdp.SdpProblem
    rows: list[tuple[str, int]]   # constraint index -> ("downlink"|"uplink"|"sensing", entity)
    K: int
    M: int

    def label(self, i: int) -> str:
        kind, idx = self.rows[i]
        return f"{kind}[{idx}]"


def _herm(a):
    return 0.5 * (a + a.conj().T)


def build_const1(k: int, inputs: DesignInputs) -> sdp.SdpConstraint:
    h = inputs.channels.downlink[k]
    tau = float(inputs.tau_dl[k])
    if not tau > 0:
        raise ValueError("downlink threshold must be positive")
    hk = _herm(np.outer(h, h.conj()))
    coeffs = [hk.copy() for _ in range(inputs.K + inputs.M)]
    coeffs[k] = -hk / tau
    return sdp.SdpConstraint(coeffs, float(inputs.powers.noise_dl[k]), f"downlink[{k}]")


def build_const2(l: int, inputs: DesignInputs, w: np.ndarray) -> sdp.SdpConstraint:
    if not np.any(w):
        raise ValueError("uplink receive beamformer is zero")
    ch, pw = inputs.channels, inputs.powers
    tau = float(inputs.tau_ul[l])
    if not tau > 0:
        raise ValueError("uplink threshold must be positive")
    proj = np.array([abs(np.vdot(w, h)) ** 2 for h in ch.uplink])
    p = pw.uplink_tx
    b = (p @ proj - p[l] * proj[l]) + pw.noise_bs * np.vdot(w, w).real - p[l] / tau * proj[l]
    aw = ch.agg_a.conj().T @ w
    coef = _herm(np.outer(aw, aw.conj()))
    return sdp.SdpConstraint([coef.copy() for _ in range(inputs.K + inputs.M)], float(b), f"uplink[{l}]")


def build_const3(m: int, inputs: DesignInputs, u: np.ndarray) -> sdp.SdpConstraint:
    if not np.any(u):
        raise ValueError("sensing receive beamformer is zero")
    ch, pw = inputs.channels, inputs.powers
    tau = float(inputs.tau_sensing[m])
    if not tau > 0:
        raise ValueError("sensing threshold must be positive")
    bu = ch.agg_b[m].conj().T @ u
    gu = ch.targets[m].conj().T @ u
    coef = _herm(np.outer(bu, bu.conj()) - np.outer(gu, gu.conj()) / tau)
    b = sum(pl * abs(np.vdot(u, h)) ** 2 for pl, h in zip(pw.uplink_tx, ch.uplink))
    b += pw.noise_bs * np.vdot(u, u).real
    return sdp.SdpConstraint([coef.copy() for _ in range(inputs.K + inputs.M)], float(b), f"sensing[{m}]")


def formulate(inputs: DesignInputs, w: list[np.ndarray], u: list[np.ndarray]) -> SdrFormulation:
    n = inputs.channels.n_tx
    nb = inputs.K + inputs.M
    rows, cons = [], []
    for k in range(inputs.K):
        cons.append(build_const1(k, inputs))
        rows.append(("downlink", k))
    for l in range(inputs.L):
        cons.append(build_const2(l, inputs, w[l]))
        rows.append(("uplink", l))
    for m in range(inputs.M):
        cons.append(build_const3(m, inputs, u[m]))
        rows.append(("sensing", m))
    labels = [f"F[{k}]" for k in range(inputs.K)] + [f"S[{m}]" for m in range(inputs.M)]
    problem = sdp.SdpProblem([n] * nb, [np.eye(n, dtype=complex) for _ in range(nb)], cons, labels)
    return SdrFormulation(problem, rows, inputs.K, inputs.M)


@dataclass
class TransmitSolution:
    F: list[np.ndarray]
    S: list[np.ndarray]
    objective: float
    status: sdp.SdpStatus
    formulation: SdrFormulation
    sdp_solution: sdp.SdpSolution

    @property
    def r_x(self) -> np.ndarray:
        n = self.formulation.problem.block_dims[0] if self.formulation.problem.block_dims else 0
        return sum(self.F + self.S, np.zeros((n, n), dtype=complex))


def binding_rows(form: SdrFormulation, sol: sdp.SdpSolution) -> list[str]:
    weights = sol.certificate if sol.certificate is not None else sol.dual
    if weights is None or not len(weights) or not np.any(weights > 0):
        return []
    w = np.asarray(weights) / np.max(weights)
    return [form.label(i) for i in np.flatnonzero(w > 1e-3)]


def solve_transmit(inputs: DesignInputs, w: list[np.ndarray], u: list[np.ndarray],
                   settings: sdp.SdpSettings | None = None) -> TransmitSolution:
    settings = settings or DESIGN_SDP_SETTINGS
    form = formulate(inputs, w, u)
    sol = sdp.solve(form.problem, settings)
    if not sol.ok:
        raise TransmitDesignError(sol.status, binding_rows(form, sol), sol, sol.message)
    blocks = [_herm(x) for x in sol.blocks]
    return TransmitSolution(blocks[:form.K], blocks[form.K:], sol.objective_value, sol.status, form, sol)


# ---------------------------------------------------------------------------
# rank-one recovery
# ---------------------------------------------------------------------------

def _phase_normalize(v: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    """Rotate so the first significant entry is real positive."""
    mag = np.abs(v)
    idx = int(np.flatnonzero(mag > rel * mag.max())[0]) if mag.max() > 0 else 0
    return v * np.exp(-1j * np.angle(v[idx])) if mag[idx] > 0 else v


@dataclass
class RankOneExtraction:
    f_star: list[np.ndarray]
    f_cov: list[np.ndarray]
    sensing_cov_sum: np.ndarray
    sensing_vecs: list[np.ndarray]
    eigenvalues: np.ndarray            # leading M eigenvalues of sensing_cov_sum
    eigenvectors: list[np.ndarray]
    sensing_residual: np.ndarray       # sensing_cov_sum minus its leading M eigen-components
    relaxed_objective: float
    tightness: list[float] = field(default_factory=list)  # lambda_2 / lambda_1 of each F_k*

    @property
    def residual_trace(self) -> float:
        return float(np.trace(self.sensing_residual).real)

    @property
    def total_power(self) -> float:
        return float(sum(np.vdot(f, f).real for f in self.f_star) + np.trace(self.sensing_cov_sum).real)

    def beamformers(self, w: list[np.ndarray], u: list[np.ndarray]) -> BeamformerSet:
        s_cov = [lam * np.outer(v, v.conj()) for lam, v in zip(self.eigenvalues, self.eigenvectors)]
        n = self.sensing_cov_sum.shape[0]
        return BeamformerSet(
            tx_users=list(self.f_star),
            tx_sensing_cov=s_cov,
            tx_sensing_vec=list(self.sensing_vecs),
            rx_uplink=list(w),
            rx_sensing=list(u),
            tx_residual=self.sensing_residual,
            n_tx=n,
        )


def extract_rank_one(F: list[np.ndarray], S: list[np.ndarray], channels: ChannelSet,
                     tol: float = 1e-12) -> RankOneExtraction:
    n = channels.n_tx
    r_x = sum(list(F) + list(S), np.zeros((n, n), dtype=complex))
    f_star, f_cov, tight = [], [], []
    for k, fk in enumerate(F):
        h = channels.downlink[k]
        fh = fk @ h
        gain = float(np.vdot(h, fh).real)
        tr = float(np.trace(fk).real)
        if not gain > tol * max(tr, 0.0) or gain <= 0:
            raise DegenerateBeam(f"downlink[{k}]: h^H F h = {gain:.3e} with Tr(F) = {tr:.3e}")
        f = fh / np.sqrt(gain)
        f_star.append(f)
        f_cov.append(np.outer(f, f.conj()))
        ev = np.linalg.eigvalsh(_herm(fk))
        tight.append(float(ev[-2] / ev[-1]) if n > 1 and ev[-1] > 0 else 0.0)
    s_sum = _herm(r_x - sum(f_cov, np.zeros((n, n), dtype=complex)))
    M = len(S)
    lam, vec = np.linalg.eigh(s_sum)
    order = np.argsort(lam)[::-1][:M]
    lam_m = np.maximum(lam[order], 0.0)
    vecs = [_phase_normalize(vec[:, i]) for i in order]
    lead = sum((l_ * np.outer(v, v.conj()) for l_, v in zip(lam_m, vecs)), np.zeros((n, n), dtype=complex))
    return RankOneExtraction(
        f_star=f_star,
        f_cov=f_cov,
        sensing_cov_sum=s_sum,
        sensing_vecs=[np.sqrt(l_) * v for l_, v in zip(lam_m, vecs)],
        eigenvalues=lam_m,
        eigenvectors=vecs,
        sensing_residual=_herm(s_sum - lead),
        relaxed_objective=float(sum(np.trace(x).real for x in list(F) + list(S))),
        tightness=tight,
    )


@dataclass
class ExtractionReport:
    sinr: dict[str, np.ndarray]
    slack: dict[str, np.ndarray]     # SINR / tau - 1 per requirement
    worst_slack: float
    worst_label: str
    ok: bool


def verify_extraction(extraction: RankOneExtraction, inputs: DesignInputs, w: list[np.ndarray],
                      u: list[np.ndarray], rel_tol: float = 1e-4) -> ExtractionReport:
    """Re-evaluate the exact SINRs of the recovered beamformers."""
    bf = extraction.beamformers(w, u if inputs.sense else [])
    sinr = all_sinrs(inputs.channels, bf, inputs.powers)
    slack = {
        "downlink": sinr["downlink"] / inputs.tau_dl - 1.0 if inputs.K else np.zeros(0),
        "uplink": sinr["uplink"] / inputs.tau_ul - 1.0 if inputs.L else np.zeros(0),
        "sensing": sinr["sensing"] / inputs.tau_sensing[:len(sinr["sensing"])] - 1.0 if inputs.M else np.zeros(0),
    }
    worst, worst_label = np.inf, ""
    for kind, vals in slack.items():
        for i, v in enumerate(vals):
            if v < worst:
                worst, worst_label = float(v), f"{kind}[{i}]"
    return ExtractionReport(sinr, slack, worst, worst_label, bool(worst >= -rel_tol))
