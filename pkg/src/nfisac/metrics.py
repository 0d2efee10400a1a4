"""Transmit covariance, SINRs, transmit power and beampatterns."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .scenario import PowerLevels


@dataclass
class BeamformerSet:
    """Transmit and receive beamformers of one design.

    ``tx_residual`` holds sensing-covariance energy that is not attributed to
    any single target (trailing eigenpairs after rank-one extraction).  It is
    part of the transmitted covariance.
    """

    tx_users: list[np.ndarray] = field(default_factory=list)
    tx_sensing_cov: list[np.ndarray] = field(default_factory=list)
    tx_sensing_vec: list[np.ndarray] | None = None
    rx_uplink: list[np.ndarray] = field(default_factory=list)
    rx_sensing: list[np.ndarray] = field(default_factory=list)
    tx_residual: np.ndarray | None = None
    n_tx: int | None = None

    def _dim(self) -> int:
        for v in self.tx_users:
            return len(v)
        for s in self.tx_sensing_cov:
            return s.shape[0]
        if self.tx_residual is not None:
            return self.tx_residual.shape[0]
        if self.n_tx is None:
            raise ValueError("empty beamformer set needs n_tx")
        return self.n_tx


def transmit_covariance(bf: BeamformerSet) -> np.ndarray:
    n = bf._dim()
    r = np.zeros((n, n), dtype=complex)
    for f in bf.tx_users:
        r += np.outer(f, f.conj())
    for s in bf.tx_sensing_cov:
        r += s
    if bf.tx_residual is not None:
        r += bf.tx_residual
    return 0.5 * (r + r.conj().T)


def total_power(bf: BeamformerSet) -> float:
    p = sum(float(np.vdot(f, f).real) for f in bf.tx_users)
    p += sum(float(np.trace(s).real) for s in bf.tx_sensing_cov)
    if bf.tx_residual is not None:
        p += float(np.trace(bf.tx_residual).real)
    return p


def _quad(x: np.ndarray, m: np.ndarray) -> float:
    return float(np.vdot(x, m @ x).real)


def downlink_sinr(k: int, channels: ChannelSet, bf: BeamformerSet, powers: PowerLevels) -> float:
    h = channels.downlink[k]
    gains = np.array([abs(np.vdot(h, f)) ** 2 for f in bf.tx_users])
    interference = gains.sum() - gains[k]
    interference += sum(_quad(h, s) for s in bf.tx_sensing_cov)
    if bf.tx_residual is not None:
        interference += _quad(h, bf.tx_residual)
    return float(gains[k] / (interference + powers.noise_dl[k]))


def _check_nonzero(v: np.ndarray, what: str):
    if not np.any(v):
        raise ValueError(f"{what} is the zero vector")


def uplink_sinr(l: int, channels: ChannelSet, bf: BeamformerSet, powers: PowerLevels,
                r_x: np.ndarray | None = None) -> float:
    w = bf.rx_uplink[l]
    _check_nonzero(w, f"uplink receive beamformer {l}")
    if r_x is None:
        r_x = transmit_covariance(bf)
    p = powers.uplink_tx
    proj = np.array([abs(np.vdot(w, h)) ** 2 for h in channels.uplink])
    aw = channels.agg_a.conj().T @ w
    denom = (p @ proj - p[l] * proj[l]) + _quad(aw, r_x) + powers.noise_bs * np.vdot(w, w).real
    return float(p[l] * proj[l] / denom)


def sensing_sinr(m: int, channels: ChannelSet, bf: BeamformerSet, powers: PowerLevels,
                 r_x: np.ndarray | None = None) -> float:
    u = bf.rx_sensing[m]
    _check_nonzero(u, f"sensing receive beamformer {m}")
    if r_x is None:
        r_x = transmit_covariance(bf)
    gu = channels.targets[m].conj().T @ u
    bu = channels.agg_b[m].conj().T @ u
    p = powers.uplink_tx
    ul = sum(pl * abs(np.vdot(u, h)) ** 2 for pl, h in zip(p, channels.uplink))
    denom = ul + _quad(bu, r_x) + powers.noise_bs * np.vdot(u, u).real
    return float(_quad(gu, r_x) / denom)


def sensing_sinr_factored(m: int, channels: ChannelSet, bf: BeamformerSet, powers: PowerLevels,
                          r_x: np.ndarray | None = None) -> float:
    """Same quantity as :func:`sensing_sinr`, using the rank-one target channel."""
    u = bf.rx_sensing[m]
    if r_x is None:
        r_x = transmit_covariance(bf)
    a_t, a_r = channels.target_tx[m], channels.target_rx[m]
    num = channels.target_gains[m] * _quad(a_t, r_x) * abs(np.vdot(u, a_r)) ** 2
    bu = channels.agg_b[m].conj().T @ u
    ul = sum(pl * abs(np.vdot(u, h)) ** 2 for pl, h in zip(powers.uplink_tx, channels.uplink))
    return float(num / (ul + _quad(bu, r_x) + powers.noise_bs * np.vdot(u, u).real))


def all_sinrs(channels: ChannelSet, bf: BeamformerSet, powers: PowerLevels) -> dict[str, np.ndarray]:
    r_x = transmit_covariance(bf)
    return {
        "downlink": np.array([downlink_sinr(k, channels, bf, powers) for k in range(len(channels.downlink))]),
        "uplink": np.array([uplink_sinr(l, channels, bf, powers, r_x) for l in range(len(channels.uplink))]),
        "sensing": np.array([sensing_sinr(m, channels, bf, powers, r_x) for m in range(len(bf.rx_sensing))]),
    }


def combined_beampattern(u: np.ndarray, r_x: np.ndarray, a_t: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """Expected combined transmit/receive gain ``|u^H a_r|^2 * a_t^H R_x a_t``.

    ``a_t``/``a_r`` may be single responses (1-D) or stacks of responses with
    the grid along the first axis.
    """
    _check_nonzero(u, "sensing receive beamformer")
    a_t = np.atleast_2d(a_t)
    a_r = np.atleast_2d(a_r)
    rx = np.abs(a_r @ u.conj()) ** 2
    tx = np.einsum("gi,ij,gj->g", a_t.conj(), r_x, a_t).real
    out = rx * np.maximum(tx, 0.0)
    return out if out.size > 1 else out[0]


def transmit_beampattern(r_x: np.ndarray, a_t: np.ndarray) -> np.ndarray:
    a_t = np.atleast_2d(a_t)
    return np.maximum(np.einsum("gi,ij,gj->g", a_t.conj(), r_x, a_t).real, 0.0)


def uplink_rx_beampattern(w: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """``|w^H a_r|^2`` for one response or a stack of responses."""
    _check_nonzero(w, "uplink receive beamformer")
    a_r = np.atleast_2d(a_r)
    out = np.abs(a_r @ w.conj()) ** 2
    return out if out.size > 1 else out[0]
