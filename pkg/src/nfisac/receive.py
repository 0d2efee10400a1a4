"""Closed-form SINR-optimal receive beamformers.

Both the uplink and the sensing SINR are generalized Rayleigh quotients whose
numerator has rank one, so the maximizer is ``Q^{-1} g`` with ``Q`` the
interference-plus-noise (INN) matrix and ``g`` the desired-signal direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet
from .scenario import PowerLevels


@dataclass
class RxDesignInputs:
    channels: ChannelSet
    r_x: np.ndarray
    powers: PowerLevels


def _hermitian(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def _uplink_sum(channels: ChannelSet, powers: PowerLevels, skip: int | None = None) -> np.ndarray:
    q = np.zeros((channels.n_rx, channels.n_rx), dtype=complex)
    for i, (p, h) in enumerate(zip(powers.uplink_tx, channels.uplink)):
        if i != skip:
            q += p * np.outer(h, h.conj())
    return q


def uplink_inn_matrix(l: int, inputs: RxDesignInputs) -> np.ndarray:
    ch, pw = inputs.channels, inputs.powers
    a = ch.agg_a
    q = _uplink_sum(ch, pw, skip=l) + a @ inputs.r_x @ a.conj().T
    q += pw.noise_bs * np.eye(ch.n_rx)
    return _hermitian(q)


def sensing_inn_matrix(m: int, inputs: RxDesignInputs) -> np.ndarray:
    ch, pw = inputs.channels, inputs.powers
    b = ch.agg_b[m]
    q = _uplink_sum(ch, pw) + b @ inputs.r_x @ b.conj().T
    q += pw.noise_bs * np.eye(ch.n_rx)
    return _hermitian(q)


def _solve_pd(q: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        factor = sla.cho_factor(q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("interference-plus-noise matrix is not positive definite") from exc
    x = sla.cho_solve(factor, g)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("receive beamformer solve produced non-finite values")
    return x


def _unit(x: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise np.linalg.LinAlgError("receive beamformer collapsed to zero")
    return x / nrm


def optimal_uplink_rx(l: int, inputs: RxDesignInputs, normalize: bool = True) -> np.ndarray:
    w = _solve_pd(uplink_inn_matrix(l, inputs), inputs.channels.uplink[l])
    return _unit(w) if normalize else w


def optimal_sensing_rx(m: int, inputs: RxDesignInputs, normalize: bool = True) -> np.ndarray:
    ch = inputs.channels
    g = ch.target_gains[m] * ch.target_rx[m]
    if not np.any(g):
        raise ValueError(f"target {m} has zero round-trip gain")
    u = _solve_pd(sensing_inn_matrix(m, inputs), g)
    return _unit(u) if normalize else u


def optimal_uplink_sinr(l: int, inputs: RxDesignInputs) -> float:
    """Closed-form optimum ``p_l h_l^H Q^{-1} h_l``."""
    h = inputs.channels.uplink[l]
    q = uplink_inn_matrix(l, inputs)
    return float(inputs.powers.uplink_tx[l] * np.vdot(h, _solve_pd(q, h)).real)


def optimal_receivers(inputs: RxDesignInputs) -> tuple[list[np.ndarray], list[np.ndarray]]:
    ch = inputs.channels
    w = [optimal_uplink_rx(l, inputs) for l in range(len(ch.uplink))]
    u = [optimal_sensing_rx(m, inputs) for m in range(len(ch.targets))]
    return w, u
